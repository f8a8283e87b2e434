#pragma once

#include <cstdint>
#include <random>

#include "gka/tensor.hpp"

namespace gka {

/// Seeded random stream. Identical seeds give identical sequences on every
/// platform: uniforms come from mt19937_64 bits and normals from Box-Muller,
/// so no implementation-defined distribution is involved.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from (seed, stream) via SplitMix64.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// 1.0 with probability q, else 0.0.
  double bernoulli(double q) { return uniform() < q ? 1.0 : 0.0; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Tensor normal_tensor(Shape shape);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace gka
