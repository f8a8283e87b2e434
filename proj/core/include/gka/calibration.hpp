#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gka/layers.hpp"

namespace gka {

enum class Mode { train, eval };

/// Supplier of the stochastic draws used in train mode.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  /// (rows, width) 0/1 mask; entries of row i are 1 with probability keep[i].
  virtual Tensor dropout_mask(std::span<const double> keep, std::size_t width) = 0;
  /// (rows, cols) standard normal draws.
  virtual Tensor standard_normal(std::size_t rows, std::size_t cols) = 0;
};

/// Masks and normals from two independent seeded streams.
class RngNoise final : public NoiseSource {
 public:
  explicit RngNoise(std::uint64_t seed);

  Tensor dropout_mask(std::span<const double> keep, std::size_t width) override;
  Tensor standard_normal(std::size_t rows, std::size_t cols) override;

 private:
  Rng mask_rng_;
  Rng normal_rng_;
};

/// Records draws from an inner source, then replays them in order after
/// freeze(). Used to make a train-mode forward a deterministic function.
class FrozenNoise final : public NoiseSource {
 public:
  explicit FrozenNoise(NoiseSource& inner) : inner_(inner) {}

  void freeze();

  Tensor dropout_mask(std::span<const double> keep, std::size_t width) override;
  Tensor standard_normal(std::size_t rows, std::size_t cols) override;

 private:
  NoiseSource& inner_;
  std::vector<Tensor> masks_;
  std::vector<Tensor> normals_;
  std::size_t next_mask_ = 0;
  std::size_t next_normal_ = 0;
  bool frozen_ = false;
};

/// Input-conditioned dropout rate and scale for the transform branch.
struct CalibrationParams {
  Mlp2 transform;  // p -> p
  Mlp2 gate;       // p -> 2 logits: [drop, scale]
  double drop_lo = 0.0;
  double drop_hi = 0.4;
  double scale_lo = 0.5;
  double scale_hi = 1.0;

  static CalibrationParams init(std::size_t features, Rng& rng, std::size_t hidden = 0);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    transform.visit(prefix + ".transform", f);
    gate.visit(prefix + ".gate", f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    transform.visit(prefix + ".transform", f);
    gate.visit(prefix + ".gate", f);
  }
};

struct CalibrationOutput {
  Var output;  // S: (batch, p)
  Var drop;    // delta: (batch, 1)
  Var scale;   // gamma: (batch, 1)
};

/// S = Z + gamma * (T(Z) * M) / (1 - delta). In eval mode the mask is
/// replaced by its expectation, giving S = Z + gamma * T(Z). The mask is a
/// constant of the graph; gradients reach delta through the 1/(1 - delta)
/// factor only.
CalibrationOutput self_calibrate(Binder& bind, Var z, const CalibrationParams& params, Mode mode,
                                 NoiseSource* noise);

inline constexpr double kLogVarBound = 10.0;

/// Encoder, Gaussian heads, and decoder of the latent block.
struct VariationalParams {
  Affine encoder;  // p -> ceil(p/2), followed by tanh
  Affine mean;     // ceil(p/2) -> d
  Affine log_var;  // ceil(p/2) -> d
  Mlp2 decoder;    // d -> p

  static VariationalParams init(std::size_t features, std::size_t latent, Rng& rng, std::size_t hidden = 0);

  std::size_t latent_dim() const { return mean.out(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    encoder.visit(prefix + ".encoder", f);
    mean.visit(prefix + ".mean", f);
    log_var.visit(prefix + ".log_var", f);
    decoder.visit(prefix + ".decoder", f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    encoder.visit(prefix + ".encoder", f);
    mean.visit(prefix + ".mean", f);
    log_var.visit(prefix + ".log_var", f);
    decoder.visit(prefix + ".decoder", f);
  }
};

struct VariationalOutput {
  Var output;   // V: (batch, p)
  Var mean;     // (batch, d)
  Var log_var;  // (batch, d), clamped to +-kLogVarBound
  Var latent;   // z: (batch, d)
};

/// z = mu + eps * exp(log_var / 2) in train mode, z = mu in eval mode;
/// V = S + decoder(z).
VariationalOutput variational_encode_decode(Binder& bind, Var s, const VariationalParams& params, Mode mode,
                                            NoiseSource* noise);

/// KL(N(mu, exp(log_var)) || N(0, I)) summed over latent dims, averaged over rows.
Var kl_term(Var mean, Var log_var);

}  // namespace gka
