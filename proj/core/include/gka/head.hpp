#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gka/kernel_attention.hpp"
#include "gka/layers.hpp"

namespace gka {

/// Three projection tiers of strictly decreasing width, a per-sample softmax
/// over tiers, and a two-layer readout to a scalar.
struct HeadParams {
  std::array<Tensor, 3> projections;  // (p, c1), (p, c2), (p, c3)
  Mlp2 mix;                           // p -> 3 tier logits
  Mlp2 readout;                       // c1 + c2 + c3 -> 1

  /// Throws ConfigError unless c1 > c2 > c3 >= 1 and c1 <= p.
  static HeadParams init(std::size_t features, std::array<std::size_t, 3> components, Rng& rng,
                         std::size_t hidden = 0);

  std::size_t features() const { return projections[0].dim(0); }
  std::array<std::size_t, 3> components() const;

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t t = 0; t < 3; ++t) f(prefix + ".projection" + std::to_string(t + 1), projections[t]);
    mix.visit(prefix + ".mix", f);
    readout.visit(prefix + ".readout", f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    for (std::size_t t = 0; t < 3; ++t) f(prefix + ".projection" + std::to_string(t + 1), projections[t]);
    mix.visit(prefix + ".mix", f);
    readout.visit(prefix + ".readout", f);
  }
};

void validate_components(std::size_t features, const std::array<std::size_t, 3>& components);

struct HeadOutput {
  Var prediction;    // (batch, 1)
  Var tier_weights;  // alpha: (batch, 3)
  Var weighted;      // alpha-scaled tier concat: (batch, c1 + c2 + c3)
};

HeadOutput head_forward(Binder& bind, Var global, const HeadParams& params);

struct ImportanceScores {
  std::vector<double> raw;         // I_j >= 0
  std::vector<double> normalized;  // min-max scaled to [0, 1]
};

/// I_j = mean_i | sum_l w[i, l] * K[i, l, j] | over every snapshot row,
/// followed by min-max normalization. Throws DataError for an empty trace
/// set and NumericError when all raw scores are equal.
ImportanceScores feature_importance(std::span<const AttentionSnapshot> traces);

}  // namespace gka
