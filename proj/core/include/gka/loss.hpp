#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "gka/graph.hpp"

namespace gka {

struct LossConfig {
  double mse_weight = 0.7;   // omega in [0, 1]
  double huber_delta = 1.0;  // > 0, on standardized targets
  double kl_beta0 = 1e-3;    // >= 0
  static constexpr double warmup_fraction = 0.1;

  void validate() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/// min(1, (epoch / total_epochs) / 0.1).
double kl_warmup_weight(std::size_t epoch, std::size_t total_epochs);

struct LatentMoments {
  Var mean;
  Var log_var;
};

struct LossParts {
  Var total;
  double mse = 0.0;
  double huber = 0.0;
  double kl = 0.0;  // unweighted KL term; 0 without a latent block
  double kl_weight = 0.0;
};

/// omega * MSE + (1 - omega) * Huber + warmup(epoch) * beta0 * KL.
/// `prediction` is (n,) or (n, 1); `target` has n entries.
LossParts composite_loss(Var prediction, std::span<const double> target, const std::optional<LatentMoments>& latent,
                         std::size_t epoch, std::size_t total_epochs, const LossConfig& cfg);

}  // namespace gka
