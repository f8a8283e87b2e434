#include "gka/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gka/calibration.hpp"
#include "gka/error.hpp"

namespace gka {

void LossConfig::validate() const {
  if (!(mse_weight >= 0.0 && mse_weight <= 1.0)) throw ConfigError("mse_weight must lie in [0, 1]");
  if (!(huber_delta > 0.0)) throw ConfigError("huber_delta must be positive");
  if (!(kl_beta0 >= 0.0) || !std::isfinite(kl_beta0)) throw ConfigError("kl_beta0 must be finite and >= 0");
}

double kl_warmup_weight(std::size_t epoch, std::size_t total_epochs) {
  if (total_epochs == 0) throw ConfigError("total_epochs must be positive");
  if (epoch > total_epochs) throw ConfigError("epoch exceeds total_epochs");
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return std::min(1.0, t / LossConfig::warmup_fraction);
}

LossParts composite_loss(Var prediction, std::span<const double> target, const std::optional<LatentMoments>& latent,
                         std::size_t epoch, std::size_t total_epochs, const LossConfig& cfg) {
  cfg.validate();
  const Shape& shape = prediction.shape();
  const bool column = shape.size() == 2 && shape[1] == 1;
  if (!(shape.size() == 1 || column) || shape[0] != target.size() || target.empty()) {
    throw ShapeError("composite_loss: prediction " + to_string(shape) + " vs target of length " +
                     std::to_string(target.size()));
  }
  Graph& graph = prediction.graph();
  Var y = graph.constant(Tensor(shape, std::vector<double>(target.begin(), target.end())));
  Var residual = sub(prediction, y);
  Var mse = mean(square(residual));
  Var hub = mean(huber(residual, cfg.huber_delta));

  LossParts parts;
  parts.total = add(scale(mse, cfg.mse_weight), scale(hub, 1.0 - cfg.mse_weight));
  parts.mse = mse.value().item();
  parts.huber = hub.value().item();
  parts.kl_weight = kl_warmup_weight(epoch, total_epochs);
  if (latent) {
    Var kl = kl_term(latent->mean, latent->log_var);
    parts.kl = kl.value().item();
    const double w = parts.kl_weight * cfg.kl_beta0;
    if (w != 0.0) parts.total = add(parts.total, scale(kl, w));
  }
  return parts;
}

}  // namespace gka
