#include "gka/ablation.hpp"

#include <cmath>
#include <future>

#include "gka/error.hpp"
#include "gka/metrics.hpp"

namespace gka {

AblationPair train_ablation_pair(const Dataset& standardized, const ModelConfig& cfg) {
  ModelConfig with = cfg;
  with.use_variational = true;
  ModelConfig without = cfg;
  without.use_variational = false;
  auto pending = std::async(std::launch::async, [&] { return train(standardized, without); });
  AblationPair pair;
  pair.variational = train(standardized, with);
  pair.ablated = pending.get();
  return pair;
}

std::vector<AblationRow> ablation_data_fraction(const Dataset& raw, const ModelConfig& cfg,
                                                std::span<const double> fractions, double test_fraction) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("ablation fractions must lie in (0, 1]");
  }
  const SplitPlan plan = split(raw.rows(), test_fraction, std::nullopt, cfg.seed);
  const Dataset test = raw.subset(plan.test);
  const auto order = shuffled_indices(plan.train.size(), splitmix64(cfg.seed ^ 0xab1a7e5ULL));

  std::vector<AblationRow> rows;
  for (double f : fractions) {
    const std::size_t m = static_cast<std::size_t>(std::llround(f * static_cast<double>(plan.train.size())));
    if (m < 2 * cfg.batch_size) {
      throw ConfigError("fraction " + std::to_string(f) + " leaves " + std::to_string(m) +
                        " training rows, fewer than two batches of " + std::to_string(cfg.batch_size));
    }
    std::vector<std::size_t> picked;
    picked.reserve(m);
    for (std::size_t i = 0; i < m; ++i) picked.push_back(plan.train[order[i]]);
    const Dataset scaled = standardize(raw.subset(picked));
    const AblationPair pair = train_ablation_pair(scaled, cfg);

    const Dataset test_scaled = apply_scaler(test, *scaled.scaler);
    const auto score = [&](const TrainResult& r) {
      const auto pred = destandardize_predictions(predict(r.params, r.config, test_scaled.x), *scaled.scaler);
      return regression_metrics(test.y, pred).r2;
    };
    rows.push_back(AblationRow{f, m, score(pair.variational), score(pair.ablated)});
  }
  return rows;
}

}  // namespace gka
