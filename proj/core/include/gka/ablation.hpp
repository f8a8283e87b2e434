#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gka/data.hpp"
#include "gka/trainer.hpp"

namespace gka {

struct AblationRow {
  double fraction = 0.0;
  std::size_t train_rows = 0;
  double r2_variational = 0.0;
  double r2_ablated = 0.0;
};

/// Two trainings on the same standardized data whose configs differ only in
/// use_variational.
struct AblationPair {
  TrainResult variational;
  TrainResult ablated;
};

AblationPair train_ablation_pair(const Dataset& standardized, const ModelConfig& cfg);

/// Seeded train/test split of `raw`; for each fraction a seeded subsample of
/// the training rows trains both variants, scored by test R^2 on the original
/// target scale. Throws ConfigError for fractions outside (0, 1] or a
/// subsample smaller than two batches.
std::vector<AblationRow> ablation_data_fraction(const Dataset& raw, const ModelConfig& cfg,
                                                std::span<const double> fractions, double test_fraction = 0.2);

}  // namespace gka
