#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace gka {

struct RegressionMetrics {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
};

/// Throws DataError for length mismatch or n < 2, and "zero variance target"
/// when y is constant.
RegressionMetrics regression_metrics(std::span<const double> y, std::span<const double> predicted);

/// Fraction of pairs with y_i != y_j ordered the same way by the prediction;
/// prediction ties count one half. O(n^2).
double concordance_index(std::span<const double> y, std::span<const double> predicted);

struct BinRmse {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::optional<double> rmse;  // absent for empty bins
};

/// Equal-width bins over [min y, max y]; the top edge belongs to the last bin.
std::vector<BinRmse> binwise_rmse(std::span<const double> y, std::span<const double> predicted, std::size_t bins);

}  // namespace gka
