#include "gka/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gka/error.hpp"

namespace gka {

namespace {

void require_same_length(std::span<const double> y, std::span<const double> predicted) {
  if (y.size() != predicted.size()) {
    throw DataError("length mismatch: " + std::to_string(y.size()) + " targets vs " +
                    std::to_string(predicted.size()) + " predictions");
  }
}

}  // namespace

RegressionMetrics regression_metrics(std::span<const double> y, std::span<const double> predicted) {
  require_same_length(y, predicted);
  const std::size_t n = y.size();
  if (n < 2) throw DataError("metrics need at least two samples");
  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= static_cast<double>(n);

  double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - predicted[i];
    ss_res += r * r;
    abs_sum += std::abs(r);
    ss_tot += (y[i] - y_mean) * (y[i] - y_mean);
  }
  if (ss_tot == 0.0) throw DataError("zero variance target");
  RegressionMetrics m;
  m.mse = ss_res / static_cast<double>(n);
  m.rmse = std::sqrt(m.mse);
  m.mae = abs_sum / static_cast<double>(n);
  m.r2 = 1.0 - ss_res / ss_tot;
  return m;
}

double concordance_index(std::span<const double> y, std::span<const double> predicted) {
  require_same_length(y, predicted);
  if (y.size() < 2) throw DataError("concordance index needs at least two samples");
  double concordant = 0.0;
  std::size_t comparable = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = i + 1; j < y.size(); ++j) {
      if (y[i] == y[j]) continue;
      ++comparable;
      const double dy = y[i] - y[j];
      const double dp = predicted[i] - predicted[j];
      if (dp == 0.0) {
        concordant += 0.5;
      } else if ((dy > 0.0) == (dp > 0.0)) {
        concordant += 1.0;
      }
    }
  }
  if (comparable == 0) throw DataError("no comparable pairs");
  return concordant / static_cast<double>(comparable);
}

std::vector<BinRmse> binwise_rmse(std::span<const double> y, std::span<const double> predicted, std::size_t bins) {
  require_same_length(y, predicted);
  if (bins == 0) throw ConfigError("bin count must be at least 1");
  if (y.empty()) throw DataError("binwise RMSE needs at least one sample");
  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = (hi - lo) / static_cast<double>(bins);

  std::vector<BinRmse> out(bins);
  std::vector<double> sq(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = lo + width * static_cast<double>(b);
    out[b].hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::size_t b = 0;
    if (width > 0.0) b = std::min(bins - 1, static_cast<std::size_t>((y[i] - lo) / width));
    const double r = y[i] - predicted[i];
    sq[b] += r * r;
    ++out[b].count;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (out[b].count > 0) out[b].rmse = std::sqrt(sq[b] / static_cast<double>(out[b].count));
  }
  return out;
}

}  // namespace gka
