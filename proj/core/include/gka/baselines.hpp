#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gka/tensor.hpp"

namespace gka {

/// Single-response PLS fitted by NIPALS on standardized X and centered y.
struct PlsModel {
  std::size_t n_components = 0;
  Tensor x_weights;                // (p, A)
  Tensor x_loadings;               // (p, A)
  std::vector<double> y_loadings;  // (A,)
  Tensor scores;                   // training scores (n, A)
  std::vector<double> coefficients;  // regression vector on standardized X
  std::vector<double> x_mean;
  std::vector<double> x_scale;
  double y_mean = 0.0;
};

inline constexpr std::size_t kNipalsMaxIterations = 500;
inline constexpr double kNipalsTolerance = 1e-10;

/// Throws ConfigError unless 1 <= n_components <= min(n - 1, p), DataError
/// when every column is constant, NumericError naming the component when
/// NIPALS does not converge.
PlsModel pls_fit(const Tensor& x, std::span<const double> y, std::size_t n_components);
std::vector<double> pls_predict(const PlsModel& model, const Tensor& x);

/// Largest component count admissible for n rows and p features.
std::size_t max_pls_components(std::size_t rows, std::size_t features);

struct PlsSelection {
  std::size_t n_components = 0;
  std::vector<double> scores;  // CV mean squared error or cumulative X-variance, per count
};

/// k-fold CV over 1..min(max_components, bounds); picks the lowest CV MSE.
PlsSelection select_pls_components_cv(const Tensor& x, std::span<const double> y, std::size_t max_components,
                                      std::size_t folds, std::uint64_t seed);

/// Smallest count whose cumulative explained X-variance reaches `threshold`.
PlsSelection select_pls_components_variance(const Tensor& x, std::span<const double> y, std::size_t max_components,
                                            double threshold = 0.95);

/// Ridge regression on standardized X and centered y.
struct RidgeModel {
  std::vector<double> weights;  // on standardized X
  std::vector<double> x_mean;
  std::vector<double> x_scale;
  double y_mean = 0.0;
  double lambda = 0.0;
};

/// Solves (Z'Z + lambda I) w = Z'y by Cholesky. Throws NumericError for a
/// singular system, suggesting lambda > 0.
RidgeModel ridge_fit(const Tensor& x, std::span<const double> y, double lambda);
std::vector<double> ridge_predict(const RidgeModel& model, const Tensor& x);

}  // namespace gka
