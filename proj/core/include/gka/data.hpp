#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gka/kernel_attention.hpp"
#include "gka/tensor.hpp"

namespace gka {

/// Per-column z-score statistics. Population (1/n) standard deviation;
/// constant columns record std = 1.
struct Scaler {
  std::vector<double> x_mean;
  std::vector<double> x_std;
  double y_mean = 0.0;
  double y_std = 1.0;
};

struct Dataset {
  Tensor x;                  // (n, p)
  std::vector<double> y;     // (n,)
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  FeatureGroupSpec groups;
  std::optional<Scaler> scaler;  // set once standardized

  std::size_t rows() const { return y.size(); }
  std::size_t features() const { return x.rank() == 2 ? x.cols() : 0; }

  /// Rows in the given order; scaler and metadata carried over.
  Dataset subset(std::span<const std::size_t> rows) const;
};

using WarningSink = std::function<void(std::string_view)>;

/// Reads a headered numeric CSV. Without `groups_path` the features form a
/// single group and a warning goes to `warn` (stderr by default).
Dataset load_csv(const std::filesystem::path& path, std::string_view target_column,
                 const std::optional<std::filesystem::path>& groups_path = std::nullopt,
                 const WarningSink& warn = {});

/// Parses CSV text; `source` names it in error messages.
Dataset parse_csv(std::string_view text, std::string_view target_column, std::string_view source = "<csv>");

/// Writes features then target, floats at 17 significant digits.
void write_csv(const Dataset& ds, const std::filesystem::path& path);
std::string format_csv(const Dataset& ds);

/// `[[0, 50], [50, 100]]` half-open intervals.
FeatureGroupSpec parse_groups_json(std::string_view text);
FeatureGroupSpec load_groups_json(const std::filesystem::path& path);

Scaler fit_scaler(const Dataset& ds);
/// Applies `scaler` to features and target; the result carries the scaler.
Dataset apply_scaler(const Dataset& ds, const Scaler& scaler);
/// Fits and applies a scaler in one step.
Dataset standardize(const Dataset& ds);
std::vector<double> destandardize_predictions(std::span<const double> predicted, const Scaler& scaler);

/// Coefficients of y = sum_g a_g tanh(X_g b_g) + c (X_1 u)(X_2 v) + noise.
struct SynthCoefficients {
  std::vector<double> amplitude;           // a_g
  std::vector<std::vector<double>> slope;  // b_g, one vector per group
  double interaction = 1.0;                // c
  std::vector<double> left;                // u over group 1
  std::vector<double> right;               // v over group 2
};

/// Coefficients drawn from `seed`: |a_g| in [0.8, 1.2] with alternating
/// sign, b_g of norm 2, unit u and v, c = 1.
SynthCoefficients default_synth_coefficients(const FeatureGroupSpec& spec, std::uint64_t seed);

/// Noise-free response for the given design matrix.
std::vector<double> synth_response(const Tensor& x, const FeatureGroupSpec& spec, const SynthCoefficients& coef);

/// n standard-normal rows grouped by `spec` (at least two groups) with a
/// response that is nonlinear within groups and has one cross-group product.
Dataset synth_nonlinear(std::size_t n, const FeatureGroupSpec& spec, double noise_sigma, std::uint64_t seed,
                        const std::optional<SynthCoefficients>& coefficients = std::nullopt);

struct SplitPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::vector<std::size_t>> folds;  // partition of `train`
  std::uint64_t seed = 0;
};

/// Seeded shuffle; round(n * test_fraction) test rows (at least one of each
/// role). Folds are contiguous chunks of the shuffled training rows, the
/// first (train % k) of them one row larger.
SplitPlan split(std::size_t n, double test_fraction, std::optional<std::size_t> k_folds, std::uint64_t seed);

/// Seeded permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// k contiguous folds over `rows`, sizes differing by at most one.
std::vector<std::vector<std::size_t>> make_folds(std::span<const std::size_t> rows, std::size_t k);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace gka
