#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gka/data.hpp"
#include "gka/metrics.hpp"
#include "gka/model.hpp"

namespace gka {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  ModelConfig config;  // resolved
  ModelParams params;
  Scaler scaler;
  std::vector<std::string> feature_names;
  std::string target_name;
  double best_val_loss = 0.0;
  std::size_t epoch = 0;

  std::size_t feature_count() const { return params.features(); }
};

/// Parses a JSON model config. Keys mirror ModelConfig field names; unknown
/// keys raise ConfigError.
ModelConfig parse_model_config(std::string_view json_text);
ModelConfig load_model_config(const std::filesystem::path& path);
std::string model_config_to_json(const ModelConfig& cfg);

/// Single JSON document; every parameter tensor keyed by its visit path and
/// stored as nested lists of 17-significant-digit decimals.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view json_text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EvaluationReport {
  RegressionMetrics metrics;
  double ci = 0.0;
  std::vector<BinRmse> bins;
  std::vector<double> predictions;  // original target scale
};

/// Eval-mode predictions on raw (unstandardized) data using the checkpoint's
/// scaler. Throws DataError when the feature counts differ.
std::vector<double> predict_raw(const Checkpoint& ckpt, const Dataset& raw);
EvaluationReport evaluate(const Checkpoint& ckpt, const Dataset& raw, std::size_t bins = 10);
/// Metrics and CI for arbitrary predictions, as used by the baselines.
EvaluationReport score_predictions(std::span<const double> y, std::vector<double> predictions, std::size_t bins);

/// {"mse":..., "rmse":..., "mae":..., "r2":..., "ci":..., "bins":[...]}
std::string metrics_to_json(const EvaluationReport& report);

/// Global-tier importance over every row of `raw`.
ImportanceScores importance_of(const Checkpoint& ckpt, const Dataset& raw);
/// `feature_index,feature_name,importance`, sorted by descending importance.
std::string importance_csv(const ImportanceScores& scores, const std::vector<std::string>& names);

}  // namespace gka
