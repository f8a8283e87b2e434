#include "gka/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "gka/error.hpp"
#include "json_util.hpp"

namespace gka {

namespace {

using nlohmann::json;
using detail::ordered_json;

void reject_unknown(const json& obj, const std::set<std::string>& known, std::string_view where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.contains(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + std::string(where));
  }
}

template <typename T>
T get_field(const json& obj, const char* key, std::string_view where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("invalid value for '" + std::string(key) + "' in " + std::string(where) + ": " + e.what());
  }
}

std::size_t get_count(const json& obj, const char* key, std::string_view where) {
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) throw ConfigError("'" + std::string(key) + "' in " + std::string(where) + " must be a non-negative integer");
  return v.get<std::size_t>();
}

ModelConfig config_from(const json& doc) {
  if (!doc.is_object()) throw ConfigError("model config must be a JSON object");
  reject_unknown(doc, {"groups", "kernels", "latent_dim", "components", "hidden_width", "loss", "learning_rate",
                       "batch_size", "max_epochs", "patience", "grad_clip_norm", "seed", "validation_fraction",
                       "use_variational"},
                 "model config");
  ModelConfig cfg;
  constexpr std::string_view where = "model config";
  if (doc.contains("groups") && !doc.at("groups").is_null()) cfg.groups = parse_groups_json(doc.at("groups").dump());
  if (doc.contains("kernels")) cfg.kernels = get_count(doc, "kernels", where);
  if (doc.contains("latent_dim")) cfg.latent_dim = get_count(doc, "latent_dim", where);
  if (doc.contains("components")) {
    const json& c = doc.at("components");
    if (!c.is_array() || c.size() != 3) throw ConfigError("'components' must be an array of three integers");
    for (std::size_t t = 0; t < 3; ++t) {
      if (!c[t].is_number_unsigned()) throw ConfigError("'components' entries must be non-negative integers");
      cfg.components[t] = c[t].get<std::size_t>();
    }
  }
  if (doc.contains("hidden_width")) cfg.hidden_width = get_count(doc, "hidden_width", where);
  if (doc.contains("loss")) {
    const json& loss = doc.at("loss");
    if (!loss.is_object()) throw ConfigError("'loss' must be an object");
    reject_unknown(loss, {"mse_weight", "huber_delta", "kl_beta0"}, "loss config");
    if (loss.contains("mse_weight")) cfg.loss.mse_weight = get_field<double>(loss, "mse_weight", "loss config");
    if (loss.contains("huber_delta")) cfg.loss.huber_delta = get_field<double>(loss, "huber_delta", "loss config");
    if (loss.contains("kl_beta0")) cfg.loss.kl_beta0 = get_field<double>(loss, "kl_beta0", "loss config");
  }
  if (doc.contains("learning_rate")) cfg.learning_rate = get_field<double>(doc, "learning_rate", where);
  if (doc.contains("batch_size")) cfg.batch_size = get_count(doc, "batch_size", where);
  if (doc.contains("max_epochs")) cfg.max_epochs = get_count(doc, "max_epochs", where);
  if (doc.contains("patience")) cfg.patience = get_count(doc, "patience", where);
  if (doc.contains("grad_clip_norm")) cfg.grad_clip_norm = get_field<double>(doc, "grad_clip_norm", where);
  if (doc.contains("seed")) cfg.seed = get_field<std::uint64_t>(doc, "seed", where);
  if (doc.contains("validation_fraction")) {
    cfg.validation_fraction = get_field<double>(doc, "validation_fraction", where);
  }
  if (doc.contains("use_variational")) cfg.use_variational = get_field<bool>(doc, "use_variational", where);
  return cfg;
}

ordered_json config_to(const ModelConfig& cfg) {
  ordered_json doc;
  ordered_json groups = ordered_json::array();
  for (const GroupRange& g : cfg.groups) groups.push_back({g.begin, g.end});
  doc["groups"] = groups;
  doc["kernels"] = cfg.kernels;
  doc["latent_dim"] = cfg.latent_dim;
  doc["components"] = {cfg.components[0], cfg.components[1], cfg.components[2]};
  doc["hidden_width"] = cfg.hidden_width;
  doc["loss"] = {{"mse_weight", cfg.loss.mse_weight},
                 {"huber_delta", cfg.loss.huber_delta},
                 {"kl_beta0", cfg.loss.kl_beta0}};
  doc["learning_rate"] = cfg.learning_rate;
  doc["batch_size"] = cfg.batch_size;
  doc["max_epochs"] = cfg.max_epochs;
  doc["patience"] = cfg.patience;
  doc["grad_clip_norm"] = cfg.grad_clip_norm;
  doc["seed"] = cfg.seed;
  doc["validation_fraction"] = cfg.validation_fraction;
  doc["use_variational"] = cfg.use_variational;
  return doc;
}

ordered_json tensor_to_json(const Tensor& t) {
  if (t.rank() == 1) return ordered_json(t.values());
  if (t.rank() != 2) throw Error("checkpoint tensors must be rank 1 or 2");
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    rows.push_back(std::vector<double>(t.values().begin() + static_cast<std::ptrdiff_t>(i * t.cols()),
                                       t.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * t.cols())));
  }
  return rows;
}

void fill_tensor(const json& j, Tensor& t, const std::string& path) {
  std::vector<double> values;
  try {
    if (t.rank() == 1) {
      values = j.get<std::vector<double>>();
    } else {
      if (!j.is_array() || j.size() != t.rows()) throw DataError("row count mismatch");
      for (const auto& row : j) {
        auto r = row.get<std::vector<double>>();
        if (r.size() != t.cols()) throw DataError("column count mismatch");
        values.insert(values.end(), r.begin(), r.end());
      }
    }
  } catch (const std::exception& e) {
    throw DataError("checkpoint parameter '" + path + "' does not match shape " + to_string(t.shape()) + ": " +
                    e.what());
  }
  if (values.size() != t.size()) {
    throw DataError("checkpoint parameter '" + path + "' does not match shape " + to_string(t.shape()));
  }
  std::copy(values.begin(), values.end(), t.data().begin());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text << '\n';
}

}  // namespace

ModelConfig parse_model_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
  }
  return config_from(doc);
}

ModelConfig load_model_config(const std::filesystem::path& path) { return parse_model_config(read_text_file(path)); }

std::string model_config_to_json(const ModelConfig& cfg) { return detail::dump17(config_to(cfg)); }

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  ordered_json doc;
  doc["format_version"] = ckpt.format_version;
  doc["config"] = config_to(ckpt.config);
  doc["feature_count"] = ckpt.feature_count();
  doc["feature_names"] = ckpt.feature_names;
  doc["target_name"] = ckpt.target_name;
  doc["scaler"] = {{"x_mean", ckpt.scaler.x_mean},
                   {"x_std", ckpt.scaler.x_std},
                   {"y_mean", ckpt.scaler.y_mean},
                   {"y_std", ckpt.scaler.y_std}};
  doc["best_val_loss"] = ckpt.best_val_loss;
  doc["epoch"] = ckpt.epoch;
  ordered_json params = ordered_json::object();
  ckpt.params.visit([&](const std::string& path, const Tensor& t) { params[path] = tensor_to_json(t); });
  doc["parameters"] = std::move(params);
  return detail::dump17(doc);
}

Checkpoint checkpoint_from_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) throw DataError("checkpoint lacks format_version");
  Checkpoint ckpt;
  ckpt.format_version = doc.at("format_version").get<int>();
  if (ckpt.format_version != kCheckpointFormatVersion) {
    throw DataError("unsupported checkpoint format_version " + std::to_string(ckpt.format_version));
  }
  try {
    const std::size_t p = doc.at("feature_count").get<std::size_t>();
    ckpt.config = config_from(doc.at("config")).resolved(p);
    ckpt.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    ckpt.target_name = doc.at("target_name").get<std::string>();
    const json& sc = doc.at("scaler");
    ckpt.scaler.x_mean = sc.at("x_mean").get<std::vector<double>>();
    ckpt.scaler.x_std = sc.at("x_std").get<std::vector<double>>();
    ckpt.scaler.y_mean = sc.at("y_mean").get<double>();
    ckpt.scaler.y_std = sc.at("y_std").get<double>();
    ckpt.best_val_loss = doc.at("best_val_loss").get<double>();
    ckpt.epoch = doc.at("epoch").get<std::size_t>();

    ckpt.params = ModelParams::init(ckpt.config, p);
    const json& params = doc.at("parameters");
    std::size_t seen = 0;
    ckpt.params.visit([&](const std::string& path, Tensor& t) {
      if (!params.contains(path)) throw DataError("checkpoint is missing parameter '" + path + "'");
      fill_tensor(params.at(path), t, path);
      ++seen;
    });
    if (seen != params.size()) throw DataError("checkpoint has unexpected parameters");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_text(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_text_file(path)); }

std::vector<double> predict_raw(const Checkpoint& ckpt, const Dataset& raw) {
  if (raw.features() != ckpt.feature_count()) {
    throw DataError("dataset has " + std::to_string(raw.features()) + " features, checkpoint expects " +
                    std::to_string(ckpt.feature_count()));
  }
  const Dataset scaled = apply_scaler(raw, ckpt.scaler);
  return destandardize_predictions(predict(ckpt.params, ckpt.config, scaled.x), ckpt.scaler);
}

EvaluationReport score_predictions(std::span<const double> y, std::vector<double> predictions, std::size_t bins) {
  EvaluationReport report;
  report.metrics = regression_metrics(y, predictions);
  report.ci = concordance_index(y, predictions);
  report.bins = binwise_rmse(y, predictions, bins);
  report.predictions = std::move(predictions);
  return report;
}

EvaluationReport evaluate(const Checkpoint& ckpt, const Dataset& raw, std::size_t bins) {
  return score_predictions(raw.y, predict_raw(ckpt, raw), bins);
}

std::string metrics_to_json(const EvaluationReport& report) {
  ordered_json doc;
  doc["mse"] = report.metrics.mse;
  doc["rmse"] = report.metrics.rmse;
  doc["mae"] = report.metrics.mae;
  doc["r2"] = report.metrics.r2;
  doc["ci"] = report.ci;
  ordered_json bins = ordered_json::array();
  for (const BinRmse& b : report.bins) {
    ordered_json entry;
    entry["lo"] = b.lo;
    entry["hi"] = b.hi;
    entry["count"] = b.count;
    if (b.rmse) entry["rmse"] = *b.rmse;
    bins.push_back(std::move(entry));
  }
  doc["bins"] = std::move(bins);
  return detail::dump17(doc);
}

ImportanceScores importance_of(const Checkpoint& ckpt, const Dataset& raw) {
  if (raw.features() != ckpt.feature_count()) {
    throw DataError("dataset has " + std::to_string(raw.features()) + " features, checkpoint expects " +
                    std::to_string(ckpt.feature_count()));
  }
  const Dataset scaled = apply_scaler(raw, ckpt.scaler);
  const auto snapshots = global_attention_snapshots(ckpt.params, ckpt.config, scaled.x);
  return feature_importance(snapshots);
}

std::string importance_csv(const ImportanceScores& scores, const std::vector<std::string>& names) {
  const std::size_t p = scores.normalized.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores.normalized[a] > scores.normalized[b]; });
  std::string out = "feature_index,feature_name,importance\n";
  for (std::size_t j : order) {
    const std::string name = j < names.size() ? names[j] : "x" + std::to_string(j);
    out += std::to_string(j) + "," + name + "," + detail::format_float17(scores.normalized[j]) + "\n";
  }
  return out;
}

}  // namespace gka
