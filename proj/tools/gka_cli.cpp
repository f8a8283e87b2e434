#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gka/ablation.hpp"
#include "gka/baselines.hpp"
#include "gka/checkpoint.hpp"
#include "gka/error.hpp"
#include "gka/gradcheck.hpp"
#include "gka/trainer.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

using json = nlohmann::ordered_json;

struct DataArgs {
  std::string data;
  std::string target;
  std::string groups;
};

void add_data_options(CLI::App* cmd, DataArgs& args, bool with_groups) {
  cmd->add_option("--data", args.data, "Numeric CSV with a header row")->required();
  cmd->add_option("--target", args.target, "Name of the target column")->required();
  if (with_groups) cmd->add_option("--groups", args.groups, "JSON list of [start, end) feature groups");
}

gka::Dataset load(const DataArgs& args, bool warn_on_missing_groups) {
  std::optional<std::filesystem::path> groups;
  if (!args.groups.empty()) groups = args.groups;
  gka::WarningSink sink;
  if (!warn_on_missing_groups) sink = [](std::string_view) {};
  return gka::load_csv(args.data, args.target, groups, sink);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw gka::DataError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw gka::DataError("failed writing " + path);
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_train(const DataArgs& data, const std::string& config_path, const std::string& out,
              std::optional<std::uint64_t> seed, bool quiet) {
  gka::ModelConfig cfg = gka::load_model_config(config_path);
  if (seed) cfg.seed = *seed;
  const gka::Dataset raw = load(data, cfg.groups.empty());
  const gka::Dataset scaled = gka::standardize(raw);

  gka::EpochCallback progress;
  if (!quiet) {
    progress = [](const gka::EpochRecord& r) {
      std::fprintf(stderr, "epoch %zu  train %.6g  val %.6g  kl_weight %.3g\n", r.epoch, r.train_loss, r.val_loss,
                   r.kl_weight);
    };
  }
  gka::TrainResult result = gka::train(scaled, cfg, progress);

  gka::Checkpoint ckpt;
  ckpt.config = result.config;
  ckpt.params = std::move(result.params);
  ckpt.scaler = *scaled.scaler;
  ckpt.feature_names = raw.feature_names;
  ckpt.target_name = raw.target_name;
  ckpt.best_val_loss = result.best_val_loss;
  ckpt.epoch = result.best_epoch;
  gka::save_checkpoint(ckpt, out);

  json summary;
  summary["checkpoint"] = out;
  summary["epochs_run"] = result.history.size();
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_loss"] = result.best_val_loss;
  summary["parameters"] = ckpt.params.parameter_count();
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int run_eval(const DataArgs& data, const std::string& ckpt_path, std::size_t bins) {
  const gka::Checkpoint ckpt = gka::load_checkpoint(ckpt_path);
  const gka::Dataset raw = load(data, false);
  std::cout << gka::metrics_to_json(gka::evaluate(ckpt, raw, bins)) << '\n';
  return 0;
}

int run_importance(const DataArgs& data, const std::string& ckpt_path, const std::string& out) {
  const gka::Checkpoint ckpt = gka::load_checkpoint(ckpt_path);
  const gka::Dataset raw = load(data, false);
  write_file(out, gka::importance_csv(gka::importance_of(ckpt, raw), ckpt.feature_names));
  return 0;
}

struct BaselineArgs {
  std::string method;
  std::optional<std::size_t> components;
  std::optional<double> lambda;
  std::string selection = "cv";
  std::size_t folds = 10;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t bins = 10;
};

int run_baseline(const DataArgs& data, const BaselineArgs& args) {
  const gka::Dataset raw = load(data, false);
  const gka::SplitPlan plan = gka::split(raw.rows(), args.test_fraction, std::nullopt, args.seed);
  const gka::Dataset train = raw.subset(plan.train);
  const gka::Dataset test = raw.subset(plan.test);

  json out;
  out["method"] = args.method;
  std::vector<double> predicted;
  if (args.method == "pls") {
    std::size_t n = 0;
    if (args.components) {
      n = *args.components;
      out["selection"] = "fixed";
    } else {
      const std::size_t cap = std::min<std::size_t>(20, gka::max_pls_components(train.rows(), train.features()));
      const gka::PlsSelection sel =
          args.selection == "variance"
              ? gka::select_pls_components_variance(train.x, train.y, cap)
              : gka::select_pls_components_cv(train.x, train.y, cap, args.folds, args.seed);
      n = sel.n_components;
      out["selection"] = args.selection;
    }
    const gka::PlsModel model = gka::pls_fit(train.x, train.y, n);
    predicted = gka::pls_predict(model, test.x);
    out["components"] = n;
  } else {
    const double lambda = args.lambda.value_or(1.0);
    const gka::RidgeModel model = gka::ridge_fit(train.x, train.y, lambda);
    predicted = gka::ridge_predict(model, test.x);
    out["lambda"] = lambda;
  }
  out["train_rows"] = train.rows();
  out["test_rows"] = test.rows();
  out["test"] = json::parse(gka::metrics_to_json(gka::score_predictions(test.y, std::move(predicted), args.bins)));
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_synth(std::size_t n, const std::string& groups_path, double noise, std::uint64_t seed, const std::string& out) {
  const gka::FeatureGroupSpec spec = gka::load_groups_json(groups_path);
  gka::write_csv(gka::synth_nonlinear(n, spec, noise, seed), out);
  return 0;
}

int run_ablate(const DataArgs& data, const std::string& config_path, const std::vector<double>& fractions,
               std::optional<std::uint64_t> seed) {
  gka::ModelConfig cfg = gka::load_model_config(config_path);
  if (seed) cfg.seed = *seed;
  const gka::Dataset raw = load(data, cfg.groups.empty());
  if (cfg.groups.empty()) cfg.groups = raw.groups;
  const auto rows = gka::ablation_data_fraction(raw, cfg, fractions);
  std::cout << "fraction,train_rows,r2_variational,r2_ablated\n";
  for (const auto& r : rows) {
    std::cout << format_number(r.fraction) << ',' << r.train_rows << ',' << format_number(r.r2_variational) << ','
              << format_number(r.r2_ablated) << '\n';
  }
  return 0;
}

int run_gradcheck(std::uint64_t seed) {
  gka::GradcheckOptions options;
  options.seed = seed;
  const gka::GradcheckReport report = gka::gradcheck(options);
  json out;
  out["seed"] = seed;
  out["max_relative_error"] = report.max_relative_error;
  out["worst_parameter"] = report.worst_parameter;
  out["tolerance"] = options.tolerance;
  out["passed"] = report.passed;
  json params = json::array();
  for (const auto& p : report.parameters) {
    params.push_back({{"path", p.path}, {"relative_error", p.relative_error}, {"analytic_norm", p.analytic_norm}});
  }
  out["parameters"] = std::move(params);
  std::cout << out.dump(2) << '\n';
  if (!report.passed) {
    std::cerr << "gradcheck failed: relative error " << format_number(report.max_relative_error) << " at "
              << report.worst_parameter << '\n';
    return kExitNumeric;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grouped kernel-attention regression with PLS-style tiered head"};
  app.require_subcommand(1);

  DataArgs data;
  std::string config_path, ckpt_path, out_path, groups_path;
  std::optional<std::uint64_t> seed;
  std::size_t bins = 10;

  auto* train = app.add_subcommand("train", "Fit a model and write a checkpoint");
  add_data_options(train, data, true);
  train->add_option("--config", config_path, "Model config JSON")->required();
  train->add_option("--out", out_path, "Checkpoint path")->required();
  train->add_option("--seed", seed, "Overrides the config seed");
  bool quiet = false;
  train->add_flag("--quiet", quiet, "Suppress per-epoch progress on stderr");

  auto* eval = app.add_subcommand("eval", "Metrics JSON for a checkpoint on a dataset");
  eval->add_option("--ckpt", ckpt_path, "Checkpoint path")->required();
  add_data_options(eval, data, false);
  eval->add_option("--bins", bins, "Number of equal-width target bins")->check(CLI::PositiveNumber);

  auto* importance = app.add_subcommand("importance", "Global-tier feature importance CSV");
  importance->add_option("--ckpt", ckpt_path, "Checkpoint path")->required();
  add_data_options(importance, data, false);
  importance->add_option("--out", out_path, "Output CSV")->required();

  BaselineArgs baseline_args;
  auto* baseline = app.add_subcommand("baseline", "Linear PLS or ridge on an 80/20 split");
  baseline->add_option("--method", baseline_args.method, "pls or ridge")
      ->required()
      ->check(CLI::IsMember({"pls", "ridge"}));
  add_data_options(baseline, data, false);
  auto* components = baseline->add_option("--components", baseline_args.components, "Fixed PLS component count")
                         ->check(CLI::PositiveNumber);
  auto* lambda = baseline->add_option("--lambda", baseline_args.lambda, "Ridge penalty (default 1)")
                     ->check(CLI::NonNegativeNumber);
  components->excludes(lambda);
  baseline->add_option("--selection", baseline_args.selection, "PLS component selection when --components is absent")
      ->check(CLI::IsMember({"cv", "variance"}));
  baseline->add_option("--folds", baseline_args.folds, "CV folds for component selection");
  baseline->add_option("--test-fraction", baseline_args.test_fraction, "Held-out fraction");
  baseline->add_option("--seed", baseline_args.seed, "Split and fold seed");
  baseline->add_option("--bins", baseline_args.bins, "Number of equal-width target bins");

  std::size_t synth_n = 0;
  double noise = 0.0;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Write a synthetic grouped nonlinear dataset");
  synth->add_option("--n", synth_n, "Rows")->required()->check(CLI::PositiveNumber);
  synth->add_option("--groups", groups_path, "Groups JSON")->required();
  synth->add_option("--noise", noise, "Noise standard deviation")->required()->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_seed, "Seed")->required();
  synth->add_option("--out", out_path, "Output CSV")->required();

  std::vector<double> fractions;
  auto* ablate = app.add_subcommand("ablate", "Test R^2 with and without the variational block per data fraction");
  add_data_options(ablate, data, true);
  ablate->add_option("--config", config_path, "Model config JSON")->required();
  ablate->add_option("--fractions", fractions, "Comma-separated training fractions")->required()->delimiter(',');
  ablate->add_option("--seed", seed, "Overrides the config seed");

  std::uint64_t gradcheck_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  gradcheck->add_option("--seed", gradcheck_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return run_train(data, config_path, out_path, seed, quiet);
    if (*eval) return run_eval(data, ckpt_path, bins);
    if (*importance) return run_importance(data, ckpt_path, out_path);
    if (*baseline) {
      if (baseline_args.method == "pls" && baseline_args.lambda) throw gka::ConfigError("--lambda applies to ridge");
      if (baseline_args.method == "ridge" && baseline_args.components) {
        throw gka::ConfigError("--components applies to pls");
      }
      return run_baseline(data, baseline_args);
    }
    if (*synth) return run_synth(synth_n, groups_path, noise, synth_seed, out_path);
    if (*ablate) return run_ablate(data, config_path, fractions, seed);
    if (*gradcheck) return run_gradcheck(gradcheck_seed);
  } catch (const gka::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
