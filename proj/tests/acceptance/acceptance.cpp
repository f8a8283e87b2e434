// Prints one PASS/FAIL line per acceptance criterion; exit status is the failure count.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gka/ablation.hpp"
#include "gka/baselines.hpp"
#include "gka/checkpoint.hpp"
#include "gka/gradcheck.hpp"
#include "gka/metrics.hpp"
#include "gka/trainer.hpp"
#include "oracles.hpp"

namespace {

using namespace gka;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << "violated: " << what;
      pass = false;
    }
  }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double max_row_deviation(const Tensor& t, std::size_t rows, std::size_t cols, double target, bool squared) {
  double worst = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += squared ? t[r * cols + c] * t[r * cols + c] : t[r * cols + c];
    worst = std::max(worst, std::abs((squared ? std::sqrt(s) : s) - target));
  }
  return worst;
}

void zero(Mlp2& net) {
  for (Affine* a : {&net.hidden, &net.output}) {
    a->weight.fill(0.0);
    a->bias.fill(0.0);
  }
}

Outcome gradient_correctness() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    GradcheckOptions options;
    options.seed = seed;
    const GradcheckReport r = gradcheck(options);
    worst = std::max(worst, r.max_relative_error);
    o.require(r.passed && r.max_relative_error < 1e-4, "seed " + std::to_string(seed) + " " + r.worst_parameter);
  }
  o.detail << "max relative error " << worst << " over seeds 0-2";
  return o;
}

Outcome structural_invariants() {
  Outcome o;
  double kernel_norm = 0.0, weight_sum = 0.0, alpha_sum = 0.0, kl_min = INFINITY;
  double drop_lo = INFINITY, drop_hi = -INFINITY, scale_lo = INFINITY, scale_hi = -INFINITY, identity = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t p = 3 + seed % 6, k = 1 + seed % 4, n = 16;
    Tensor x = oracle::random_matrix(n, p, 100 + seed);
    for (std::size_t i = 0; i < x.size(); i += 5) x[i] *= 20.0;
    Graph g;
    Binder bind(g);

    KernelAttentionParams att = KernelAttentionParams::init(p, k, rng);
    oracle::randomize(att, 200 + seed);
    const AttentionTrace trace = kernel_attention_forward(bind, g.constant(x), att);
    kernel_norm = std::max(kernel_norm, max_row_deviation(trace.kernels.value(), n * k, p, 1.0, true));
    weight_sum = std::max(weight_sum, max_row_deviation(trace.weights.value(), n, k, 1.0, false));

    const HeadParams head = HeadParams::init(p, default_components(p), rng);
    alpha_sum = std::max(alpha_sum,
                         max_row_deviation(head_forward(bind, g.constant(x), head).tier_weights.value(), n, 3, 1.0, false));

    CalibrationParams cal = CalibrationParams::init(p, rng);
    const CalibrationOutput c = self_calibrate(bind, g.constant(x), cal, Mode::eval, nullptr);
    for (double d : c.drop.value().data()) drop_lo = std::min(drop_lo, d), drop_hi = std::max(drop_hi, d);
    for (double s : c.scale.value().data()) scale_lo = std::min(scale_lo, s), scale_hi = std::max(scale_hi, s);

    const Tensor mu = oracle::random_matrix(n, 3, 300 + seed), lv = oracle::random_matrix(n, 3, 400 + seed);
    kl_min = std::min(kl_min, kl_term(g.constant(mu), g.constant(lv)).value().item());

    Graph g0;
    Binder zeroed(g0);
    att.projection.weight.fill(0.0);
    att.projection.bias.fill(0.0);
    identity = std::max(identity, oracle::max_abs_diff(kernel_attention_forward(zeroed, g0.constant(x), att).output.value(), x));
    zero(cal.transform);
    RngNoise noise(seed);
    for (Mode mode : {Mode::eval, Mode::train}) {
      identity = std::max(identity,
                          oracle::max_abs_diff(self_calibrate(zeroed, g0.constant(x), cal, mode, &noise).output.value(), x));
    }
    VariationalParams var = VariationalParams::init(p, 2, rng);
    zero(var.decoder);
    for (Mode mode : {Mode::eval, Mode::train}) {
      identity = std::max(identity,
                          oracle::max_abs_diff(variational_encode_decode(zeroed, g0.constant(x), var, mode, &noise).output.value(), x));
    }
  }
  Graph g;
  const double kl_zero = kl_term(g.constant(Tensor(Shape{4, 3})), g.constant(Tensor(Shape{4, 3}))).value().item();

  o.require(kernel_norm <= 1e-10, "kernel unit norm");
  o.require(weight_sum <= 1e-12, "kernel weight simplex");
  o.require(alpha_sum <= 1e-12, "tier weight simplex");
  o.require(drop_lo >= 0.0 && drop_hi <= 0.4, "delta range");
  o.require(scale_lo >= 0.5 && scale_hi <= 1.0, "gamma range");
  o.require(kl_min >= 0.0 && kl_zero == 0.0, "KL sign");
  o.require(identity == 0.0, "residual identity");
  o.detail << "|norm-1| " << kernel_norm << ", simplex " << std::max(weight_sum, alpha_sum) << ", delta [" << drop_lo
           << ", " << drop_hi << "], gamma [" << scale_lo << ", " << scale_hi << "], KL min " << kl_min
           << ", identity gap " << identity;
  return o;
}

Outcome loop_oracles() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const std::size_t p = 6, n = 4;
    const Tensor x = oracle::random_matrix(n, p, 500 + seed);
    const auto rows = oracle::rows_of(x);
    Graph g;
    Binder bind(g);

    KernelAttentionParams att = KernelAttentionParams::init(p, 3, rng);
    oracle::randomize(att, 600 + seed);
    const AttentionTrace t = kernel_attention_forward(bind, g.constant(x), att);
    const oracle::AttentionLoop ref = oracle::attention(rows, att);
    worst = std::max({worst, oracle::max_abs_diff(t.output.value(), oracle::tensor_of(ref.z)),
                      oracle::max_abs_diff(t.weights.value(), oracle::tensor_of(ref.weights))});

    const CalibrationParams cal = CalibrationParams::init(p, rng);
    const VariationalParams var = VariationalParams::init(p, 2, rng);
    RngNoise inner(seed);
    FrozenNoise noise(inner);
    const Tensor s_train = self_calibrate(bind, g.constant(x), cal, Mode::train, &noise).output.value();
    const Tensor v_train = variational_encode_decode(bind, g.constant(x), var, Mode::train, &noise).output.value();
    noise.freeze();
    const std::vector<double> unused(n, 0.5);
    const Tensor mask = noise.dropout_mask(unused, p);
    const Tensor eps = noise.standard_normal(n, 2);
    worst = std::max(worst, oracle::max_abs_diff(s_train, oracle::tensor_of(oracle::calibration(rows, cal, oracle::rows_of(mask)))));
    worst = std::max(worst, oracle::max_abs_diff(self_calibrate(bind, g.constant(x), cal, Mode::eval, nullptr).output.value(),
                                                 oracle::tensor_of(oracle::calibration(rows, cal))));
    worst = std::max(worst, oracle::max_abs_diff(v_train, oracle::tensor_of(oracle::variational(rows, var, oracle::rows_of(eps)))));
    worst = std::max(worst, oracle::max_abs_diff(variational_encode_decode(bind, g.constant(x), var, Mode::eval, nullptr).output.value(),
                                                 oracle::tensor_of(oracle::variational(rows, var))));

    const HeadParams head = HeadParams::init(p, {4, 3, 2}, rng);
    worst = std::max(worst, oracle::max_abs_diff(head_forward(bind, g.constant(x), head).prediction.value().data(),
                                                 oracle::head(rows, head)));

    ModelConfig cfg;
    cfg.groups = FeatureGroupSpec({{0, 3}, {3, 6}});
    cfg.kernels = 2;
    cfg = cfg.resolved(p);
    ModelParams params = ModelParams::init(cfg, p);
    oracle::randomize(params, 700 + seed);
    worst = std::max(worst, oracle::max_abs_diff(predict(params, cfg, x), oracle::model(rows, params, cfg)));
  }
  o.require(worst <= 1e-10, "elementwise gap");
  o.detail << "max elementwise gap " << worst << " (attention, calibration, variational, head, full model)";
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  Rng rng(11);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<double>(rng.below(10));
      p[i] = rng.uniform() < 0.3 ? static_cast<double>(rng.below(4)) : rng.normal();
    }
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) y[0] += 1.0;
    if (concordance_index(y, p) != oracle::concordance_brute_force(y, p)) ++mismatches;
  }
  const std::vector<double> y{1, 2, 3}, p{1, 2, 4};
  const RegressionMetrics m = regression_metrics(y, p);
  o.require(mismatches == 0, "CI brute force");
  o.require(m.r2 == 0.5 && m.mse == 1.0 / 3.0 && m.mae == 1.0 / 3.0 && m.rmse == std::sqrt(1.0 / 3.0), "hand example");
  o.detail << mismatches << " CI mismatches in 100; hand example r2 " << m.r2 << " rmse " << m.rmse;
  return o;
}

Outcome baseline_correctness() {
  Outcome o;
  double pls_gap = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor x = oracle::random_matrix(20, 5, 800 + seed);
    std::vector<double> y(20);
    Rng rng(900 + seed);
    for (std::size_t i = 0; i < 20; ++i) {
      y[i] = 0.5 * rng.normal();
      for (std::size_t j = 0; j < 5; ++j) y[i] += (0.3 * static_cast<double>(j) - 0.5) * x(i, j);
    }
    for (std::size_t a = 1; a <= 5; ++a)
      pls_gap = std::max(pls_gap, oracle::max_abs_diff(pls_predict(pls_fit(x, y, a), x), oracle::pls_krylov_predict(x, y, a, x)));
  }
  const Tensor x1 = oracle::random_matrix(15, 1, 1);
  const Tensor x4 = oracle::random_matrix(25, 4, 2);
  std::vector<double> y1(15), y4(25);
  Rng rng(3);
  for (std::size_t i = 0; i < 15; ++i) y1[i] = 2.0 * x1(i, 0) + rng.normal();
  for (std::size_t i = 0; i < 25; ++i) y4[i] = x4(i, 0) - x4(i, 3) + rng.normal();
  const double single = oracle::max_abs_diff(pls_predict(pls_fit(x1, y1, 1), x1), oracle::ols_predict(x1, y1, x1));
  const double ridge = oracle::max_abs_diff(ridge_predict(ridge_fit(x4, y4, 0.0), x4), oracle::ols_predict(x4, y4, x4));
  o.require(pls_gap <= 1e-6, "PLS vs SVD/Krylov route");
  o.require(single <= 1e-10, "single-feature PLS vs OLS");
  o.require(ridge <= 1e-10, "ridge(0) vs OLS");
  o.detail << "PLS gap " << pls_gap << ", single-feature gap " << single << ", ridge(0) gap " << ridge;
  return o;
}

Outcome capacity() {
  Outcome o;
  const FeatureGroupSpec spec({{0, 4}, {4, 8}});
  const Dataset raw = synth_nonlinear(64, spec, 0.1, 7);
  const Dataset scaled = standardize(raw);
  ModelConfig cfg;
  cfg.groups = spec;
  cfg.max_epochs = 500;
  cfg.patience = 500;
  cfg.validation_fraction = 0.0;
  cfg.seed = 7;
  const TrainResult r = train(scaled, cfg);
  const auto pred = destandardize_predictions(predict(r.params, r.config, scaled.x), *scaled.scaler);
  const double r2 = regression_metrics(raw.y, pred).r2;
  o.require(r2 > 0.99, "training R^2 > 0.99");
  o.detail << "training R^2 " << r2 << " after " << r.history.size() << " epochs";
  return o;
}

struct SeedRun {
  double pls = 0.0;
  std::size_t pls_components = 0;
  std::vector<AblationRow> ablation;  // fractions 0.1 and 1.0
};

const std::vector<SeedRun>& synthetic_runs() {
  static const std::vector<SeedRun> runs = [] {
    std::vector<SeedRun> out;
    const FeatureGroupSpec spec({{0, 5}, {5, 10}});
    const std::vector<double> fractions{0.1, 1.0};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Dataset raw = synth_nonlinear(1000, spec, 0.1, seed);
      ModelConfig cfg;
      cfg.groups = spec;
      cfg.max_epochs = 300;
      cfg.seed = seed;
      SeedRun run;
      run.ablation = ablation_data_fraction(raw, cfg, fractions, 0.2);

      const SplitPlan plan = split(raw.rows(), 0.2, std::nullopt, seed);
      const Dataset tr = raw.subset(plan.train), te = raw.subset(plan.test);
      const std::size_t cap = std::min<std::size_t>(20, max_pls_components(tr.rows(), tr.features()));
      run.pls_components = select_pls_components_cv(tr.x, tr.y, cap, 10, seed).n_components;
      run.pls = regression_metrics(te.y, pls_predict(pls_fit(tr.x, tr.y, run.pls_components), te.x)).r2;
      out.push_back(std::move(run));
    }
    return out;
  }();
  return runs;
}

Outcome directional_superiority() {
  Outcome o;
  std::vector<double> model, pls;
  for (const SeedRun& r : synthetic_runs()) {
    model.push_back(r.ablation[1].r2_variational);
    pls.push_back(r.pls);
  }
  const double gap = median(model) - median(pls);
  o.require(gap >= 0.05, "median gap >= 0.05");
  o.detail << "median test R^2 model " << median(model) << " vs CV-PLS " << median(pls) << " (gap " << gap << ")";
  return o;
}

Outcome ablation_direction() {
  Outcome o;
  std::vector<double> v10, a10, v100, a100;
  for (const SeedRun& r : synthetic_runs()) {
    v10.push_back(r.ablation[0].r2_variational);
    a10.push_back(r.ablation[0].r2_ablated);
    v100.push_back(r.ablation[1].r2_variational);
    a100.push_back(r.ablation[1].r2_ablated);
  }
  o.require(median(v10) >= median(a10), "10% median variational >= ablated");
  o.require(std::abs(median(v100) - median(a100)) <= 0.05, "100% medians within 0.05");
  o.detail << "10%: " << median(v10) << " vs " << median(a10) << "; 100%: " << median(v100) << " vs "
           << median(a100);
  return o;
}

Outcome warmup_schedule() {
  Outcome o;
  o.require(kl_warmup_weight(5, 100) == 0.5, "0.5 at 5/100");
  bool flat = true;
  for (std::size_t e = 10; e <= 100; ++e) flat = flat && kl_warmup_weight(e, 100) == 1.0;
  o.require(flat, "1.0 from epoch 10");
  o.detail << "w(5/100) = " << kl_warmup_weight(5, 100) << ", w(e >= 10) = 1";
  return o;
}

struct SmallFit {
  Dataset raw;
  Checkpoint ckpt;
};

const SmallFit& small_fit() {
  static const SmallFit fit = [] {
    SmallFit f;
    const FeatureGroupSpec spec({{0, 3}, {3, 6}});
    f.raw = synth_nonlinear(150, spec, 0.1, 21);
    const Dataset scaled = standardize(f.raw);
    ModelConfig cfg;
    cfg.groups = spec;
    cfg.kernels = 3;
    cfg.max_epochs = 15;
    cfg.seed = 5;
    const TrainResult r = train(scaled, cfg);
    f.ckpt.config = r.config;
    f.ckpt.params = r.params;
    f.ckpt.scaler = *scaled.scaler;
    f.ckpt.feature_names = scaled.feature_names;
    f.ckpt.target_name = scaled.target_name;
    f.ckpt.best_val_loss = r.best_val_loss;
    f.ckpt.epoch = r.best_epoch;
    return f;
  }();
  return fit;
}

Outcome determinism_and_persistence() {
  Outcome o;
  const SmallFit& f = small_fit();
  const Dataset scaled = standardize(f.raw);
  const TrainResult a = train(scaled, f.ckpt.config), b = train(scaled, f.ckpt.config);
  o.require(a.history == b.history, "identical history");
  Checkpoint ca = f.ckpt, cb = f.ckpt;
  ca.params = a.params;
  cb.params = b.params;
  o.require(checkpoint_to_json(ca) == checkpoint_to_json(cb), "identical parameters");
  const auto path = std::filesystem::temp_directory_path() / "gka_acceptance_ckpt.json";
  save_checkpoint(f.ckpt, path);
  const Checkpoint loaded = load_checkpoint(path);
  std::filesystem::remove(path);
  o.require(predict_raw(loaded, f.raw) == predict_raw(f.ckpt, f.raw), "bit-identical predictions after reload");
  o.detail << a.history.size() << " epochs replayed bit-identically; reload predictions identical on " << f.raw.rows()
           << " rows";
  return o;
}

Outcome importance_contract() {
  Outcome o;
  const SmallFit& f = small_fit();
  const ImportanceScores s = importance_of(f.ckpt, f.raw);
  const double lo = *std::min_element(s.normalized.begin(), s.normalized.end());
  const double hi = *std::max_element(s.normalized.begin(), s.normalized.end());
  std::vector<std::size_t> twice;
  for (std::size_t r = 0; r < f.raw.rows(); ++r) twice.insert(twice.end(), {r, r});
  const double dup = oracle::max_abs_diff(importance_of(f.ckpt, f.raw.subset(twice)).normalized, s.normalized);
  const Dataset scaled = apply_scaler(f.raw, f.ckpt.scaler);
  const auto snaps = global_attention_snapshots(f.ckpt.params, f.ckpt.config, scaled.x);
  const double loop = oracle::max_abs_diff(s.raw, oracle::importance_raw(snaps));
  o.require(lo == 0.0 && hi == 1.0, "min 0 and max 1");
  o.require(dup <= 1e-12, "duplication invariance");
  o.require(loop <= 1e-12, "loop oracle");
  o.detail << "range [" << lo << ", " << hi << "], duplication gap " << dup << ", loop gap " << loop;
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> check;
  std::optional<double> budget_seconds;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness, 30.0},
      {2, "structural invariants", structural_invariants, 10.0},
      {3, "loop-oracle equivalence", loop_oracles, std::nullopt},
      {4, "metric oracles", metric_oracles, std::nullopt},
      {5, "baseline correctness", baseline_correctness, std::nullopt},
      {6, "capacity", capacity, 120.0},
      {7, "directional superiority over PLS", directional_superiority, 900.0},
      {8, "variational ablation direction", ablation_direction, std::nullopt},
      {9, "KL warmup schedule", warmup_schedule, std::nullopt},
      {10, "determinism and persistence", determinism_and_persistence, std::nullopt},
      {11, "importance contract", importance_contract, std::nullopt},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    bool pass = false;
    std::string detail;
    try {
      Outcome o = c.check();
      pass = o.pass;
      detail = o.detail.str();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.budget_seconds && seconds > *c.budget_seconds) {
      pass = false;
      detail += "; over time budget";
    }
    failures += pass ? 0 : 1;
    std::printf("%s [%d] %s: %s (%.1f s)\n", pass ? "PASS" : "FAIL", c.id, c.name, detail.c_str(), seconds);
    std::fflush(stdout);
  }
  return failures;
}
