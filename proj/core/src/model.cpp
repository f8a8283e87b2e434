#include "gka/model.hpp"

#include <algorithm>
#include <cmath>

#include "gka/error.hpp"

namespace gka {

namespace {

constexpr std::size_t kPredictChunk = 256;

enum Stream : std::uint64_t { kGroupStream = 10, kCalibrationStream = 20, kVariationalStream = 30,
                              kGlobalStream = 40, kHeadStream = 50 };

}  // namespace

std::size_t default_latent_dim(std::size_t features) {
  const std::size_t quarter = (features + 3) / 4;
  return std::max<std::size_t>(2, std::min<std::size_t>(16, quarter));
}

std::array<std::size_t, 3> default_components(std::size_t features) {
  if (features < 3) throw ConfigError("the tiered head needs at least 3 features, got " + std::to_string(features));
  std::array<std::size_t, 3> c{std::min<std::size_t>(16, features), std::min<std::size_t>(8, features - 1),
                               std::min<std::size_t>(4, features - 2)};
  c[1] = std::min(c[1], c[0] - 1);
  c[2] = std::min(c[2], c[1] - 1);
  return c;
}

ModelConfig ModelConfig::resolved(std::size_t features) const {
  ModelConfig out = *this;
  if (out.groups.empty()) out.groups = FeatureGroupSpec::single(features);
  if (out.latent_dim == 0) out.latent_dim = default_latent_dim(features);
  if (out.components == std::array<std::size_t, 3>{0, 0, 0}) out.components = default_components(features);
  out.validate(features);
  return out;
}

void ModelConfig::validate(std::size_t features) const {
  groups.require_covers(features);
  if (kernels == 0) throw ConfigError("kernels must be >= 1");
  if (latent_dim == 0) throw ConfigError("latent_dim must be >= 1");
  validate_components(features, components);
  loss.validate();
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
  if (patience == 0) throw ConfigError("patience must be >= 1");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("grad_clip_norm must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::size_t features) {
  cfg.validate(features);
  ModelParams p;
  Rng group_rng = Rng::derive(cfg.seed, kGroupStream);
  for (const GroupRange& g : cfg.groups) {
    p.group_attention.push_back(KernelAttentionParams::init(g.width(), cfg.kernels, group_rng, cfg.hidden_width));
  }
  Rng calibration_rng = Rng::derive(cfg.seed, kCalibrationStream);
  p.calibration = CalibrationParams::init(features, calibration_rng, cfg.hidden_width);
  if (cfg.use_variational) {
    Rng variational_rng = Rng::derive(cfg.seed, kVariationalStream);
    p.variational = VariationalParams::init(features, cfg.latent_dim, variational_rng, cfg.hidden_width);
  }
  Rng global_rng = Rng::derive(cfg.seed, kGlobalStream);
  p.global_attention = KernelAttentionParams::init(features, cfg.kernels, global_rng, cfg.hidden_width);
  Rng head_rng = Rng::derive(cfg.seed, kHeadStream);
  p.head = HeadParams::init(features, cfg.components, head_rng, cfg.hidden_width);
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  visit([&](const std::string&, const Tensor& t) { total += t.size(); });
  return total;
}

std::optional<LatentMoments> ForwardTrace::latent() const {
  if (!variational) return std::nullopt;
  return LatentMoments{variational->mean, variational->log_var};
}

ForwardTrace model_forward(Binder& bind, Var x, const ModelParams& params, const ModelConfig& cfg, Mode mode,
                           NoiseSource* noise) {
  const std::size_t p = params.features();
  if (x.shape().size() != 2 || x.shape()[1] != p) {
    throw ShapeError("model expects " + std::to_string(p) + " features, input has shape " + to_string(x.shape()));
  }
  ForwardTrace trace;
  trace.groups = grouped_attention_forward(bind, x, cfg.groups, params.group_attention);
  trace.calibration = self_calibrate(bind, trace.groups.output, params.calibration, mode, noise);
  Var v = trace.calibration.output;
  if (params.variational) {
    trace.variational = variational_encode_decode(bind, v, *params.variational, mode, noise);
    v = trace.variational->output;
  }
  trace.global = kernel_attention_forward(bind, v, params.global_attention);
  trace.head = head_forward(bind, trace.global.output, params.head);
  return trace;
}

std::vector<double> predict(const ModelParams& params, const ModelConfig& cfg, const Tensor& x) {
  std::vector<double> out;
  out.reserve(x.rows());
  for (std::size_t begin = 0; begin < x.rows(); begin += kPredictChunk) {
    const std::size_t end = std::min(x.rows(), begin + kPredictChunk);
    Graph graph;
    Binder bind(graph);
    const ForwardTrace trace =
        model_forward(bind, graph.constant(x.row_range(begin, end)), params, cfg, Mode::eval, nullptr);
    const Tensor& pred = trace.prediction().value();
    out.insert(out.end(), pred.data().begin(), pred.data().end());
  }
  return out;
}

std::vector<AttentionSnapshot> global_attention_snapshots(const ModelParams& params, const ModelConfig& cfg,
                                                          const Tensor& x) {
  std::vector<AttentionSnapshot> out;
  for (std::size_t begin = 0; begin < x.rows(); begin += kPredictChunk) {
    const std::size_t end = std::min(x.rows(), begin + kPredictChunk);
    Graph graph;
    Binder bind(graph);
    const ForwardTrace trace =
        model_forward(bind, graph.constant(x.row_range(begin, end)), params, cfg, Mode::eval, nullptr);
    out.push_back(AttentionSnapshot::of(trace.global));
  }
  return out;
}

}  // namespace gka
