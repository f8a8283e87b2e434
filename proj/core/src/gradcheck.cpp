#include "gka/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gka/trainer.hpp"

namespace gka {

namespace {

void randomize(Tensor& t, Rng& rng, double limit) {
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
}

void zero_mlp(Mlp2& net) {
  net.hidden.weight.fill(0.0);
  net.hidden.bias.fill(0.0);
  net.output.weight.fill(0.0);
  net.output.bias.fill(0.0);
}

double loss_value(const GradcheckProblem& problem, const ModelParams& params, NoiseSource& noise) {
  Graph graph;
  Binder bind(graph);
  const ForwardTrace trace = model_forward(bind, graph.constant(problem.x), params, problem.config, Mode::train, &noise);
  const std::size_t total = problem.config.max_epochs;
  return composite_loss(trace.prediction(), problem.y, trace.latent(), total, total, problem.config.loss)
      .total.value()
      .item();
}

double norm(const Tensor& t) {
  double ss = 0.0;
  for (double v : t.data()) ss += v * v;
  return std::sqrt(ss);
}

}  // namespace

GradcheckProblem make_gradcheck_problem(const GradcheckOptions& options) {
  GradcheckProblem problem;
  ModelConfig cfg;
  cfg.groups = FeatureGroupSpec({{0, 3}, {3, 6}});
  cfg.kernels = 2;
  cfg.latent_dim = 2;
  cfg.loss = options.loss;
  cfg.seed = options.seed;
  cfg.max_epochs = 10;
  problem.config = cfg.resolved(6);
  problem.params = ModelParams::init(problem.config, 6);

  Rng rng = Rng::derive(options.seed, 901);
  ModelParams& p = problem.params;
  if (options.zero_residual_init) {
    for (auto& g : p.group_attention) g.projection = Affine::zeros(g.width(), g.width());
    p.global_attention.projection = Affine::zeros(6, 6);
    zero_mlp(p.calibration.transform);
    zero_mlp(p.variational->decoder);
  } else {
    // Nonzero projections so the kernel and weight maps are reachable.
    for (auto& g : p.group_attention) {
      randomize(g.projection.weight, rng, 0.5);
      randomize(g.projection.bias, rng, 0.1);
    }
    randomize(p.global_attention.projection.weight, rng, 0.5);
    randomize(p.global_attention.projection.bias, rng, 0.1);
  }
  problem.x = rng.normal_tensor(Shape{options.batch, 6});
  for (std::size_t i = 0; i < options.batch; ++i) problem.y.push_back(1.5 * rng.normal());
  return problem;
}

GradcheckReport gradcheck(const GradcheckOptions& options) {
  return gradcheck(make_gradcheck_problem(options), options);
}

GradcheckReport gradcheck(GradcheckProblem problem, const GradcheckOptions& options) {
  RngNoise source(splitmix64(options.seed ^ 0x9c4ec7ULL));
  FrozenNoise noise(source);

  std::vector<Tensor> analytic;
  {
    Graph graph;
    Binder bind(graph);
    const ForwardTrace trace =
        model_forward(bind, graph.constant(problem.x), problem.params, problem.config, Mode::train, &noise);
    const std::size_t total = problem.config.max_epochs;
    const LossParts loss = composite_loss(trace.prediction(), problem.y, trace.latent(), total, total, problem.config.loss);
    graph.backward(loss.total);
    analytic = collect_gradients(problem.params, bind);
  }

  std::vector<Tensor> numeric;
  ModelParams probe = problem.params;
  std::vector<Tensor*> slots;
  probe.visit([&](const std::string&, Tensor& t) {
    slots.push_back(&t);
    numeric.emplace_back(t.shape(), 0.0);
  });
  for (std::size_t k = 0; k < slots.size(); ++k) {
    Tensor& t = *slots[k];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + options.step;
      noise.freeze();
      const double up = loss_value(problem, probe, noise);
      t[i] = saved - options.step;
      noise.freeze();
      const double down = loss_value(problem, probe, noise);
      t[i] = saved;
      numeric[k][i] = (up - down) / (2.0 * options.step);
    }
  }

  GradcheckReport report;
  std::size_t k = 0;
  problem.params.visit([&](const std::string& path, const Tensor&) {
    ParameterCheck check;
    check.path = path;
    check.analytic_norm = norm(analytic[k]);
    check.numeric_norm = norm(numeric[k]);
    Tensor diff = analytic[k];
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= numeric[k][i];
    const double denom = std::max({check.analytic_norm, check.numeric_norm, 1e-8});
    check.relative_error = norm(diff) / denom;
    report.all_finite = report.all_finite && analytic[k].all_finite() && std::isfinite(check.relative_error);
    if (check.relative_error >= report.max_relative_error) {
      report.max_relative_error = check.relative_error;
      report.worst_parameter = path;
    }
    report.parameters.push_back(std::move(check));
    ++k;
  });
  report.passed = report.all_finite && report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace gka
