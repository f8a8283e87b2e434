#include <benchmark/benchmark.h>

#include "gka/baselines.hpp"
#include "gka/data.hpp"
#include "gka/graph.hpp"
#include "gka/loss.hpp"
#include "gka/metrics.hpp"
#include "gka/rng.hpp"
#include "gka/trainer.hpp"

namespace {

gka::FeatureGroupSpec two_groups(std::size_t p) { return gka::FeatureGroupSpec({{0, p / 2}, {p / 2, p}}); }

gka::Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  gka::Rng rng(seed);
  gka::Tensor t(gka::Shape{r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

// One optimizer step: train-mode forward, composite loss, backward, clip, Adam.
void BM_TrainStep(benchmark::State& state) {
  const std::size_t p = static_cast<std::size_t>(state.range(0));
  const std::size_t batch = static_cast<std::size_t>(state.range(1));
  gka::ModelConfig cfg;
  cfg.groups = two_groups(p);
  cfg = cfg.resolved(p);
  gka::ModelParams params = gka::ModelParams::init(cfg, p);
  gka::AdamOptimizer adam(params, cfg.learning_rate);
  gka::RngNoise noise(1);
  const gka::Tensor x = random_matrix(batch, p, 2);
  const std::vector<double> y(x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(batch));
  for (auto _ : state) {
    gka::Graph graph;
    gka::Binder bind(graph);
    const gka::ForwardTrace trace = gka::model_forward(bind, graph.constant(x), params, cfg, gka::Mode::train, &noise);
    const gka::LossParts loss = gka::composite_loss(trace.prediction(), y, trace.latent(), 1, 10, cfg.loss);
    graph.backward(loss.total);
    std::vector<gka::Tensor> grads = gka::collect_gradients(params, bind);
    gka::clip_gradients(grads, cfg.grad_clip_norm);
    adam.step(params, grads);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Args({10, 32})->Args({40, 32})->Args({100, 32})->Unit(benchmark::kMicrosecond);

void BM_Predict(benchmark::State& state) {
  const std::size_t p = static_cast<std::size_t>(state.range(0));
  gka::ModelConfig cfg;
  cfg.groups = two_groups(p);
  cfg = cfg.resolved(p);
  const gka::ModelParams params = gka::ModelParams::init(cfg, p);
  const gka::Tensor x = random_matrix(1000, p, 3);
  for (auto _ : state) benchmark::DoNotOptimize(gka::predict(params, cfg, x));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Predict)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_Epoch(benchmark::State& state) {
  const gka::Dataset ds = gka::standardize(gka::synth_nonlinear(800, two_groups(10), 0.1, 4));
  gka::ModelConfig cfg;
  cfg.groups = two_groups(10);
  cfg.max_epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(gka::train(ds, cfg));
}
BENCHMARK(BM_Epoch)->Unit(benchmark::kMillisecond);

void BM_PlsFit(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::size_t p = static_cast<std::size_t>(state.range(1));
  const gka::Dataset ds = gka::synth_nonlinear(n, two_groups(p), 0.1, 5);
  for (auto _ : state) benchmark::DoNotOptimize(gka::pls_fit(ds.x, ds.y, std::min<std::size_t>(10, p)));
}
BENCHMARK(BM_PlsFit)->Args({1000, 10})->Args({1000, 100})->Args({200, 700})->Unit(benchmark::kMillisecond);

void BM_PlsCvSelection(benchmark::State& state) {
  const gka::Dataset ds = gka::synth_nonlinear(800, two_groups(10), 0.1, 6);
  for (auto _ : state) benchmark::DoNotOptimize(gka::select_pls_components_cv(ds.x, ds.y, 10, 10, 1));
}
BENCHMARK(BM_PlsCvSelection)->Unit(benchmark::kMillisecond);

void BM_ConcordanceIndex(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  gka::Rng rng(7);
  std::vector<double> y(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.normal();
    p[i] = y[i] + rng.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(gka::concordance_index(y, p));
}
BENCHMARK(BM_ConcordanceIndex)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
