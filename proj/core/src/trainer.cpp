#include "gka/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gka/error.hpp"

namespace gka {

AdamOptimizer::AdamOptimizer(const ModelParams& params, double learning_rate) : learning_rate_(learning_rate) {
  params.visit([&](const std::string&, const Tensor& t) {
    first_.emplace_back(t.shape(), 0.0);
    second_.emplace_back(t.shape(), 0.0);
  });
}

void AdamOptimizer::step(ModelParams& params, const std::vector<Tensor>& grads) {
  if (grads.size() != first_.size()) throw Error("gradient count does not match optimizer state");
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
  std::size_t idx = 0;
  params.visit([&](const std::string&, Tensor& t) {
    Tensor& m = first_[idx];
    Tensor& v = second_[idx];
    const Tensor& g = grads[idx];
    for (std::size_t i = 0; i < t.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      t[i] -= learning_rate_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon);
    }
    ++idx;
  });
}

std::vector<Tensor> collect_gradients(const ModelParams& params, const Binder& bind) {
  std::vector<Tensor> grads;
  params.visit([&](const std::string&, const Tensor& t) {
    const Var v = bind.find(t);
    grads.push_back(v.valid() ? bind.graph().grad(v) : Tensor(t.shape(), 0.0));
  });
  return grads;
}

double clip_gradients(std::vector<Tensor>& grads, double max_norm) {
  double ss = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) ss += v * v;
  const double norm = std::sqrt(ss);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (Tensor& g : grads)
      for (double& v : g.data()) v *= f;
  }
  return norm;
}

namespace {

double eval_mse(const ModelParams& params, const ModelConfig& cfg, const Dataset& ds) {
  const auto pred = predict(params, cfg, ds.x);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - ds.y[i]) * (pred[i] - ds.y[i]);
  return ss / static_cast<double>(pred.size());
}

}  // namespace

TrainResult train(const Dataset& ds, ModelConfig cfg, const EpochCallback& on_epoch) {
  if (ds.rows() == 0) throw DataError("empty training set");
  if (cfg.groups.empty()) cfg.groups = ds.groups;
  cfg = cfg.resolved(ds.features());
  ModelParams initial = ModelParams::init(cfg, ds.features());
  return train_from(ds, cfg, std::move(initial), on_epoch);
}

TrainResult train_from(const Dataset& ds, ModelConfig cfg, ModelParams initial, const EpochCallback& on_epoch) {
  if (ds.rows() == 0) throw DataError("empty training set");
  if (cfg.groups.empty()) cfg.groups = ds.groups;
  cfg = cfg.resolved(ds.features());
  if (initial.features() != ds.features()) throw ConfigError("initial parameters do not match the feature count");

  const std::size_t n = ds.rows();
  std::size_t n_val = 0;
  if (cfg.validation_fraction > 0.0 && n >= 2) {
    n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.validation_fraction));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  }
  const auto order = shuffled_indices(n, splitmix64(cfg.seed ^ 0x7a11da7eULL));
  const std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(train_rows.begin(), train_rows.end());
  const Dataset train_set = ds.subset(train_rows);
  const Dataset val_set = n_val > 0 ? ds.subset(val_rows) : train_set;

  TrainResult result;
  result.config = cfg;
  result.params = initial;
  result.best_val_loss = std::numeric_limits<double>::infinity();

  ModelParams params = std::move(initial);
  AdamOptimizer optimizer(params, cfg.learning_rate);
  Rng shuffle_rng = Rng::derive(cfg.seed, 301);
  RngNoise noise(splitmix64(cfg.seed ^ 302));

  std::vector<std::size_t> batch_order(train_set.rows());
  for (std::size_t i = 0; i < batch_order.size(); ++i) batch_order[i] = i;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = batch_order.size(); i > 1; --i) std::swap(batch_order[i - 1], batch_order[shuffle_rng.below(i)]);

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < batch_order.size(); begin += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(batch_order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> rows(batch_order.data() + begin, end - begin);
      std::vector<double> target;
      target.reserve(rows.size());
      for (std::size_t r : rows) target.push_back(train_set.y[r]);

      Graph graph;
      Binder bind(graph);
      LossParts loss;
      try {
        const ForwardTrace trace =
            model_forward(bind, graph.constant(train_set.x.gather_rows(rows)), params, cfg, Mode::train, &noise);
        loss = composite_loss(trace.prediction(), target, trace.latent(), epoch, cfg.max_epochs, cfg.loss);
        if (!std::isfinite(loss.total.value().item())) throw NumericError("non-finite loss");
        graph.backward(loss.total);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + ": " + e.what());
      }
      std::vector<Tensor> grads = collect_gradients(params, bind);
      clip_gradients(grads, cfg.grad_clip_norm);
      optimizer.step(params, grads);

      const double w = static_cast<double>(rows.size()) / static_cast<double>(batch_order.size());
      rec.train_loss += w * loss.total.value().item();
      rec.mse += w * loss.mse;
      rec.huber += w * loss.huber;
      rec.kl += w * loss.kl;
      rec.kl_weight = loss.kl_weight;
    }
    rec.val_loss = eval_mse(params, cfg, val_set);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace gka
