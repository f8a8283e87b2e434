#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "gka/data.hpp"
#include "gka/model.hpp"

namespace gka {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // eval-mode MSE on the validation rows
  double kl_weight = 0.0;
  double mse = 0.0;
  double huber = 0.0;
  double kl = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  ModelConfig config;  // resolved
  ModelParams params;  // best-validation parameters
  std::vector<EpochRecord> history;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the composite loss
/// with global gradient-norm clipping and early stopping on validation MSE.
///
/// `ds` is expected to be standardized. An empty group spec in `cfg` takes
/// the dataset's groups. A seeded `validation_fraction` of the rows is held
/// out; with no held-out rows the eval-mode training MSE drives stopping.
/// Throws DataError for an empty dataset and NumericError, with epoch and
/// batch context, when the loss becomes non-finite.
TrainResult train(const Dataset& ds, ModelConfig cfg, const EpochCallback& on_epoch = {});

/// Same as train() but starting from the given parameters.
TrainResult train_from(const Dataset& ds, ModelConfig cfg, ModelParams initial, const EpochCallback& on_epoch = {});

/// Adam moment estimates, one pair per parameter tensor in visit order.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& params, double learning_rate);

  void step(ModelParams& params, const std::vector<Tensor>& grads);

  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double epsilon = 1e-8;

 private:
  double learning_rate_;
  std::size_t steps_ = 0;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
};

/// Gradients of every parameter tensor in visit order; zeros for tensors the
/// graph never used.
std::vector<Tensor> collect_gradients(const ModelParams& params, const Binder& bind);

/// Rescales grads in place so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_gradients(std::vector<Tensor>& grads, double max_norm);

}  // namespace gka
