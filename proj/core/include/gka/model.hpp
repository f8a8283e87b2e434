#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gka/calibration.hpp"
#include "gka/head.hpp"
#include "gka/kernel_attention.hpp"
#include "gka/loss.hpp"

namespace gka {

/// Hyperparameters. Zero-valued `latent_dim`, `components`, and
/// `hidden_width` mean "derive from the feature count" (see resolved()).
struct ModelConfig {
  FeatureGroupSpec groups;
  std::size_t kernels = 4;
  std::size_t latent_dim = 0;
  std::array<std::size_t, 3> components{0, 0, 0};
  std::size_t hidden_width = 0;
  LossConfig loss;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  bool use_variational = true;

  /// Copy with automatic fields filled for `features` columns and an empty
  /// group spec replaced by a single group; validates the result.
  ModelConfig resolved(std::size_t features) const;
  /// Throws ConfigError on any invalid field.
  void validate(std::size_t features) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// max(2, min(16, ceil(p / 4))).
std::size_t default_latent_dim(std::size_t features);
/// (min(16, p), min(8, p - 1), min(4, p - 2)) forced strictly decreasing.
std::array<std::size_t, 3> default_components(std::size_t features);

struct ModelParams {
  std::vector<KernelAttentionParams> group_attention;
  CalibrationParams calibration;
  std::optional<VariationalParams> variational;
  KernelAttentionParams global_attention;
  HeadParams head;

  /// Each block draws from its own stream derived from cfg.seed, so the
  /// variational toggle leaves every other block's initial values intact.
  static ModelParams init(const ModelConfig& resolved_cfg, std::size_t features);

  std::size_t features() const { return global_attention.width(); }

  template <typename F>
  void visit(F&& f) {
    for (std::size_t g = 0; g < group_attention.size(); ++g) group_attention[g].visit("group" + std::to_string(g), f);
    calibration.visit("calibration", f);
    if (variational) variational->visit("variational", f);
    global_attention.visit("global", f);
    head.visit("head", f);
  }
  template <typename F>
  void visit(F&& f) const {
    for (std::size_t g = 0; g < group_attention.size(); ++g) group_attention[g].visit("group" + std::to_string(g), f);
    calibration.visit("calibration", f);
    if (variational) variational->visit("variational", f);
    global_attention.visit("global", f);
    head.visit("head", f);
  }

  std::size_t parameter_count() const;
};

/// Every intermediate of one forward pass, in pipeline order.
struct ForwardTrace {
  GroupedAttention groups;
  CalibrationOutput calibration;
  std::optional<VariationalOutput> variational;
  AttentionTrace global;
  HeadOutput head;

  Var prediction() const { return head.prediction; }
  std::optional<LatentMoments> latent() const;
};

/// Grouped attention -> self-calibration -> variational block (or V = S when
/// absent) -> global attention -> tiered head.
ForwardTrace model_forward(Binder& bind, Var x, const ModelParams& params, const ModelConfig& cfg, Mode mode,
                           NoiseSource* noise);

/// Eval-mode predictions on standardized inputs, processed in chunks.
std::vector<double> predict(const ModelParams& params, const ModelConfig& cfg, const Tensor& x);

/// Eval-mode global-tier kernels and weights for every row of x.
std::vector<AttentionSnapshot> global_attention_snapshots(const ModelParams& params, const ModelConfig& cfg,
                                                          const Tensor& x);

}  // namespace gka
