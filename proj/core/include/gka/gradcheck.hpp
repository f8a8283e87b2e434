#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gka/model.hpp"

namespace gka {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t batch = 3;
  LossConfig loss{0.7, 1.0, 0.5};
  /// Zero the projection, transform, and decoder maps instead of randomizing them.
  bool zero_residual_init = false;
  double step = 1e-5;
  double tolerance = 1e-4;
};

/// Tiny fixed-topology instance: p = 6 in two groups, 2 kernels, latent 2.
struct GradcheckProblem {
  ModelConfig config;
  ModelParams params;
  Tensor x;
  std::vector<double> y;
};

GradcheckProblem make_gradcheck_problem(const GradcheckOptions& options);

struct ParameterCheck {
  std::string path;
  double relative_error = 0.0;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

struct GradcheckReport {
  std::vector<ParameterCheck> parameters;
  double max_relative_error = 0.0;
  std::string worst_parameter;
  bool all_finite = true;
  bool passed = false;
};

/// Compares the analytic gradient of the full train-mode composite loss
/// (with the dropout mask and latent noise frozen) against central
/// differences for every parameter tensor. Relative error per tensor is
/// ||g_a - g_n|| / max(||g_a||, ||g_n||, 1e-8).
GradcheckReport gradcheck(const GradcheckOptions& options);
GradcheckReport gradcheck(GradcheckProblem problem, const GradcheckOptions& options);

}  // namespace gka
