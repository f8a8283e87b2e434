#pragma once

// Independent reference implementations for tests. Everything here is
// written with plain loops (or Eigen decompositions for the linear
// baselines) and never calls into the graph ops it is checking.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gka/calibration.hpp"
#include "gka/graph.hpp"
#include "gka/head.hpp"
#include "gka/kernel_attention.hpp"
#include "gka/model.hpp"

namespace gka::oracle {

using Matrix = std::vector<std::vector<double>>;

Matrix rows_of(const Tensor& t);
Tensor tensor_of(const Matrix& m);
double max_abs_diff(const Tensor& a, const Tensor& b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

/// x W + b for one row.
std::vector<double> affine_row(std::span<const double> x, const Affine& layer);
/// output(tanh(hidden(x))) for one row.
std::vector<double> mlp_row(std::span<const double> x, const Mlp2& net);
std::vector<double> softmax(std::span<const double> logits);

struct AttentionLoop {
  Matrix z;                          // (n, p)
  std::vector<Matrix> kernels;       // n x (k, p), normalized
  Matrix weights;                    // (n, k)
};
AttentionLoop attention(const Matrix& x, const KernelAttentionParams& params);

/// S per sample; `mask` empty means eval mode.
Matrix calibration(const Matrix& z, const CalibrationParams& params, const Matrix& mask = {});
/// V per sample; `eps` empty means eval mode.
Matrix variational(const Matrix& s, const VariationalParams& params, const Matrix& eps = {});
std::vector<double> head(const Matrix& g, const HeadParams& params);
/// Eval-mode end-to-end prediction.
std::vector<double> model(const Matrix& x, const ModelParams& params, const ModelConfig& cfg);

std::vector<double> importance_raw(std::span<const AttentionSnapshot> snapshots);

/// Predictions of PLS1 with `a` components computed as least squares on an
/// orthonormal basis (from an SVD) of the Krylov space span{s, Ss, ..., S^{a-1}s},
/// S = Z'Z, s = Z'y, on standardized Z and centered y.
std::vector<double> pls_krylov_predict(const Tensor& x_train, std::span<const double> y_train, std::size_t a,
                                       const Tensor& x_eval);
/// Ridge weights on standardized X by gradient descent to convergence.
std::vector<double> ridge_gradient_descent(const Tensor& x, std::span<const double> y, double lambda);
/// Ordinary least squares with intercept via Householder QR.
std::vector<double> ols_predict(const Tensor& x_train, std::span<const double> y_train, const Tensor& x_eval);

double concordance_brute_force(std::span<const double> y, std::span<const double> predicted);

/// Builds a scalar loss sum(R * f(inputs)) with a fixed random R and
/// compares every input gradient with central differences. Returns the
/// largest per-input relative error ||g_a - g_n|| / max(||g_a||, ||g_n||, 1e-12).
using OpBuilder = std::function<Var(Graph&, std::span<const Var>)>;
double op_gradient_error(const OpBuilder& op, const std::vector<Tensor>& inputs, std::uint64_t seed = 0,
                         double h = 1e-5);

/// Replaces every parameter tensor with uniform(-limit, limit) draws.
void randomize(ModelParams& params, std::uint64_t seed, double limit = 0.5);
void randomize(KernelAttentionParams& params, std::uint64_t seed, double limit = 0.5);
void randomize(HeadParams& params, std::uint64_t seed, double limit = 0.5);

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace gka::oracle
