#include "gka/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "gka/data.hpp"
#include "gka/error.hpp"

namespace gka {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Standardized {
  MatrixXd z;
  VectorXd y;
  std::vector<double> mean;
  std::vector<double> scale;
  double y_mean = 0.0;
};

Standardized standardize_design(const Tensor& x, std::span<const double> y) {
  const std::size_t n = x.rows(), p = x.cols();
  if (y.size() != n) {
    throw DataError("design has " + std::to_string(n) + " rows, target has " + std::to_string(y.size()));
  }
  if (n < 2) throw DataError("need at least two rows");
  Standardized s;
  s.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  s.y.resize(static_cast<Eigen::Index>(n));
  s.mean.assign(p, 0.0);
  s.scale.assign(p, 1.0);
  bool any_variation = false;
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x(i, j);
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - m) * (x(i, j) - m);
    const double sd = std::sqrt(var / static_cast<double>(n));
    s.mean[j] = m;
    if (sd > 0.0) {
      s.scale[j] = sd;
      any_variation = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      s.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (x(i, j) - m) / s.scale[j];
    }
  }
  if (!any_variation) throw DataError("every feature column is constant");
  for (double v : y) s.y_mean += v;
  s.y_mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) s.y(static_cast<Eigen::Index>(i)) = y[i] - s.y_mean;
  return s;
}

MatrixXd standardized_input(const Tensor& x, const std::vector<double>& mean, const std::vector<double>& scale) {
  if (x.cols() != mean.size()) {
    throw DataError("model fitted on " + std::to_string(mean.size()) + " features, input has " +
                    std::to_string(x.cols()));
  }
  MatrixXd z(static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(x.cols()));
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (x(i, j) - mean[j]) / scale[j];
  return z;
}

Tensor to_tensor(const MatrixXd& m) {
  Tensor t(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
  return t;
}

std::vector<double> predict_linear(const MatrixXd& z, const std::vector<double>& w, double offset) {
  const VectorXd coef = Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  const VectorXd pred = (z * coef).array() + offset;
  return {pred.data(), pred.data() + pred.size()};
}

}  // namespace

std::size_t max_pls_components(std::size_t rows, std::size_t features) {
  return rows == 0 ? 0 : std::min(rows - 1, features);
}

PlsModel pls_fit(const Tensor& x, std::span<const double> y, std::size_t n_components) {
  const std::size_t bound = max_pls_components(x.rows(), x.cols());
  if (n_components < 1 || n_components > bound) {
    throw ConfigError("PLS component count " + std::to_string(n_components) + " outside [1, " +
                      std::to_string(bound) + "]");
  }
  Standardized s = standardize_design(x, y);
  const Eigen::Index n = s.z.rows(), p = s.z.cols(), a_max = static_cast<Eigen::Index>(n_components);
  MatrixXd xr = s.z;
  VectorXd yr = s.y;
  MatrixXd w_mat(p, a_max), p_mat(p, a_max), t_mat(n, a_max);
  VectorXd q(a_max);

  for (Eigen::Index a = 0; a < a_max; ++a) {
    VectorXd u = yr;
    VectorXd t = VectorXd::Zero(n);
    VectorXd w;
    double qa = 0.0;
    bool converged = false;
    for (std::size_t iter = 0; iter < kNipalsMaxIterations; ++iter) {
      w = xr.transpose() * u;
      const double wn = w.norm();
      if (!(wn > 0.0)) throw NumericError("PLS component " + std::to_string(a + 1) + ": X is fully deflated");
      w /= wn;
      VectorXd t_new = xr * w;
      const double tt = t_new.squaredNorm();
      if (!(tt > 0.0)) throw NumericError("PLS component " + std::to_string(a + 1) + ": zero score vector");
      qa = yr.dot(t_new) / tt;
      const double change = std::min((t_new - t).norm(), (t_new + t).norm()) / std::sqrt(tt);
      t = std::move(t_new);
      if (change < kNipalsTolerance) {
        converged = true;
        break;
      }
      if (qa == 0.0) throw NumericError("PLS component " + std::to_string(a + 1) + ": zero y loading");
      u = qa > 0.0 ? yr : VectorXd(-yr);
    }
    if (!converged) {
      throw NumericError("PLS component " + std::to_string(a + 1) + " did not converge in " +
                         std::to_string(kNipalsMaxIterations) + " iterations");
    }
    const double tt = t.squaredNorm();
    VectorXd load = xr.transpose() * t / tt;
    xr -= t * load.transpose();
    yr -= qa * t;
    w_mat.col(a) = w;
    p_mat.col(a) = load;
    t_mat.col(a) = t;
    q(a) = qa;
  }

  const MatrixXd ptw = p_mat.transpose() * w_mat;
  const VectorXd b = w_mat * ptw.partialPivLu().solve(q);

  PlsModel m;
  m.n_components = n_components;
  m.x_weights = to_tensor(w_mat);
  m.x_loadings = to_tensor(p_mat);
  m.scores = to_tensor(t_mat);
  m.y_loadings.assign(q.data(), q.data() + q.size());
  m.coefficients.assign(b.data(), b.data() + b.size());
  m.x_mean = std::move(s.mean);
  m.x_scale = std::move(s.scale);
  m.y_mean = s.y_mean;
  return m;
}

std::vector<double> pls_predict(const PlsModel& model, const Tensor& x) {
  return predict_linear(standardized_input(x, model.x_mean, model.x_scale), model.coefficients, model.y_mean);
}

PlsSelection select_pls_components_cv(const Tensor& x, std::span<const double> y, std::size_t max_components,
                                      std::size_t folds, std::uint64_t seed) {
  const std::size_t n = x.rows();
  const auto order = shuffled_indices(n, seed);
  const auto fold_rows = make_folds(order, folds);
  std::size_t limit = std::min(max_components, x.cols());
  for (const auto& held : fold_rows) limit = std::min(limit, max_pls_components(n - held.size(), x.cols()));
  if (limit == 0) throw ConfigError("too few rows for PLS cross-validation");

  PlsSelection sel;
  sel.scores.assign(limit, 0.0);
  for (const auto& held : fold_rows) {
    std::vector<bool> is_held(n, false);
    for (std::size_t r : held) is_held[r] = true;
    std::vector<std::size_t> fit_rows;
    for (std::size_t r = 0; r < n; ++r)
      if (!is_held[r]) fit_rows.push_back(r);
    const Tensor x_fit = x.gather_rows(fit_rows);
    const Tensor x_held = x.gather_rows(held);
    std::vector<double> y_fit;
    for (std::size_t r : fit_rows) y_fit.push_back(y[r]);
    for (std::size_t a = 1; a <= limit; ++a) {
      const auto pred = pls_predict(pls_fit(x_fit, y_fit, a), x_held);
      for (std::size_t i = 0; i < held.size(); ++i) {
        const double r = y[held[i]] - pred[i];
        sel.scores[a - 1] += r * r / static_cast<double>(n);
      }
    }
  }
  sel.n_components = static_cast<std::size_t>(std::min_element(sel.scores.begin(), sel.scores.end()) - sel.scores.begin()) + 1;
  return sel;
}

PlsSelection select_pls_components_variance(const Tensor& x, std::span<const double> y, std::size_t max_components,
                                            double threshold) {
  const std::size_t limit = std::min(max_components, max_pls_components(x.rows(), x.cols()));
  if (limit == 0) throw ConfigError("too few rows for PLS");
  const PlsModel full = pls_fit(x, y, limit);
  const Standardized s = standardize_design(x, y);
  const double total = s.z.squaredNorm();
  PlsSelection sel;
  double cumulative = 0.0;
  for (std::size_t a = 0; a < limit; ++a) {
    double tt = 0.0, pp = 0.0;
    for (std::size_t i = 0; i < full.scores.rows(); ++i) tt += full.scores(i, a) * full.scores(i, a);
    for (std::size_t j = 0; j < full.x_loadings.rows(); ++j) pp += full.x_loadings(j, a) * full.x_loadings(j, a);
    cumulative += tt * pp / total;
    sel.scores.push_back(cumulative);
    if (sel.n_components == 0 && cumulative >= threshold) sel.n_components = a + 1;
  }
  if (sel.n_components == 0) sel.n_components = limit;
  return sel;
}

RidgeModel ridge_fit(const Tensor& x, std::span<const double> y, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge lambda must be finite and >= 0");
  Standardized s = standardize_design(x, y);
  const Eigen::Index p = s.z.cols();
  MatrixXd gram = s.z.transpose() * s.z;
  gram.diagonal().array() += lambda;
  const VectorXd rhs = s.z.transpose() * s.y;
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
    throw NumericError("ridge system is singular (rank-deficient X); use lambda > 0");
  }
  const VectorXd w = llt.solve(rhs);
  RidgeModel m;
  m.weights.assign(w.data(), w.data() + p);
  m.x_mean = std::move(s.mean);
  m.x_scale = std::move(s.scale);
  m.y_mean = s.y_mean;
  m.lambda = lambda;
  return m;
}

std::vector<double> ridge_predict(const RidgeModel& model, const Tensor& x) {
  return predict_linear(standardized_input(x, model.x_mean, model.x_scale), model.weights, model.y_mean);
}

}  // namespace gka
