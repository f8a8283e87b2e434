#include "gka/head.hpp"

#include <algorithm>
#include <cmath>

#include "gka/error.hpp"

namespace gka {

void validate_components(std::size_t features, const std::array<std::size_t, 3>& c) {
  if (!(c[0] > c[1] && c[1] > c[2] && c[2] >= 1)) {
    throw ConfigError("component widths must satisfy c1 > c2 > c3 >= 1, got (" + std::to_string(c[0]) + ", " +
                      std::to_string(c[1]) + ", " + std::to_string(c[2]) + ")");
  }
  if (c[0] > features) {
    throw ConfigError("c1 = " + std::to_string(c[0]) + " exceeds feature count " + std::to_string(features));
  }
}

HeadParams HeadParams::init(std::size_t features, std::array<std::size_t, 3> components, Rng& rng,
                            std::size_t hidden) {
  validate_components(features, components);
  const std::size_t total = components[0] + components[1] + components[2];
  HeadParams p;
  for (std::size_t t = 0; t < 3; ++t) p.projections[t] = glorot_uniform(features, components[t], rng);
  p.mix = Mlp2::glorot(features, hidden > 0 ? hidden : std::max<std::size_t>(features, 8), 3, rng);
  p.readout = Mlp2::glorot(total, hidden > 0 ? hidden : std::max<std::size_t>(total, 8), 1, rng);
  return p;
}

std::array<std::size_t, 3> HeadParams::components() const {
  return {projections[0].dim(1), projections[1].dim(1), projections[2].dim(1)};
}

HeadOutput head_forward(Binder& bind, Var global, const HeadParams& params) {
  const Shape& shape = global.shape();
  if (shape.size() != 2 || shape[1] != params.features()) {
    throw ShapeError("head input " + to_string(shape) + " does not match feature count " +
                     std::to_string(params.features()));
  }
  Var alpha = softmax_rows(apply(bind, params.mix, global));
  std::array<Var, 3> tiers;
  for (std::size_t t = 0; t < 3; ++t) {
    Var scores = matmul(global, bind(params.projections[t]));
    tiers[t] = scale_rows(scores, slice_cols(alpha, t, t + 1));
  }
  Var weighted = concat_cols(tiers);
  Var prediction = apply(bind, params.readout, weighted);
  return HeadOutput{prediction, alpha, weighted};
}

ImportanceScores feature_importance(std::span<const AttentionSnapshot> traces) {
  std::size_t rows = 0;
  std::size_t width = 0;
  for (const AttentionSnapshot& t : traces) {
    if (t.kernels.rank() != 3 || t.weights.rank() != 2 || t.kernels.dim(0) != t.weights.dim(0) ||
        t.kernels.dim(1) != t.weights.dim(1)) {
      throw ShapeError("attention snapshot shapes " + to_string(t.kernels.shape()) + " and " +
                       to_string(t.weights.shape()) + " do not conform");
    }
    if (width == 0) width = t.kernels.dim(2);
    if (t.kernels.dim(2) != width) throw ShapeError("attention snapshots disagree on feature count");
    rows += t.kernels.dim(0);
  }
  if (rows == 0) throw DataError("feature importance needs at least one sample");

  ImportanceScores scores;
  scores.raw.assign(width, 0.0);
  std::vector<double> combined(width);
  for (const AttentionSnapshot& t : traces) {
    const std::size_t n = t.kernels.dim(0), k = t.kernels.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(combined.begin(), combined.end(), 0.0);
      for (std::size_t l = 0; l < k; ++l) {
        const double w = t.weights[i * k + l];
        for (std::size_t j = 0; j < width; ++j) combined[j] += w * t.kernels[(i * k + l) * width + j];
      }
      for (std::size_t j = 0; j < width; ++j) scores.raw[j] += std::abs(combined[j]);
    }
  }
  for (double& v : scores.raw) v /= static_cast<double>(rows);

  const auto [lo, hi] = std::minmax_element(scores.raw.begin(), scores.raw.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw NumericError("degenerate importance: all features scored equally");
  scores.normalized.resize(width);
  for (std::size_t j = 0; j < width; ++j) scores.normalized[j] = (scores.raw[j] - *lo) / range;
  return scores;
}

}  // namespace gka
