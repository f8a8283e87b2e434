#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gka/error.hpp"
#include "gka/head.hpp"
#include "gka/rng.hpp"
#include "oracles.hpp"

namespace gka {
namespace {

using oracle::random_matrix;

HeadParams random_head(std::size_t p, std::array<std::size_t, 3> c, std::uint64_t seed) {
  Rng rng(seed);
  return HeadParams::init(p, c, rng);
}

TEST(Head, ComponentValidation) {
  EXPECT_NO_THROW(validate_components(8, {4, 3, 2}));
  EXPECT_THROW(validate_components(8, {9, 3, 2}), ConfigError);
  EXPECT_THROW(validate_components(8, {4, 4, 2}), ConfigError);
  EXPECT_THROW(validate_components(8, {4, 3, 0}), ConfigError);
  Rng rng(0);
  EXPECT_THROW(HeadParams::init(3, {4, 2, 1}, rng), ConfigError);
}

TEST(Head, MatchesScalarLoopOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const HeadParams params = random_head(8, {4, 3, 2}, seed);
    const Tensor x = random_matrix(5, 8, 100 + seed);
    Graph g;
    Binder bind(g);
    const HeadOutput out = head_forward(bind, g.constant(x), params);
    ASSERT_EQ(out.prediction.shape(), (Shape{5, 1}));
    EXPECT_LT(oracle::max_abs_diff(out.prediction.value().data(), oracle::head(oracle::rows_of(x), params)), 1e-10);
  }
}

TEST(Head, TierWeightsAreProbabilityVectors) {
  const HeadParams params = random_head(6, {5, 3, 1}, 7);
  Graph g;
  Binder bind(g);
  const Tensor alpha = head_forward(bind, g.constant(random_matrix(20, 6, 8)), params).tier_weights.value();
  for (std::size_t i = 0; i < alpha.rows(); ++i) {
    EXPECT_NEAR(alpha(i, 0) + alpha(i, 1) + alpha(i, 2), 1.0, 1e-12);
    for (std::size_t t = 0; t < 3; ++t) EXPECT_GE(alpha(i, t), 0.0);
  }
}

TEST(Head, EqualLogitsGiveUniformThirds) {
  HeadParams params = random_head(6, {4, 2, 1}, 9);
  params.mix.output.weight.fill(0.0);
  params.mix.output.bias.fill(0.25);
  const Tensor x = random_matrix(3, 6, 10);
  Graph g;
  Binder bind(g);
  const HeadOutput out = head_forward(bind, g.constant(x), params);
  for (double a : out.tier_weights.value().data()) EXPECT_DOUBLE_EQ(a, 1.0 / 3.0);
  const auto rows = oracle::rows_of(x);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> concat;
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t c = 0; c < params.projections[t].cols(); ++c) {
        double acc = 0.0;
        for (std::size_t f = 0; f < 6; ++f) acc += rows[i][f] * params.projections[t](f, c);
        concat.push_back(acc / 3.0);
      }
    EXPECT_NEAR(out.prediction.value()[i], oracle::mlp_row(concat, params.readout)[0], 1e-12);
  }
}

TEST(Head, ZeroProjectionsGiveConstantPrediction) {
  HeadParams params = random_head(6, {4, 2, 1}, 11);
  for (Tensor& w : params.projections) w.fill(0.0);
  Graph g;
  Binder bind(g);
  const Tensor pred = head_forward(bind, g.constant(random_matrix(7, 6, 12)), params).prediction.value();
  const std::vector<double> zeros(7, 0.0);
  const double expected = oracle::mlp_row(zeros, params.readout)[0];
  for (double v : pred.data()) EXPECT_DOUBLE_EQ(v, expected);
}

TEST(Head, EveryParameterReceivesGradient) {
  const HeadParams params = random_head(6, {4, 2, 1}, 13);
  Graph g;
  Binder bind(g);
  const HeadOutput out = head_forward(bind, g.constant(random_matrix(8, 6, 14)), params);
  g.backward(sum(square(out.prediction)));
  params.visit("head", [&](const std::string& path, const Tensor& t) {
    double largest = 0.0;
    for (double v : g.grad(bind.find(t)).data()) largest = std::max(largest, std::abs(v));
    EXPECT_GT(largest, 0.0) << path;
  });
}

TEST(Head, RejectsWrongWidth) {
  const HeadParams params = random_head(6, {4, 2, 1}, 15);
  Graph g;
  Binder bind(g);
  EXPECT_THROW(head_forward(bind, g.constant(random_matrix(2, 5, 1)), params), ShapeError);
}

AttentionSnapshot random_snapshot(std::size_t n, std::size_t k, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  AttentionSnapshot s{Tensor(Shape{n, k, p}), Tensor(Shape{n, k})};
  for (std::size_t r = 0; r < n * k; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      s.kernels[r * p + j] = rng.normal();
      ss += s.kernels[r * p + j] * s.kernels[r * p + j];
    }
    for (std::size_t j = 0; j < p; ++j) s.kernels[r * p + j] /= std::sqrt(ss);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(k);
    for (double& l : logits) l = rng.normal();
    const auto w = oracle::softmax(logits);
    for (std::size_t l = 0; l < k; ++l) s.weights(i, l) = w[l];
  }
  return s;
}

TEST(Importance, SingleSampleEndpoints) {
  const std::vector<AttentionSnapshot> snaps{{Tensor(Shape{1, 1, 2}, {0.6, 0.8}), Tensor(Shape{1, 1}, {1.0})}};
  const ImportanceScores s = feature_importance(snaps);
  EXPECT_DOUBLE_EQ(s.raw[0], 0.6);
  EXPECT_DOUBLE_EQ(s.raw[1], 0.8);
  EXPECT_EQ(s.normalized, (std::vector<double>{0.0, 1.0}));
}

TEST(Importance, MatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<AttentionSnapshot> snaps{random_snapshot(3, 2, 5, seed)};
    const ImportanceScores s = feature_importance(snaps);
    EXPECT_LT(oracle::max_abs_diff(s.raw, oracle::importance_raw(snaps)), 1e-12);
  }
}

TEST(Importance, NormalizedRangeIsUnitInterval) {
  const std::vector<AttentionSnapshot> snaps{random_snapshot(40, 3, 6, 77)};
  const ImportanceScores s = feature_importance(snaps);
  EXPECT_EQ(*std::min_element(s.normalized.begin(), s.normalized.end()), 0.0);
  EXPECT_EQ(*std::max_element(s.normalized.begin(), s.normalized.end()), 1.0);
}

TEST(Importance, InvariantUnderDuplication) {
  const AttentionSnapshot base = random_snapshot(5, 2, 4, 78);
  const std::vector<AttentionSnapshot> once{base};
  const std::vector<AttentionSnapshot> twice{base, base};
  const ImportanceScores a = feature_importance(once), b = feature_importance(twice);
  EXPECT_LT(oracle::max_abs_diff(a.normalized, b.normalized), 1e-12);
}

TEST(Importance, DegenerateAndEmptyInputsAreErrors) {
  const std::vector<AttentionSnapshot> flat{{Tensor(Shape{1, 1, 2}, {std::sqrt(0.5), std::sqrt(0.5)}),
                                             Tensor(Shape{1, 1}, {1.0})}};
  EXPECT_THROW(feature_importance(flat), NumericError);
  EXPECT_THROW(feature_importance(std::span<const AttentionSnapshot>{}), DataError);
}

}  // namespace
}  // namespace gka
