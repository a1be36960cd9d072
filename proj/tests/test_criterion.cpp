#include <gtest/gtest.h>

#include <cmath>

#include "chcf/criterion.hpp"
#include "chcf/error.hpp"
#include "chcf/simd.hpp"
#include "support.hpp"

using namespace chcf;
using namespace chcf::testing_support;

namespace {

// One user, explicit scores, one behavior.
struct Tiny {
  BehaviorDataset train;
  ScoreBatch batch;
  CriterionParams cp;
};

Tiny tiny(std::vector<double> scores, std::vector<Index> positives, double h = 1.0,
          double g = 1.0, double alpha = 0.5) {
  Tiny t;
  const std::size_t n = scores.size();
  t.train.num_users = 1;
  t.train.num_items = n;
  t.train.num_behaviors = 1;
  t.train.positives = {{positives}};
  t.batch.users = {0};
  t.batch.scores.emplace_back(1, n);
  for (std::size_t v = 0; v < n; ++v) t.batch.scores[0](0, v) = scores[v];
  t.cp.alpha = alpha;
  t.cp.user_bounds = Matrix(1, 1, h);
  t.cp.item_bounds = Matrix(n, 1, g);
  return t;
}

LossConfig single(DecoratedFn g, double w) {
  LossConfig cfg;
  cfg.g = g;
  cfg.w = w;
  cfg.lambdas = {1.0};
  return cfg;
}

ScoreBatch explicit_batch(const Matrix& scores, std::vector<Index> users) {
  ScoreBatch b;
  b.users = std::move(users);
  b.scores = {scores};
  return b;
}

}  // namespace

TEST(Decorated, Values) {
  EXPECT_EQ(g_eval(DecoratedFn::Square, 3.0), 9.0);
  EXPECT_EQ(g_grad(DecoratedFn::Square, 3.0), 6.0);
  for (DecoratedFn g : {DecoratedFn::Linear, DecoratedFn::Square, DecoratedFn::ExpM1}) {
    EXPECT_EQ(g_eval(g, 0.0), 0.0);
    EXPECT_EQ(parse_decorated(to_string(g)), g);
  }
  EXPECT_EQ(g_grad(DecoratedFn::Square, 0.0), 0.0);
  EXPECT_EQ(g_grad(DecoratedFn::Linear, 0.0), 1.0);
  EXPECT_EQ(g_grad(DecoratedFn::ExpM1, 0.0), 1.0);
  EXPECT_NEAR(g_eval(DecoratedFn::ExpM1, 1.0), std::exp(1.0) - 1.0, 1e-15);
  EXPECT_TRUE(std::isfinite(g_eval(DecoratedFn::ExpM1, 1e6)));
  EXPECT_EQ(g_eval(DecoratedFn::ExpM1, 1e6), g_eval(DecoratedFn::ExpM1, 700.0));
  EXPECT_THROW(parse_decorated("cubic"), ConfigError);
}

TEST(Decorated, LowOrderConstant) {
  EXPECT_EQ(low_order_constant(DecoratedFn::Linear), 2.0);
  EXPECT_EQ(low_order_constant(DecoratedFn::Square), 4.0);
  EXPECT_FALSE(low_order_constant(DecoratedFn::ExpM1).has_value());
  for (double x : {1e-6, 0.1, 1.0, 7.5, 1e3}) {
    EXPECT_LE(g_eval(DecoratedFn::Linear, 2 * x), 2.0 * g_eval(DecoratedFn::Linear, x));
    EXPECT_LE(g_eval(DecoratedFn::Square, 2 * x), 4.0 * g_eval(DecoratedFn::Square, x));
  }
  // exp(2x) - 1 = (e^x + 1)(e^x - 1): the ratio grows without bound.
  EXPECT_GT(g_eval(DecoratedFn::ExpM1, 40.0) / g_eval(DecoratedFn::ExpM1, 20.0), 1e8);
}

TEST(Bounds, Examples) {
  CriterionParams cp;
  cp.alpha = 0.5;
  cp.user_bounds = Matrix(1, 1, 1.0);
  cp.item_bounds = Matrix(2, 1, 1.0);
  cp.item_bounds(1, 0) = 0.3;
  Bounds b = bounds(cp, 0, 0, 0);
  EXPECT_EQ(b.upper, 1.0);
  EXPECT_EQ(b.lower, 0.5);
  cp.user_bounds(0, 0) = 2.0;
  b = bounds(cp, 0, 1, 0);
  EXPECT_EQ(b.upper, 0.6);
  EXPECT_EQ(b.lower, 0.3);
  cp.alpha = 1.0;
  b = bounds(cp, 0, 1, 0);
  EXPECT_EQ(b.upper, b.lower);
  EXPECT_THROW(bounds(cp, 1, 0, 0), DataError);
}

TEST(Bounds, InitAndClamp) {
  Rng rng(1);
  CriterionParams cp = init_criterion(20, 30, 3, 0.5, rng);
  for (double x : cp.user_bounds.flat()) {
    EXPECT_GE(x, 0.99);
    EXPECT_LE(x, 1.01);
  }
  cp.item_bounds(4, 2) = -3.0;
  cp.user_bounds(0, 0) = 0.0;
  clamp_bounds(cp);
  EXPECT_EQ(cp.item_bounds(4, 2), kBoundFloor);
  EXPECT_EQ(cp.user_bounds(0, 0), kBoundFloor);
}

TEST(RegressionLoss, Examples) {
  Tiny fit = tiny({1.0, 0.0, 0.0}, {0});
  EXPECT_EQ(regression_loss(fit.batch, fit.train, 0, 0.1), 0.0);
  Tiny unit = tiny({0.0}, {0});
  EXPECT_EQ(regression_loss(unit.batch, unit.train, 0, 0.1), 1.0);
  Tiny half = tiny({0.5, 0.5}, {0});
  EXPECT_NEAR(regression_loss(half.batch, half.train, 0, 0.1), 0.275, 1e-15);
}

TEST(BehaviorLoss, SinglePositiveSquare) {
  // S = H * G = 1 * 1, R = 0.4
  Tiny t = tiny({0.4}, {0}, 1.0, 1.0);
  const LossResult r = chcf_behavior_loss(t.batch, t.train, 0, t.cp, single(DecoratedFn::Square, 0.1));
  EXPECT_NEAR(r.loss, 0.36, 1e-15);
  EXPECT_NEAR(r.d_scores[0](0, 0), -1.2, 1e-15);
  EXPECT_NEAR(r.grads.user_bounds(0, 0), 1.2 * t.cp.item_bounds(0, 0), 1e-15);

  // Same S with H = 2, G = 0.5: dL/dH = 1.2 * G.
  Tiny t2 = tiny({0.4}, {0}, 2.0, 0.5);
  const LossResult r2 =
      chcf_behavior_loss(t2.batch, t2.train, 0, t2.cp, single(DecoratedFn::Square, 0.1));
  EXPECT_NEAR(r2.loss, 0.36, 1e-15);
  EXPECT_NEAR(r2.grads.user_bounds(0, 0), 1.2 * 0.5, 1e-15);
  EXPECT_NEAR(r2.grads.item_bounds(0, 0), 1.2 * 2.0, 1e-15);
}

TEST(BehaviorLoss, SingleNegativeSquare) {
  // T = 0.5 * 1 * 1, R = 0.9
  Tiny t = tiny({0.9}, {});
  const LossResult r = chcf_behavior_loss(t.batch, t.train, 0, t.cp, single(DecoratedFn::Square, 0.1));
  EXPECT_NEAR(r.loss, 0.016, 1e-15);
  EXPECT_NEAR(r.d_scores[0](0, 0), 0.1 * 0.8, 1e-15);
  EXPECT_NEAR(r.grads.user_bounds(0, 0), -0.1 * 0.8 * 0.5, 1e-15);
}

TEST(BehaviorLoss, HingeZeroIsExact) {
  // Positives at or above S, negatives at or below T, including ties.
  Tiny t = tiny({1.0, 0.5, 1.7, 0.1, -2.0, 0.5}, {0, 2}, 1.0, 1.0, 0.5);
  for (DecoratedFn g : {DecoratedFn::Linear, DecoratedFn::Square, DecoratedFn::ExpM1}) {
    const LossResult r = chcf_behavior_loss(t.batch, t.train, 0, t.cp, single(g, 0.1));
    EXPECT_EQ(r.loss, 0.0);
    for (double x : r.d_scores[0].flat()) EXPECT_EQ(x, 0.0);
    for (double x : r.grads.user_bounds.flat()) EXPECT_EQ(x, 0.0);
    for (double x : r.grads.item_bounds.flat()) EXPECT_EQ(x, 0.0);
  }
}

TEST(TotalLoss, LambdaWeightedSumOfBehaviors) {
  Rng rng(2);
  const BehaviorDataset train = random_dataset(rng, 6, 10, 3, 0.3);
  const CriterionParams cp = random_criterion(rng, 6, 10, 3, 0.4, 1.2);
  Matrix s(4, 10);
  for (double& x : s.flat()) x = rng.uniform(-0.2, 1.2);
  const ScoreBatch batch = explicit_batch(s, {5, 2, 0, 3});
  LossConfig cfg;  // 1/6, 4/6, 1/6
  const LossResult total = chcf_total_loss(batch, train, cp, cfg);
  double expected = 0.0;
  Matrix d(4, 10);
  for (std::size_t k = 0; k < 3; ++k) {
    const LossResult one = chcf_behavior_loss(batch, train, k, cp, cfg);
    expected += cfg.lambdas[k] * one.loss;
    for (std::size_t i = 0; i < d.size(); ++i) {
      d.flat()[i] += cfg.lambdas[k] * one.d_scores[0].flat()[i];
    }
  }
  EXPECT_NEAR(total.loss, expected, 1e-12 * expected);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(total.d_scores[0].flat()[i], d.flat()[i], 1e-12);

  cfg.lambdas = {0.0, 0.0, 1.0};
  EXPECT_NEAR(chcf_total_loss(batch, train, cp, cfg).loss,
              chcf_behavior_loss(batch, train, 2, cp, cfg).loss, 1e-13);
}

TEST(TotalLoss, SingleBehaviorEqualsBehaviorLoss) {
  Tiny t = tiny({0.3, 0.9, 0.6}, {1});
  const LossConfig cfg = single(DecoratedFn::Linear, 0.2);
  EXPECT_EQ(chcf_total_loss(t.batch, t.train, t.cp, cfg).loss,
            chcf_behavior_loss(t.batch, t.train, 0, t.cp, cfg).loss);
}

TEST(TotalLoss, RejectsBadLambdas) {
  Tiny t = tiny({0.3}, {0});
  LossConfig cfg = single(DecoratedFn::Square, 0.1);
  cfg.lambdas = {0.9};
  EXPECT_THROW(chcf_total_loss(t.batch, t.train, t.cp, cfg), ConfigError);
  cfg.lambdas = {0.5, 0.5};
  EXPECT_THROW(chcf_total_loss(t.batch, t.train, t.cp, cfg), ConfigError);
  cfg.lambdas = {1.0 + 5e-10};
  EXPECT_NO_THROW(chcf_total_loss(t.batch, t.train, t.cp, cfg));
}

TEST(BehaviorLoss, Monotonicity) {
  Rng rng(3);
  const BehaviorDataset train = random_dataset(rng, 3, 12, 1, 0.4);
  const CriterionParams cp = random_criterion(rng, 3, 12, 1, 0.4, 1.2);
  Matrix s(3, 12);
  for (double& x : s.flat()) x = rng.uniform(-0.2, 1.4);
  for (DecoratedFn g : {DecoratedFn::Linear, DecoratedFn::Square, DecoratedFn::ExpM1}) {
    const LossConfig cfg = single(g, 0.1);
    const double base = chcf_behavior_loss(explicit_batch(s, {0, 1, 2}), train, 0, cp, cfg).loss;
    for (Index u = 0; u < 3; ++u) {
      for (Index v = 0; v < 12; ++v) {
        Matrix bumped = s;
        bumped(u, v) += 0.05;
        const double moved =
            chcf_behavior_loss(explicit_batch(bumped, {0, 1, 2}), train, 0, cp, cfg).loss;
        if (train.contains(0, u, v)) {
          EXPECT_LE(moved, base);
        } else {
          EXPECT_GE(moved, base);
        }
      }
    }
  }
}

TEST(BehaviorLoss, FixedRegressionRecoversUniformRegression) {
  Rng rng(4);
  const BehaviorDataset train = random_dataset(rng, 5, 9, 2, 0.3);
  const CriterionParams cp = random_criterion(rng, 5, 9, 2, 0.2, 2.0);
  Matrix s(5, 9);
  for (double& x : s.flat()) x = rng.uniform(-0.5, 1.5);
  const ScoreBatch batch = explicit_batch(s, {0, 1, 2, 3, 4});
  LossConfig cfg;
  cfg.lambdas = {0.5, 0.5};
  cfg.form = LossForm::Regression;
  cfg.bound_mode = BoundMode::Fixed;
  cfg.w = 0.1;
  for (std::size_t k = 0; k < 2; ++k) {
    const double expected = regression_loss(batch, train, k, cfg.w);
    const LossResult r = chcf_behavior_loss(batch, train, k, cp, cfg);
    EXPECT_NEAR(r.loss, expected, 1e-12 * expected);
    for (double x : r.grads.user_bounds.flat()) EXPECT_EQ(x, 0.0);
    for (double x : r.grads.item_bounds.flat()) EXPECT_EQ(x, 0.0);
  }
}

TEST(BehaviorLoss, PartialBoundModesOnlyTouchTheirFactor) {
  Rng rng(5);
  const BehaviorDataset train = random_dataset(rng, 4, 8, 1, 0.4);
  const CriterionParams cp = random_criterion(rng, 4, 8, 1, 0.4, 1.2);
  Matrix s(4, 8);
  for (double& x : s.flat()) x = rng.uniform(-0.2, 1.4);
  const ScoreBatch batch = explicit_batch(s, {0, 1, 2, 3});
  LossConfig cfg = single(DecoratedFn::Square, 0.1);

  cfg.bound_mode = BoundMode::ItemOnly;
  LossResult r = chcf_behavior_loss(batch, train, 0, cp, cfg);
  for (double x : r.grads.user_bounds.flat()) EXPECT_EQ(x, 0.0);
  CriterionParams item_only = cp;
  item_only.user_bounds.fill(1.0);
  cfg.bound_mode = BoundMode::Learned;
  EXPECT_EQ(r.loss, chcf_behavior_loss(batch, train, 0, item_only, cfg).loss);

  cfg.bound_mode = BoundMode::UserOnly;
  r = chcf_behavior_loss(batch, train, 0, cp, cfg);
  for (double x : r.grads.item_bounds.flat()) EXPECT_EQ(x, 0.0);
  CriterionParams user_only = cp;
  user_only.item_bounds.fill(1.0);
  cfg.bound_mode = BoundMode::Learned;
  EXPECT_EQ(r.loss, chcf_behavior_loss(batch, train, 0, user_only, cfg).loss);
}

TEST(BehaviorLoss, ScalarAndActiveKernelsAgree) {
  Rng rng(6);
  const BehaviorDataset train = random_dataset(rng, 8, 37, 3, 0.2);
  const CriterionParams cp = random_criterion(rng, 8, 37, 3, 0.4, 1.2);
  Matrix s(8, 37);
  for (double& x : s.flat()) x = rng.uniform(-0.2, 1.4);
  const ScoreBatch batch = explicit_batch(s, {0, 1, 2, 3, 4, 5, 6, 7});
  const simd::Isa before = simd::active_isa();
  for (DecoratedFn g : {DecoratedFn::Linear, DecoratedFn::Square, DecoratedFn::ExpM1}) {
    LossConfig cfg;
    cfg.g = g;
    simd::set_isa(simd::Isa::Scalar);
    const LossResult ref = chcf_total_loss(batch, train, cp, cfg);
    simd::set_isa(before);
    const LossResult got = chcf_total_loss(batch, train, cp, cfg);
    EXPECT_NEAR(got.loss, ref.loss, 1e-12 * ref.loss);
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_NEAR(got.d_scores[0].flat()[i], ref.d_scores[0].flat()[i], 1e-12);
    }
  }
}
