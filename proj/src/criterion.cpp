#include "chcf/criterion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "chcf/error.hpp"
#include "chcf/simd.hpp"

namespace chcf {

std::string_view to_string(DecoratedFn g) {
  switch (g) {
    case DecoratedFn::Linear: return "linear";
    case DecoratedFn::Square: return "square";
    case DecoratedFn::ExpM1: return "expm1";
  }
  return "?";
}

DecoratedFn parse_decorated(std::string_view text) {
  if (text == "linear") return DecoratedFn::Linear;
  if (text == "square") return DecoratedFn::Square;
  if (text == "expm1") return DecoratedFn::ExpM1;
  throw ConfigError("unknown decorated function '" + std::string(text) +
                    "' (valid: linear, square, expm1)");
}

double g_eval(DecoratedFn g, double x) {
  switch (g) {
    case DecoratedFn::Linear: return x;
    case DecoratedFn::Square: return x * x;
    case DecoratedFn::ExpM1: return std::exp(std::min(x, 700.0)) - 1.0;
  }
  return 0.0;
}

double g_grad(DecoratedFn g, double x) {
  switch (g) {
    case DecoratedFn::Linear: return 1.0;
    case DecoratedFn::Square: return 2.0 * x;
    case DecoratedFn::ExpM1: return std::exp(std::min(x, 700.0));
  }
  return 0.0;
}

std::optional<double> low_order_constant(DecoratedFn g) {
  switch (g) {
    case DecoratedFn::Linear: return 2.0;
    case DecoratedFn::Square: return 4.0;
    case DecoratedFn::ExpM1: return std::nullopt;
  }
  return std::nullopt;
}

CriterionParams init_criterion(std::size_t num_users, std::size_t num_items,
                               std::size_t num_behaviors, double alpha, Rng& rng) {
  CriterionParams cp;
  cp.alpha = alpha;
  cp.user_bounds = Matrix(num_users, num_behaviors);
  cp.item_bounds = Matrix(num_items, num_behaviors);
  for (double& x : cp.user_bounds.flat()) x = 1.0 + rng.uniform(-0.01, 0.01);
  for (double& x : cp.item_bounds.flat()) x = 1.0 + rng.uniform(-0.01, 0.01);
  return cp;
}

Bounds bounds(const CriterionParams& cp, Index user, Index item, std::size_t behavior) {
  if (user >= cp.user_bounds.rows() || item >= cp.item_bounds.rows() ||
      behavior >= cp.num_behaviors()) {
    throw DataError("bound index out of range");
  }
  const double upper = cp.user_bounds(user, behavior) * cp.item_bounds(item, behavior);
  return {upper, cp.alpha * upper};
}

void clamp_bounds(CriterionParams& cp) {
  for (double& x : cp.user_bounds.flat()) x = std::max(x, kBoundFloor);
  for (double& x : cp.item_bounds.flat()) x = std::max(x, kBoundFloor);
}

bool uses_user_bounds(BoundMode mode) {
  return mode == BoundMode::Learned || mode == BoundMode::UserOnly;
}

bool uses_item_bounds(BoundMode mode) {
  return mode == BoundMode::Learned || mode == BoundMode::ItemOnly;
}

void LossConfig::validate(std::size_t num_behaviors) const {
  if (!(w >= 0.0)) throw ConfigError("w must be non-negative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
  if (lambdas.size() != num_behaviors) {
    throw ConfigError("lambdas needs " + std::to_string(num_behaviors) + " entries, got " +
                      std::to_string(lambdas.size()));
  }
  double sum = 0.0;
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw ConfigError("lambdas must be non-negative");
    sum += l;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("lambdas must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

namespace {

simd::NegForm negative_form(const LossConfig& cfg) {
  if (cfg.form == LossForm::Regression) return simd::NegForm::SquareResidual;
  switch (cfg.g) {
    case DecoratedFn::Linear: return simd::NegForm::LinearHinge;
    case DecoratedFn::Square: return simd::NegForm::SquareHinge;
    case DecoratedFn::ExpM1: return simd::NegForm::ExpM1Hinge;
  }
  return simd::NegForm::SquareHinge;
}

LossResult empty_result(const ScoreBatch& batch, const CriterionParams& cp) {
  LossResult r;
  for (const Matrix& s : batch.scores) r.d_scores.emplace_back(s.rows(), s.cols());
  r.grads.user_bounds = Matrix(cp.user_bounds.rows(), cp.user_bounds.cols());
  r.grads.item_bounds = Matrix(cp.item_bounds.rows(), cp.item_bounds.cols());
  return r;
}

void check_shapes(const ScoreBatch& batch, const BehaviorDataset& train, const CriterionParams& cp) {
  if (batch.scores.empty()) throw DataError("empty score batch");
  if (batch.scores.front().cols() != train.num_items || cp.item_bounds.rows() != train.num_items ||
      cp.user_bounds.rows() != train.num_users || cp.num_behaviors() != train.num_behaviors) {
    throw DataError("scores, bounds and dataset disagree on shape");
  }
  for (Index u : batch.users) {
    if (u >= train.num_users) throw DataError("batch user outside the dataset");
  }
}

// Adds scale * L^(k) and its gradients into `out`. Summation runs in batch
// order, then item order, so repeated calls are bit-identical.
void accumulate_behavior(const ScoreBatch& batch, const BehaviorDataset& train, std::size_t k,
                         const CriterionParams& cp, const LossConfig& cfg, double scale,
                         LossResult& out) {
  const std::size_t n_items = train.num_items;
  const bool learn_user = uses_user_bounds(cfg.bound_mode);
  const bool learn_item = uses_item_bounds(cfg.bound_mode);
  const double ratio = cfg.bound_mode == BoundMode::Fixed ? 0.0 : cp.alpha;
  const bool hinge = cfg.form == LossForm::Hinge;
  const auto negative_terms =
      simd::kernels().negative_terms[static_cast<std::size_t>(negative_form(cfg))];

  std::vector<double> item_factor(n_items, 1.0);
  if (learn_item) {
    for (std::size_t v = 0; v < n_items; ++v) item_factor[v] = cp.item_bounds(v, k);
  }
  std::vector<double> d_item_factor(n_items, 0.0);

  const std::size_t head = std::min(k, batch.scores.size() - 1);
  const Matrix& scores = batch.scores[head];
  Matrix& d_scores = out.d_scores[head];
  const double neg_weight = scale * cfg.w;

  for (std::size_t b = 0; b < batch.users.size(); ++b) {
    const Index u = batch.users[b];
    const double* r = scores.row(b).data();
    double* dr = d_scores.row(b).data();
    const double user_factor = learn_user ? cp.user_bounds(u, k) : 1.0;
    double d_user_factor = 0.0;

    const auto& pos = train.positives[k][u];
    for (Index v : pos) {
      const double diff = user_factor * item_factor[v] - r[v];
      double value = 0.0;
      double slope = 0.0;
      if (hinge) {
        if (!(diff > 0.0)) continue;
        value = g_eval(cfg.g, diff);
        slope = g_grad(cfg.g, diff);
      } else {
        value = diff * diff;
        slope = 2.0 * diff;
      }
      out.loss += scale * value;
      const double g = scale * slope;
      dr[v] -= g;
      d_user_factor += g * item_factor[v];
      d_item_factor[v] += g * user_factor;
    }

    // Unobserved items: the runs between consecutive positives.
    const double lower_scale = ratio * user_factor;
    double factor_grad = 0.0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= pos.size(); ++i) {
      const std::size_t stop = i < pos.size() ? pos[i] : n_items;
      if (stop > start) {
        const simd::NegTermSums sums = negative_terms({r + start, item_factor.data() + start,
                                                      stop - start, lower_scale, neg_weight,
                                                      dr + start, d_item_factor.data() + start});
        out.loss += sums.loss;
        factor_grad += sums.factor_grad;
      }
      start = stop + 1;
    }
    d_user_factor -= ratio * factor_grad;
    if (learn_user) out.grads.user_bounds(u, k) += d_user_factor;
  }
  if (learn_item) {
    for (std::size_t v = 0; v < n_items; ++v) out.grads.item_bounds(v, k) += d_item_factor[v];
  }
}

}  // namespace

double regression_loss(const ScoreBatch& batch, const BehaviorDataset& train, std::size_t behavior,
                       double w) {
  if (behavior >= train.num_behaviors) throw DataError("behavior index out of range");
  const Matrix& scores = batch.for_behavior(behavior);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.users.size(); ++b) {
    const Index u = batch.users[b];
    const auto& pos = train.positives[behavior][u];
    double positive = 0.0;
    double negative = 0.0;
    std::size_t next = 0;
    for (std::size_t v = 0; v < train.num_items; ++v) {
      const double r = scores(b, v);
      if (next < pos.size() && pos[next] == v) {
        positive += (1.0 - r) * (1.0 - r);
        ++next;
      } else {
        negative += r * r;
      }
    }
    total += positive + w * negative;
  }
  return total;
}

LossResult chcf_behavior_loss(const ScoreBatch& batch, const BehaviorDataset& train,
                              std::size_t behavior, const CriterionParams& cp,
                              const LossConfig& cfg) {
  check_shapes(batch, train, cp);
  if (behavior >= train.num_behaviors) throw DataError("behavior index out of range");
  if (!(cfg.w >= 0.0)) throw ConfigError("w must be non-negative");
  LossResult out = empty_result(batch, cp);
  accumulate_behavior(batch, train, behavior, cp, cfg, 1.0, out);
  return out;
}

LossResult chcf_total_loss(const ScoreBatch& batch, const BehaviorDataset& train,
                           const CriterionParams& cp, const LossConfig& cfg) {
  check_shapes(batch, train, cp);
  cfg.validate(train.num_behaviors);
  LossResult out = empty_result(batch, cp);
  for (std::size_t k = 0; k < train.num_behaviors; ++k) {
    if (cfg.lambdas[k] == 0.0) continue;
    accumulate_behavior(batch, train, k, cp, cfg, cfg.lambdas[k], out);
  }
  return out;
}

}  // namespace chcf
