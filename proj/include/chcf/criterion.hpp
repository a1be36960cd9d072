#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "chcf/cf_models.hpp"
#include "chcf/data.hpp"
#include "chcf/matrix.hpp"
#include "chcf/rng.hpp"

namespace chcf {

/// Shapes the hinge margin: g(x) = x, x^2 or e^x - 1.
enum class DecoratedFn { Linear, Square, ExpM1 };

std::string_view to_string(DecoratedFn g);
/// Accepts "linear", "square", "expm1". Throws ConfigError.
DecoratedFn parse_decorated(std::string_view text);

/// Arguments are hinge-clamped margins (x >= 0). ExpM1 clamps x at 700.
double g_eval(DecoratedFn g, double x);
/// Right-derivative at 0: 1 for Linear and ExpM1, 0 for Square.
double g_grad(DecoratedFn g, double x);

/// The M with g(2x) <= M g(x) for all x > 0; nullopt when no finite M exists.
std::optional<double> low_order_constant(DecoratedFn g);

/// Lower clamp on every entry of H and G, applied after each update.
inline constexpr double kBoundFloor = 1e-3;

/// Rank-1 bound factors. For user u, item v and behavior k the upper bound is
/// S = H(u,k) * G(v,k) and the lower bound is T = alpha * S.
struct CriterionParams {
  Matrix user_bounds;  // H, |U| x K
  Matrix item_bounds;  // G, |V| x K
  double alpha = 0.5;

  std::size_t num_behaviors() const { return user_bounds.cols(); }

  friend bool operator==(const CriterionParams&, const CriterionParams&) = default;
};

/// H and G entries start at 1 + U(-0.01, 0.01).
CriterionParams init_criterion(std::size_t num_users, std::size_t num_items,
                               std::size_t num_behaviors, double alpha, Rng& rng);

struct Bounds {
  double upper;
  double lower;
};

Bounds bounds(const CriterionParams& cp, Index user, Index item, std::size_t behavior);

void clamp_bounds(CriterionParams& cp);

/// Hinge: the criterion loss. Regression: squared residuals against the same
/// bounds, no clamping.
enum class LossForm { Hinge, Regression };

/// Which factors feed the bounds.
///   Learned  S = H*G
///   Fixed    S = 1, T = 0 (plain weighted regression targets)
///   ItemOnly S = G, users share each item's bound
///   UserOnly S = H, items share each user's bound
/// Factors that are not used receive no gradient.
enum class BoundMode { Learned, Fixed, ItemOnly, UserOnly };

bool uses_user_bounds(BoundMode mode);
bool uses_item_bounds(BoundMode mode);

struct LossConfig {
  double w = 0.1;
  std::vector<double> lambdas{1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
  DecoratedFn g = DecoratedFn::Square;
  double alpha = 0.5;  // seeds CriterionParams::alpha, which the loss reads
  LossForm form = LossForm::Hinge;
  BoundMode bound_mode = BoundMode::Learned;

  /// Throws ConfigError unless lambdas has `num_behaviors` non-negative
  /// entries summing to 1 (within 1e-9), w >= 0 and alpha in [0, 1].
  void validate(std::size_t num_behaviors) const;

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct CriterionGrads {
  Matrix user_bounds;
  Matrix item_bounds;
};

struct LossResult {
  double loss = 0.0;
  std::vector<Matrix> d_scores;  // same layout as ScoreBatch::scores
  CriterionGrads grads;
};

/// Uniform-weight regression over batch users:
/// sum_{v in V+} (1 - R)^2 + w * sum_{v in V-} R^2.
double regression_loss(const ScoreBatch& batch, const BehaviorDataset& train, std::size_t behavior,
                       double w);

/// Criterion loss of one behavior with gradients with respect to the
/// scores, H and G. Unobserved items are visited as the runs between
/// consecutive positives, so the cost is O(B * |V|) without building V-.
LossResult chcf_behavior_loss(const ScoreBatch& batch, const BehaviorDataset& train,
                              std::size_t behavior, const CriterionParams& cp,
                              const LossConfig& cfg);

/// sum_k lambda_k * chcf_behavior_loss_k, gradients accumulated into the
/// shared score matrix.
LossResult chcf_total_loss(const ScoreBatch& batch, const BehaviorDataset& train,
                           const CriterionParams& cp, const LossConfig& cfg);

}  // namespace chcf
