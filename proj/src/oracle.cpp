#include "chcf/oracle.hpp"

#include <algorithm>
#include <limits>

#include "chcf/error.hpp"

namespace chcf::oracle {
namespace {

std::vector<Index> negatives_of(const CmlInstance& inst, Index u) {
  std::vector<Index> out;
  const auto& pos = inst.positives[u];
  for (Index v = 0; v < inst.num_items(); ++v) {
    if (!std::binary_search(pos.begin(), pos.end(), v)) out.push_back(v);
  }
  return out;
}

double hinge(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

double cml_loss(const CmlInstance& inst) {
  double total = 0.0;
  for (Index u = 0; u < inst.num_users(); ++u) {
    const auto negatives = negatives_of(inst, u);
    for (Index v : inst.positives[u]) {
      for (Index n : negatives) {
        const double margin = inst.upper(u, v) - inst.lower(u, n);
        const double pos_dist = 1.0 - inst.scores(u, v);
        const double neg_dist = 1.0 - inst.scores(u, n);
        total += g_eval(inst.g, hinge(pos_dist - neg_dist + margin));
      }
    }
  }
  return total;
}

double chcf_loss_user_weighted(const CmlInstance& inst) {
  double total = 0.0;
  for (Index u = 0; u < inst.num_users(); ++u) {
    const auto negatives = negatives_of(inst, u);
    double positive = 0.0;
    for (Index v : inst.positives[u]) {
      positive += g_eval(inst.g, hinge(inst.upper(u, v) - inst.scores(u, v)));
    }
    double negative = 0.0;
    for (Index n : negatives) {
      negative += g_eval(inst.g, hinge(inst.scores(u, n) - inst.lower(u, n)));
    }
    const double w = negatives.empty() ? 0.0
                                       : static_cast<double>(inst.positives[u].size()) /
                                             static_cast<double>(negatives.size());
    total += positive + w * negative;
  }
  return total;
}

BoundCheck verify_cml_bound(const CmlInstance& inst) {
  const auto m = low_order_constant(inst.g);
  if (!m) {
    throw ConfigError("decorated function '" + std::string(to_string(inst.g)) +
                      "' has no finite low-order constant; the bound does not apply");
  }
  std::size_t max_negatives = 0;
  for (Index u = 0; u < inst.num_users(); ++u) {
    max_negatives = std::max(max_negatives, inst.num_items() - inst.positives[u].size());
  }
  BoundCheck check;
  check.constant = *m * static_cast<double>(max_negatives);
  check.lhs = cml_loss(inst);
  check.rhs = check.constant * chcf_loss_user_weighted(inst);
  check.holds = check.lhs <= check.rhs + 1e-9 * std::max(1.0, check.rhs);
  return check;
}

CmlInstance random_instance(Rng& rng, DecoratedFn g, const InstanceShape& shape) {
  CmlInstance inst;
  inst.g = g;
  inst.alpha = shape.alpha;
  const std::size_t users = 1 + rng.below(shape.max_users);
  const std::size_t items = 1 + rng.below(shape.max_items);
  inst.scores = Matrix(users, items);
  for (double& x : inst.scores.flat()) x = rng.uniform(0.0, shape.max_score);
  inst.user_bound.resize(users);
  inst.item_bound.resize(items);
  for (double& x : inst.user_bound) x = rng.uniform(shape.min_bound, shape.max_bound);
  for (double& x : inst.item_bound) x = rng.uniform(shape.min_bound, shape.max_bound);
  inst.positives.resize(users);
  for (auto& pos : inst.positives) {
    for (Index v = 0; v < items; ++v) {
      if (rng.uniform() < 0.5) pos.push_back(v);
    }
  }
  return inst;
}

BoundSweep verify_random(std::size_t instances, std::uint64_t seed, DecoratedFn g,
                         const InstanceShape& shape) {
  Rng rng(seed);
  BoundSweep sweep;
  sweep.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < instances; ++i) {
    const BoundCheck check = verify_cml_bound(random_instance(rng, g, shape));
    ++sweep.instances;
    if (check.holds) ++sweep.holding;
    sweep.min_slack = std::min(sweep.min_slack, check.rhs - check.lhs);
  }
  return sweep;
}

}  // namespace chcf::oracle
