#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "chcf/cf_models.hpp"
#include "chcf/criterion.hpp"
#include "chcf/data.hpp"
#include "chcf/rng.hpp"

namespace chcf::testing_support {

/// Each (u, v, k) is positive with probability `p`; item lists sorted.
inline BehaviorDataset random_dataset(Rng& rng, std::size_t users, std::size_t items,
                                      std::size_t behaviors, double p) {
  BehaviorDataset ds;
  ds.num_users = users;
  ds.num_items = items;
  ds.num_behaviors = behaviors;
  ds.positives.assign(behaviors, std::vector<std::vector<Index>>(users));
  for (std::size_t k = 0; k < behaviors; ++k) {
    for (std::size_t u = 0; u < users; ++u) {
      for (Index v = 0; v < items; ++v) {
        if (rng.uniform() < p) ds.positives[k][u].push_back(v);
      }
    }
  }
  return ds;
}

inline CriterionParams random_criterion(Rng& rng, std::size_t users, std::size_t items,
                                        std::size_t behaviors, double lo, double hi,
                                        double alpha = 0.5) {
  CriterionParams cp;
  cp.alpha = alpha;
  cp.user_bounds = Matrix(users, behaviors);
  cp.item_bounds = Matrix(items, behaviors);
  for (double& x : cp.user_bounds.flat()) x = rng.uniform(lo, hi);
  for (double& x : cp.item_bounds.flat()) x = rng.uniform(lo, hi);
  return cp;
}

/// Everything chcf_total_loss depends on, with a fixed dropout mask.
struct GradProblem {
  CfParams params;
  CriterionParams cp;
  BehaviorDataset train;
  std::vector<Index> users;
  LossConfig cfg;
  Matrix mask;  // empty: no dropout
  std::unique_ptr<Propagation> graph;

  ScoreBatch scores() const {
    return batch_scores(params, graph.get(), users, mask.empty() ? nullptr : &mask);
  }

  double loss() const { return chcf_total_loss(scores(), train, cp, cfg).loss; }

  /// Smallest |margin| over every hinge term with a non-zero weight.
  double min_margin() const {
    const ScoreBatch batch = scores();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < train.num_behaviors; ++k) {
      if (cfg.lambdas[k] == 0.0) continue;
      const Matrix& s = batch.for_behavior(k);
      for (std::size_t b = 0; b < users.size(); ++b) {
        for (Index v = 0; v < train.num_items; ++v) {
          const Bounds bd = bounds(cp, users[b], v, k);
          const bool pos = train.contains(k, users[b], v);
          const double margin = pos ? bd.upper - s(b, v) : s(b, v) - bd.lower;
          if (pos || cfg.w > 0.0) best = std::min(best, std::abs(margin));
        }
      }
    }
    return best;
  }
};

struct Analytic {
  double loss = 0.0;
  CfGrads cf;
  CriterionGrads bounds;
};

inline Analytic analytic_gradients(const GradProblem& p) {
  const ScoreBatch batch = p.scores();
  LossResult lr = chcf_total_loss(batch, p.train, p.cp, p.cfg);
  Analytic a;
  a.loss = lr.loss;
  a.cf = zero_grads(p.params);
  backprop_scores(p.params, p.graph.get(), batch, lr.d_scores, a.cf);
  a.bounds = std::move(lr.grads);
  return a;
}

/// Max over every parameter entry of |analytic - central difference| /
/// max(|analytic|, |numeric|, floor). Writes the worst entry's name.
inline double max_relative_error(GradProblem& p, double step = 1e-5, double floor = 1e-6,
                                 std::string* worst = nullptr) {
  const Analytic a = analytic_gradients(p);
  double max_err = 0.0;
  const auto check = [&](Matrix& param, const Matrix& grad, const char* name) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      double& x = param.flat()[i];
      const double saved = x;
      x = saved + step;
      const double up = p.loss();
      x = saved - step;
      const double down = p.loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grad.flat()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      const double err = std::abs(analytic - numeric) / denom;
      if (err > max_err) {
        max_err = err;
        if (worst) *worst = std::string(name) + "[" + std::to_string(i) + "]";
      }
    }
  };
  check(p.params.users, a.cf.users, "P");
  check(p.params.items, a.cf.items, "Q");
  if (!p.params.heads.empty()) check(p.params.heads, a.cf.heads, "h");
  if (uses_user_bounds(p.cfg.bound_mode)) check(p.cp.user_bounds, a.bounds.user_bounds, "H");
  if (uses_item_bounds(p.cfg.bound_mode)) check(p.cp.item_bounds, a.bounds.item_bounds, "G");
  return max_err;
}

/// Random small instance for gradient checks. Redraws until every hinge
/// margin is at least `kink` away from zero.
inline GradProblem random_grad_problem(Rng& rng, ModelKind model, std::size_t layers,
                                       DecoratedFn g, double kink = 1e-3) {
  for (;;) {
    GradProblem p;
    const std::size_t users = 5, items = 7, behaviors = 3, dim = 4;
    p.train = random_dataset(rng, users, items, behaviors, 0.35);
    CfShape shape{model, users, items, dim, layers, 1};
    p.params = init_cf_params(shape, rng);
    // Spread the embeddings so scores cover both sides of the bounds.
    for (double& x : p.params.users.flat()) x = rng.uniform(-0.7, 0.7);
    for (double& x : p.params.items.flat()) x = rng.uniform(-0.7, 0.7);
    if (model == ModelKind::GMF) {
      for (double& x : p.params.heads.flat()) x = rng.uniform(0.5, 1.5);
      p.mask = sample_dropout_mask(3, dim, 0.25, rng);
    }
    if (model == ModelKind::LightGCN) p.graph = std::make_unique<Propagation>(p.train);
    p.cp = random_criterion(rng, users, items, behaviors, 0.3, 1.0);
    p.users = {3, 0, 4};
    p.cfg.g = g;
    p.cfg.w = 0.3;
    if (p.min_margin() > kink) return p;
  }
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("chcf_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace chcf::testing_support
