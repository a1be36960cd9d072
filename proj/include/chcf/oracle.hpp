#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "chcf/criterion.hpp"
#include "chcf/data.hpp"
#include "chcf/matrix.hpp"
#include "chcf/rng.hpp"

// Enumeration-based reference for collaborative metric learning (CML) with
// adaptive margins, and a checker for the inequality L_CML <= C * L_CHCF.
// Single behavior; squared distance d(u,v)^2 = 1 - R(u,v) and margin
// m = S(u,v) - T(u,v'). Test-time only: cost is cubic in the instance size.
namespace chcf::oracle {

struct CmlInstance {
  Matrix scores;                   // |U| x |V|
  std::vector<double> user_bound;  // H column
  std::vector<double> item_bound;  // G column
  double alpha = 0.5;
  std::vector<std::vector<Index>> positives;  // sorted per user
  DecoratedFn g = DecoratedFn::Square;

  std::size_t num_users() const { return scores.rows(); }
  std::size_t num_items() const { return scores.cols(); }
  double upper(Index u, Index v) const { return user_bound[u] * item_bound[v]; }
  double lower(Index u, Index v) const { return alpha * upper(u, v); }
};

/// Sum over every (u, v+, v-) triplet of g((S_uv - R_uv + R_uv' - T_uv')+).
double cml_loss(const CmlInstance& inst);

/// CHCF loss with the per-user negative weight |V_u+| / |V_u-| (0 when a
/// user has no unobserved items), evaluated by direct enumeration.
double chcf_loss_user_weighted(const CmlInstance& inst);

struct BoundCheck {
  double lhs = 0.0;       // L_CML
  double rhs = 0.0;       // C * L_CHCF
  double constant = 0.0;  // C = M * max_u |V_u-|
  bool holds = false;
};

/// Throws ConfigError for decorated functions without a finite M (ExpM1).
BoundCheck verify_cml_bound(const CmlInstance& inst);

struct InstanceShape {
  std::size_t max_users = 10;
  std::size_t max_items = 8;
  double max_score = 1.5;
  double min_bound = 0.2;
  double max_bound = 2.0;
  double alpha = 0.5;
};

CmlInstance random_instance(Rng& rng, DecoratedFn g, const InstanceShape& shape = {});

struct BoundSweep {
  std::size_t instances = 0;
  std::size_t holding = 0;
  double min_slack = 0.0;  // min over instances of rhs - lhs
};

BoundSweep verify_random(std::size_t instances, std::uint64_t seed, DecoratedFn g,
                         const InstanceShape& shape = {});

}  // namespace chcf::oracle
