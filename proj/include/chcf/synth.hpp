#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "chcf/data.hpp"

namespace chcf {

struct SynthConfig {
  std::size_t num_users = 200;
  std::size_t num_items = 100;
  std::size_t latent_dim = 8;
  std::uint64_t seed = 1;
  double criterion_spread = 0.5;
  std::vector<double> densities{0.20, 0.08, 0.04};  // per behavior, target last
  std::size_t min_target = 3;

  /// Throws ConfigError for unordered densities or targets outside the
  /// achievable range [min_target / num_items, 1].
  void validate() const;
};

/// Planted multi-behavior data. Users and items get latent vectors x_u, y_v
/// with affinity a(u,v) = exp(<x_u, y_v>). Behavior k is observed iff
///   a(u,v) > tau_k * exp(spread * z(u,k)) * exp(spread * z'(v,k))
/// with z, z' standard normal, i.e. a user factor times an item factor. The
/// tau_k are calibrated so each behavior hits its density, and users short of
/// `min_target` target positives are redrawn. Target records get a random
/// chronological order.
BehaviorDataset generate(const SynthConfig& cfg);

}  // namespace chcf
