#include "chcf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "chcf/error.hpp"
#include "chcf/matrix.hpp"
#include "chcf/rng.hpp"

namespace chcf {

void SynthConfig::validate() const {
  if (num_users == 0 || num_items == 0 || latent_dim == 0) {
    throw ConfigError("synth sizes must be positive");
  }
  if (densities.empty()) throw ConfigError("synth needs at least one behavior density");
  if (!(criterion_spread >= 0.0)) throw ConfigError("criterion_spread must be non-negative");
  for (std::size_t k = 1; k < densities.size(); ++k) {
    if (densities[k] > densities[k - 1]) {
      throw ConfigError("behavior densities must be non-increasing toward the target behavior");
    }
  }
  const double low = static_cast<double>(min_target) / static_cast<double>(num_items);
  for (double d : densities) {
    if (!(d >= low && d <= 1.0)) {
      throw ConfigError("density " + std::to_string(d) + " unreachable; achievable range is [" +
                        std::to_string(low) + ", 1] for " + std::to_string(num_items) +
                        " items and " + std::to_string(min_target) + " target positives per user");
    }
  }
}

namespace {

struct Latents {
  Matrix users;        // |U| x latent_dim
  Matrix items;        // |V| x latent_dim
  Matrix user_crit;    // |U| x K
  Matrix item_crit;    // |V| x K
};

void draw_user(Latents& lat, std::size_t u, double scale, Rng& rng) {
  for (double& x : lat.users.row(u)) x = scale * rng.normal();
  for (double& x : lat.user_crit.row(u)) x = rng.normal();
}

// log a(u,v) - spread * (z(u,k) + z'(v,k)): positive iff above log tau_k.
double key(const Latents& lat, double spread, std::size_t u, std::size_t v, std::size_t k) {
  double dot = 0.0;
  for (std::size_t i = 0; i < lat.users.cols(); ++i) dot += lat.users(u, i) * lat.items(v, i);
  return dot - spread * (lat.user_crit(u, k) + lat.item_crit(v, k));
}

// Threshold halfway between the n-th and (n+1)-th largest keys.
double calibrate(std::vector<double> keys, std::size_t n) {
  std::sort(keys.begin(), keys.end(), std::greater<>());
  if (n == 0) return keys.front() + 1.0;
  if (n >= keys.size()) return keys.back() - 1.0;
  return 0.5 * (keys[n - 1] + keys[n]);
}

}  // namespace

BehaviorDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n_users = cfg.num_users;
  const std::size_t n_items = cfg.num_items;
  const std::size_t n_beh = cfg.densities.size();
  const std::size_t target = n_beh - 1;
  Rng rng(cfg.seed);

  // Entries scaled so <x_u, y_v> has unit variance.
  const double scale = std::pow(static_cast<double>(cfg.latent_dim), -0.25);
  Latents lat{Matrix(n_users, cfg.latent_dim), Matrix(n_items, cfg.latent_dim),
              Matrix(n_users, n_beh), Matrix(n_items, n_beh)};
  for (std::size_t u = 0; u < n_users; ++u) draw_user(lat, u, scale, rng);
  for (double& x : lat.items.flat()) x = scale * rng.normal();
  for (double& x : lat.item_crit.flat()) x = rng.normal();

  std::vector<double> thresholds(n_beh);
  const auto recalibrate = [&] {
    std::vector<double> keys(n_users * n_items);
    for (std::size_t k = 0; k < n_beh; ++k) {
      for (std::size_t u = 0; u < n_users; ++u) {
        for (std::size_t v = 0; v < n_items; ++v) keys[u * n_items + v] = key(lat, cfg.criterion_spread, u, v, k);
      }
      const auto count = static_cast<std::size_t>(
          std::llround(cfg.densities[k] * static_cast<double>(n_users * n_items)));
      thresholds[k] = calibrate(keys, count);
    }
  };
  const auto target_count = [&](std::size_t u) {
    std::size_t n = 0;
    for (std::size_t v = 0; v < n_items; ++v) {
      if (key(lat, cfg.criterion_spread, u, v, target) > thresholds[target]) ++n;
    }
    return n;
  };

  // Alternate calibration and redraws of deficient users until both hold.
  constexpr int kRounds = 200;
  constexpr int kRedraws = 10000;
  bool settled = false;
  for (int round = 0; round < kRounds && !settled; ++round) {
    recalibrate();
    settled = true;
    for (std::size_t u = 0; u < n_users; ++u) {
      if (target_count(u) >= cfg.min_target) continue;
      settled = false;
      int tries = 0;
      do {
        if (++tries > kRedraws) {
          throw ConfigError("synth could not give user " + std::to_string(u) + " " +
                            std::to_string(cfg.min_target) +
                            " target positives; raise the target density");
        }
        draw_user(lat, u, scale, rng);
      } while (target_count(u) < cfg.min_target);
    }
  }
  if (!settled) throw ConfigError("synth calibration did not converge; raise the target density");

  BehaviorDataset out;
  out.num_users = n_users;
  out.num_items = n_items;
  out.num_behaviors = n_beh;
  out.positives.assign(n_beh, std::vector<std::vector<Index>>(n_users));
  for (std::size_t k = 0; k < n_beh; ++k) {
    for (std::size_t u = 0; u < n_users; ++u) {
      for (std::size_t v = 0; v < n_items; ++v) {
        if (key(lat, cfg.criterion_spread, u, v, k) > thresholds[k]) {
          out.positives[k][u].push_back(static_cast<Index>(v));
        }
      }
    }
  }
  out.target_order.resize(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    out.target_order[u] = out.positives[target][u];
    rng.shuffle(std::span<Index>(out.target_order[u]));
  }
  for (std::size_t u = 0; u < n_users; ++u) out.user_ids.push_back("u" + std::to_string(u));
  for (std::size_t v = 0; v < n_items; ++v) out.item_ids.push_back("i" + std::to_string(v));
  if (n_beh == 3) {
    out.behavior_labels = {"view", "cart", "buy"};
  } else {
    for (std::size_t k = 0; k < n_beh; ++k) out.behavior_labels.push_back("b" + std::to_string(k));
  }
  return out;
}

}  // namespace chcf
