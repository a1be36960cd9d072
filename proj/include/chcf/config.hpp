#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "chcf/data.hpp"
#include "chcf/trainer.hpp"

namespace chcf {

inline constexpr std::string_view kVersionTag = "chcf-0.1.0";

/// Model and data ablations.
///   O  regression loss, fixed 1/0 targets, per-behavior GMF layers
///   H  regression loss against the learned bounds
///   U  bounds from item factors only
///   I  bounds from user factors only
///   V  first behavior (view) removed
///   C  second behavior (cart) removed
enum class Variant { None, O, H, U, I, V, C };

std::string_view to_string(Variant v);
/// Accepts none, O, H, U, I, V, C. Throws ConfigError.
Variant parse_variant(std::string_view text);

/// A flat `key = value` file. Training keys: model, d, layers, lr, batch,
/// epochs, dropout, w, alpha, lambdas, g, seed, patience. A manifest adds
/// variant, dataset, dataset_fingerprint and version, so a manifest can be
/// fed back as a config.
struct RunConfig {
  TrainConfig train;
  Variant variant = Variant::None;
  std::string dataset;
  std::optional<std::uint64_t> dataset_fingerprint;
  std::string version{kVersionTag};

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(std::istream& in, const std::string& source = "<stream>");
RunConfig parse_config(const std::filesystem::path& path);

/// Every key materialized; parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& cfg);

struct AblationSetup {
  SplitDataset split;
  TrainConfig train;
};

/// Rewrites the data and training config for one variant. Data ablations
/// renormalize the remaining lambdas proportionally.
AblationSetup apply_variant(const SplitDataset& split, const TrainConfig& train, Variant variant);

/// Removes one behavior's positives and label.
BehaviorDataset drop_behavior(const BehaviorDataset& dataset, std::size_t behavior);

}  // namespace chcf
