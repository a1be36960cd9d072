#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chcf {

using Index = std::uint32_t;

/// One raw log record after id densification. The last behavior index is
/// the prediction target.
struct Interaction {
  Index user = 0;
  Index item = 0;
  Index behavior = 0;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct InteractionLog {
  std::vector<Interaction> interactions;
  std::vector<std::string> user_ids;  // dense index -> raw id
  std::vector<std::string> item_ids;
  std::vector<std::string> behavior_labels;
};

/// Reads `user<sep>item<sep>behavior[<sep>timestamp]` rows. The separator is
/// detected from the first data row (tab wins over comma). Blank lines and
/// lines starting with '#' are skipped. Raw ids are densified in order of
/// first appearance.
InteractionLog parse_interactions(const std::filesystem::path& path,
                                  std::span<const std::string> behavior_labels);
InteractionLog parse_interactions(std::istream& in, std::span<const std::string> behavior_labels,
                                  const std::string& source_name = "<stream>");

/// Per-behavior positive sets. Item lists are strictly increasing; the
/// complement against [0, num_items) is the unobserved set.
struct BehaviorDataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_behaviors = 0;
  std::vector<std::vector<std::vector<Index>>> positives;  // [behavior][user]
  // Target-behavior items per user in chronological order. Empty when the
  // order is unknown, in which case ascending item order stands in.
  std::vector<std::vector<Index>> target_order;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<std::string> behavior_labels;

  std::size_t target() const { return num_behaviors - 1; }
  const std::vector<Index>& items(std::size_t behavior, Index user) const {
    return positives[behavior][user];
  }
  bool contains(std::size_t behavior, Index user, Index item) const;
  std::size_t count(std::size_t behavior) const;
  double density(std::size_t behavior) const;

  friend bool operator==(const BehaviorDataset&, const BehaviorDataset&) = default;
};

/// Held-out target item per user.
using HeldOut = std::map<Index, Index>;

struct SplitDataset {
  BehaviorDataset train;
  HeldOut validation;
  HeldOut test;
};

/// Collapses duplicate (user, item, behavior) records and removes users and
/// items with fewer than `min_target` target-behavior positives, repeating
/// until nothing changes. Survivors are re-densified preserving order.
BehaviorDataset build_dataset(std::span<const Interaction> interactions, std::size_t num_behaviors,
                              std::size_t min_target);
BehaviorDataset build_dataset(const InteractionLog& log, std::size_t min_target);

/// Inverse of build_dataset for idempotence checks: one interaction per
/// positive, target records emitted in chronological order.
std::vector<Interaction> to_interactions(const BehaviorDataset& dataset);

struct DroppedUsers {
  BehaviorDataset dataset;
  std::size_t dropped = 0;
};

/// Removes users with fewer than `min_target` target positives and
/// re-densifies user ids. Items are kept as-is.
DroppedUsers drop_sparse_users(const BehaviorDataset& dataset, std::size_t min_target);

/// Holds out the chronologically last target item for test and the
/// second-last for validation. Auxiliary behaviors are untouched.
/// Throws DataError naming the first user with fewer than 3 target positives.
SplitDataset leave_one_out_split(const BehaviorDataset& dataset);

// Dataset directory layout:
//   index_map.tsv      kind<TAB>raw_id<TAB>index, kind in {user,item,behavior}
//   behavior_<k>.txt   one line per user: user index then its sorted items
//   validation.txt     user item   (split directories only)
//   test.txt           user item
void write_dataset(const std::filesystem::path& dir, const BehaviorDataset& dataset);
void write_split(const std::filesystem::path& dir, const SplitDataset& split);
BehaviorDataset read_dataset(const std::filesystem::path& dir);
SplitDataset read_split(const std::filesystem::path& dir);

/// 64-bit FNV-1a over the dataset files, in a fixed order.
std::uint64_t dataset_fingerprint(const std::filesystem::path& dir);

}  // namespace chcf
