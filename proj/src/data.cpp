#include "chcf/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <string_view>
#include <tuple>
#include <unordered_map>

#include "chcf/error.hpp"

namespace chcf {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\r' || c == '\t'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::string join(std::span<const std::string> labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ", ";
    out += labels[i];
  }
  return out;
}

class IdMap {
 public:
  Index get_or_insert(std::string_view raw) {
    auto [it, inserted] = index_.try_emplace(std::string(raw), static_cast<Index>(names_.size()));
    if (inserted) names_.emplace_back(raw);
    return it->second;
  }
  std::vector<std::string> release() { return std::move(names_); }

 private:
  std::unordered_map<std::string, Index> index_;
  std::vector<std::string> names_;
};

// Chronological key of one target record: timestamp (when every target
// record carries one) and then file position.
struct TargetEvent {
  Index user;
  Index item;
  std::int64_t time;
  std::size_t position;
};

BehaviorDataset build_impl(std::span<const Interaction> interactions, std::size_t num_behaviors,
                           std::size_t min_target, const InteractionLog* names) {
  if (num_behaviors == 0) throw ConfigError("number of behaviors must be at least 1");
  const std::size_t target = num_behaviors - 1;

  std::size_t num_users = 0;
  std::size_t num_items = 0;
  bool all_timed = true;
  for (const Interaction& x : interactions) {
    if (x.behavior >= num_behaviors) {
      throw DataError("behavior id " + std::to_string(x.behavior) + " outside [0, " +
                      std::to_string(num_behaviors) + ")");
    }
    num_users = std::max<std::size_t>(num_users, x.user + 1);
    num_items = std::max<std::size_t>(num_items, x.item + 1);
    if (x.behavior == target && !x.timestamp) all_timed = false;
  }
  if (names) {
    num_users = std::max(num_users, names->user_ids.size());
    num_items = std::max(num_items, names->item_ids.size());
  }

  std::vector<std::vector<std::vector<Index>>> raw(num_behaviors,
                                                   std::vector<std::vector<Index>>(num_users));
  std::vector<TargetEvent> events;
  for (std::size_t pos = 0; pos < interactions.size(); ++pos) {
    const Interaction& x = interactions[pos];
    raw[x.behavior][x.user].push_back(x.item);
    if (x.behavior == target) {
      events.push_back({x.user, x.item, all_timed ? *x.timestamp : 0, pos});
    }
  }
  for (auto& per_user : raw) {
    for (auto& items : per_user) {
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
    }
  }

  // Iterative filtering on target-behavior counts until a fixpoint.
  std::vector<char> user_alive(num_users, 1);
  std::vector<char> item_alive(num_items, 1);
  if (min_target > 0) {
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<std::size_t> item_count(num_items, 0);
      for (std::size_t u = 0; u < num_users; ++u) {
        if (!user_alive[u]) continue;
        std::size_t n = 0;
        for (Index v : raw[target][u]) {
          if (item_alive[v]) ++n;
        }
        if (n < min_target) {
          user_alive[u] = 0;
          changed = true;
        }
      }
      for (std::size_t u = 0; u < num_users; ++u) {
        if (!user_alive[u]) continue;
        for (Index v : raw[target][u]) ++item_count[v];
      }
      for (std::size_t v = 0; v < num_items; ++v) {
        if (item_alive[v] && item_count[v] < min_target) {
          item_alive[v] = 0;
          changed = true;
        }
      }
    }
  }

  constexpr Index kGone = ~Index{0};
  std::vector<Index> user_map(num_users, kGone);
  std::vector<Index> item_map(num_items, kGone);
  BehaviorDataset out;
  out.num_behaviors = num_behaviors;
  for (std::size_t u = 0; u < num_users; ++u) {
    if (user_alive[u]) user_map[u] = static_cast<Index>(out.num_users++);
  }
  for (std::size_t v = 0; v < num_items; ++v) {
    if (item_alive[v]) item_map[v] = static_cast<Index>(out.num_items++);
  }

  out.positives.assign(num_behaviors, std::vector<std::vector<Index>>(out.num_users));
  for (std::size_t k = 0; k < num_behaviors; ++k) {
    for (std::size_t u = 0; u < num_users; ++u) {
      if (user_map[u] == kGone) continue;
      auto& dst = out.positives[k][user_map[u]];
      for (Index v : raw[k][u]) {
        if (item_map[v] != kGone) dst.push_back(item_map[v]);
      }
    }
  }

  // Keep the latest occurrence of each duplicated target record.
  std::stable_sort(events.begin(), events.end(), [](const TargetEvent& a, const TargetEvent& b) {
    return std::tie(a.user, a.item, a.time, a.position) <
           std::tie(b.user, b.item, b.time, b.position);
  });
  std::vector<TargetEvent> latest;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const bool last_of_pair = i + 1 == events.size() || events[i + 1].user != events[i].user ||
                              events[i + 1].item != events[i].item;
    if (last_of_pair && user_map[events[i].user] != kGone && item_map[events[i].item] != kGone) {
      latest.push_back(events[i]);
    }
  }
  std::stable_sort(latest.begin(), latest.end(), [](const TargetEvent& a, const TargetEvent& b) {
    return std::tie(a.time, a.position) < std::tie(b.time, b.position);
  });
  out.target_order.assign(out.num_users, {});
  for (const TargetEvent& e : latest) {
    out.target_order[user_map[e.user]].push_back(item_map[e.item]);
  }

  if (names) {
    out.behavior_labels = names->behavior_labels;
    for (std::size_t u = 0; u < names->user_ids.size(); ++u) {
      if (user_map[u] != kGone) out.user_ids.push_back(names->user_ids[u]);
    }
    for (std::size_t v = 0; v < names->item_ids.size(); ++v) {
      if (item_map[v] != kGone) out.item_ids.push_back(names->item_ids[v]);
    }
  }
  return out;
}

}  // namespace

bool BehaviorDataset::contains(std::size_t behavior, Index user, Index item) const {
  const auto& items = positives[behavior][user];
  return std::binary_search(items.begin(), items.end(), item);
}

std::size_t BehaviorDataset::count(std::size_t behavior) const {
  std::size_t n = 0;
  for (const auto& items : positives[behavior]) n += items.size();
  return n;
}

double BehaviorDataset::density(std::size_t behavior) const {
  if (num_users == 0 || num_items == 0) return 0.0;
  return static_cast<double>(count(behavior)) /
         (static_cast<double>(num_users) * static_cast<double>(num_items));
}

InteractionLog parse_interactions(std::istream& in, std::span<const std::string> behavior_labels,
                                  const std::string& source_name) {
  if (behavior_labels.empty()) throw ConfigError("at least one behavior label is required");
  std::unordered_map<std::string, Index> behavior_index;
  for (std::size_t k = 0; k < behavior_labels.size(); ++k) {
    behavior_index.emplace(behavior_labels[k], static_cast<Index>(k));
  }

  InteractionLog log;
  log.behavior_labels.assign(behavior_labels.begin(), behavior_labels.end());
  IdMap users;
  IdMap items;
  char sep = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (trim(view).empty() || view.front() == '#') continue;
    if (sep == 0) sep = view.find('\t') != std::string_view::npos ? '\t' : ',';

    const auto where = [&] { return source_name + ":" + std::to_string(line_no) + ": "; };
    auto fields = split_fields(view, sep);
    if (fields.size() != 3 && fields.size() != 4) {
      throw DataError(where() + "expected 3 or 4 fields (user, item, behavior[, timestamp]), got " +
                      std::to_string(fields.size()));
    }
    for (auto& f : fields) {
      f = trim(f);
      if (f.empty()) throw DataError(where() + "empty field");
    }
    const auto b = behavior_index.find(std::string(fields[2]));
    if (b == behavior_index.end()) {
      throw DataError(where() + "unknown behavior '" + std::string(fields[2]) +
                      "' (allowed: " + join(behavior_labels) + ")");
    }
    Interaction x;
    x.user = users.get_or_insert(fields[0]);
    x.item = items.get_or_insert(fields[1]);
    x.behavior = b->second;
    if (fields.size() == 4) {
      std::int64_t ts = 0;
      const auto [ptr, ec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), ts);
      if (ec != std::errc() || ptr != fields[3].data() + fields[3].size()) {
        throw DataError(where() + "timestamp '" + std::string(fields[3]) + "' is not an integer");
      }
      x.timestamp = ts;
    }
    log.interactions.push_back(x);
  }
  log.user_ids = users.release();
  log.item_ids = items.release();
  return log;
}

InteractionLog parse_interactions(const std::filesystem::path& path,
                                  std::span<const std::string> behavior_labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_interactions(in, behavior_labels, path.string());
}

BehaviorDataset build_dataset(std::span<const Interaction> interactions, std::size_t num_behaviors,
                              std::size_t min_target) {
  return build_impl(interactions, num_behaviors, min_target, nullptr);
}

BehaviorDataset build_dataset(const InteractionLog& log, std::size_t min_target) {
  return build_impl(log.interactions, log.behavior_labels.size(), min_target, &log);
}

std::vector<Interaction> to_interactions(const BehaviorDataset& dataset) {
  std::vector<Interaction> out;
  const std::size_t target = dataset.target();
  for (std::size_t k = 0; k < target; ++k) {
    for (std::size_t u = 0; u < dataset.num_users; ++u) {
      for (Index v : dataset.positives[k][u]) {
        out.push_back({static_cast<Index>(u), v, static_cast<Index>(k), std::nullopt});
      }
    }
  }
  for (std::size_t u = 0; u < dataset.num_users; ++u) {
    const auto& order = dataset.target_order.empty() || dataset.target_order[u].empty()
                            ? dataset.positives[target][u]
                            : dataset.target_order[u];
    for (Index v : order) {
      out.push_back({static_cast<Index>(u), v, static_cast<Index>(target), std::nullopt});
    }
  }
  return out;
}

DroppedUsers drop_sparse_users(const BehaviorDataset& dataset, std::size_t min_target) {
  DroppedUsers result;
  BehaviorDataset& out = result.dataset;
  out.num_items = dataset.num_items;
  out.num_behaviors = dataset.num_behaviors;
  out.item_ids = dataset.item_ids;
  out.behavior_labels = dataset.behavior_labels;
  out.positives.assign(dataset.num_behaviors, {});
  const std::size_t target = dataset.target();
  for (std::size_t u = 0; u < dataset.num_users; ++u) {
    if (dataset.positives[target][u].size() < min_target) {
      ++result.dropped;
      continue;
    }
    for (std::size_t k = 0; k < dataset.num_behaviors; ++k) {
      out.positives[k].push_back(dataset.positives[k][u]);
    }
    if (!dataset.target_order.empty()) out.target_order.push_back(dataset.target_order[u]);
    if (!dataset.user_ids.empty()) out.user_ids.push_back(dataset.user_ids[u]);
    ++out.num_users;
  }
  return result;
}

SplitDataset leave_one_out_split(const BehaviorDataset& dataset) {
  SplitDataset split;
  split.train = dataset;
  const std::size_t target = dataset.target();
  split.train.target_order.assign(dataset.num_users, {});
  for (std::size_t u = 0; u < dataset.num_users; ++u) {
    std::vector<Index> order = dataset.target_order.empty() || dataset.target_order[u].empty()
                                   ? dataset.positives[target][u]
                                   : dataset.target_order[u];
    if (order.size() < 3) {
      const std::string name = dataset.user_ids.empty() ? std::to_string(u)
                                                        : dataset.user_ids[u] + " (index " +
                                                              std::to_string(u) + ")";
      throw DataError("user " + name + " has " + std::to_string(order.size()) +
                      " target positives; leave-one-out needs at least 3");
    }
    const Index test_item = order.back();
    const Index val_item = order[order.size() - 2];
    split.test.emplace(static_cast<Index>(u), test_item);
    split.validation.emplace(static_cast<Index>(u), val_item);
    order.resize(order.size() - 2);
    auto& train_items = split.train.positives[target][u];
    std::erase_if(train_items, [&](Index v) { return v == test_item || v == val_item; });
    split.train.target_order[u] = std::move(order);
  }
  return split;
}

}  // namespace chcf
