#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "chcf/data.hpp"
#include "chcf/error.hpp"

namespace chcf {
namespace fs = std::filesystem;
namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

Index parse_index(std::string_view token, const fs::path& path, std::size_t line_no) {
  Index value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad index '" +
                    std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string behavior_file(std::size_t k) { return "behavior_" + std::to_string(k) + ".txt"; }

void write_held_out(const fs::path& path, const HeldOut& held_out) {
  auto out = open_out(path);
  for (const auto& [user, item] : held_out) out << user << ' ' << item << '\n';
}

HeldOut read_held_out(const fs::path& path, const BehaviorDataset& train) {
  auto in = open_in(path);
  HeldOut held_out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = tokens(line);
    if (t.empty()) continue;
    if (t.size() != 2) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'user item'");
    }
    const Index u = parse_index(t[0], path, line_no);
    const Index v = parse_index(t[1], path, line_no);
    if (u >= train.num_users || v >= train.num_items) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": index out of range");
    }
    held_out[u] = v;
  }
  return held_out;
}

}  // namespace

void write_dataset(const fs::path& dir, const BehaviorDataset& dataset) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "index_map.tsv");
    for (std::size_t u = 0; u < dataset.num_users; ++u) {
      out << "user\t" << (dataset.user_ids.empty() ? std::to_string(u) : dataset.user_ids[u])
          << '\t' << u << '\n';
    }
    for (std::size_t v = 0; v < dataset.num_items; ++v) {
      out << "item\t" << (dataset.item_ids.empty() ? std::to_string(v) : dataset.item_ids[v])
          << '\t' << v << '\n';
    }
    for (std::size_t k = 0; k < dataset.num_behaviors; ++k) {
      out << "behavior\t"
          << (dataset.behavior_labels.empty() ? std::to_string(k) : dataset.behavior_labels[k])
          << '\t' << k << '\n';
    }
  }
  for (std::size_t k = 0; k < dataset.num_behaviors; ++k) {
    auto out = open_out(dir / behavior_file(k));
    for (std::size_t u = 0; u < dataset.num_users; ++u) {
      out << u;
      for (Index v : dataset.positives[k][u]) out << ' ' << v;
      out << '\n';
    }
  }
}

void write_split(const fs::path& dir, const SplitDataset& split) {
  write_dataset(dir, split.train);
  write_held_out(dir / "validation.txt", split.validation);
  write_held_out(dir / "test.txt", split.test);
}

BehaviorDataset read_dataset(const fs::path& dir) {
  BehaviorDataset dataset;
  {
    const fs::path path = dir / "index_map.tsv";
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto first = line.find('\t');
      const auto last = line.rfind('\t');
      if (first == std::string::npos || first == last) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": expected kind<TAB>raw_id<TAB>index");
      }
      const std::string kind = line.substr(0, first);
      std::string raw = line.substr(first + 1, last - first - 1);
      const Index index = parse_index(std::string_view(line).substr(last + 1), path, line_no);
      std::vector<std::string>* names = nullptr;
      if (kind == "user") names = &dataset.user_ids;
      else if (kind == "item") names = &dataset.item_ids;
      else if (kind == "behavior") names = &dataset.behavior_labels;
      else throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown kind '" + kind + "'");
      if (index != names->size()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + kind +
                        " indices must be listed densely in order");
      }
      names->push_back(std::move(raw));
    }
  }
  dataset.num_users = dataset.user_ids.size();
  dataset.num_items = dataset.item_ids.size();
  dataset.num_behaviors = dataset.behavior_labels.size();
  if (dataset.num_behaviors == 0) throw DataError(dir.string() + ": no behaviors in index map");

  dataset.positives.assign(dataset.num_behaviors,
                           std::vector<std::vector<Index>>(dataset.num_users));
  for (std::size_t k = 0; k < dataset.num_behaviors; ++k) {
    const fs::path path = dir / behavior_file(k);
    auto in = open_in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto t = tokens(line);
      if (t.empty()) continue;
      const Index u = parse_index(t[0], path, line_no);
      if (u >= dataset.num_users) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": user out of range");
      }
      auto& items = dataset.positives[k][u];
      items.clear();
      for (std::size_t i = 1; i < t.size(); ++i) {
        const Index v = parse_index(t[i], path, line_no);
        if (v >= dataset.num_items || (!items.empty() && v <= items.back())) {
          throw DataError(path.string() + ":" + std::to_string(line_no) +
                          ": items must be in range and strictly increasing");
        }
        items.push_back(v);
      }
    }
  }
  return dataset;
}

SplitDataset read_split(const fs::path& dir) {
  SplitDataset split;
  split.train = read_dataset(dir);
  split.validation = read_held_out(dir / "validation.txt", split.train);
  split.test = read_held_out(dir / "test.txt", split.train);
  return split;
}

std::uint64_t dataset_fingerprint(const fs::path& dir) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  const auto mix = [&hash](std::string_view bytes) {
    for (unsigned char c : bytes) {
      hash ^= c;
      hash *= 0x100000001b3ULL;
    }
  };
  std::vector<std::string> files{"index_map.tsv"};
  for (std::size_t k = 0; fs::exists(dir / behavior_file(k)); ++k) files.push_back(behavior_file(k));
  files.push_back("validation.txt");
  files.push_back("test.txt");
  for (const auto& name : files) {
    const fs::path path = dir / name;
    if (!fs::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    mix(name);
    mix(buf.str());
  }
  return hash;
}

}  // namespace chcf
