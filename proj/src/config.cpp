#include "chcf/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "chcf/error.hpp"

namespace chcf {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::None: return "none";
    case Variant::O: return "O";
    case Variant::H: return "H";
    case Variant::U: return "U";
    case Variant::I: return "I";
    case Variant::V: return "V";
    case Variant::C: return "C";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "none") return Variant::None;
  if (text == "O") return Variant::O;
  if (text == "H") return Variant::H;
  if (text == "U") return Variant::U;
  if (text == "I") return Variant::I;
  if (text == "V") return Variant::V;
  if (text == "C") return Variant::C;
  throw ConfigError("unknown variant '" + std::string(text) + "' (valid: O, H, U, I, V, C)");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + std::string(key) + "': bad value '" + std::string(text) + "'");
  }
  return value;
}

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  TrainConfig& t = cfg.train;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(view.substr(0, eq));
    const std::string_view value = trim(view.substr(eq + 1));
    try {
      if (key == "model") t.model = parse_model(value);
      else if (key == "d") t.dim = parse_number<std::size_t>(key, value);
      else if (key == "layers") t.layers = parse_number<std::size_t>(key, value);
      else if (key == "lr") t.lr = parse_number<double>(key, value);
      else if (key == "batch") t.batch_size = parse_number<std::size_t>(key, value);
      else if (key == "epochs") t.epochs = parse_number<std::size_t>(key, value);
      else if (key == "dropout") t.dropout = parse_number<double>(key, value);
      else if (key == "w") t.loss.w = parse_number<double>(key, value);
      else if (key == "alpha") t.loss.alpha = parse_number<double>(key, value);
      else if (key == "g") t.loss.g = parse_decorated(value);
      else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value);
      else if (key == "patience") t.patience = parse_number<std::size_t>(key, value);
      else if (key == "lambdas") {
        t.loss.lambdas.clear();
        std::string list(value);
        for (char& c : list) {
          if (c == ',') c = ' ';
        }
        std::istringstream items(list);
        std::string item;
        while (items >> item) t.loss.lambdas.push_back(parse_number<double>(key, item));
      }
      else if (key == "variant") cfg.variant = parse_variant(value);
      else if (key == "dataset") cfg.dataset = std::string(value);
      else if (key == "dataset_fingerprint") {
        cfg.dataset_fingerprint = parse_number<std::uint64_t>(key, value);
      }
      else if (key == "version") cfg.version = std::string(value);
      else {
        throw ConfigError("unknown key '" + std::string(key) +
                          "' (valid: model, d, layers, lr, batch, epochs, dropout, w, alpha, "
                          "lambdas, g, seed, patience, variant, dataset, dataset_fingerprint, "
                          "version)");
      }
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

std::string render_config(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  std::ostringstream out;
  out << "model = " << to_string(t.model) << '\n';
  out << "d = " << t.dim << '\n';
  out << "layers = " << t.layers << '\n';
  out << "lr = " << format_double(t.lr) << '\n';
  out << "batch = " << t.batch_size << '\n';
  out << "epochs = " << t.epochs << '\n';
  out << "dropout = " << format_double(t.dropout) << '\n';
  out << "w = " << format_double(t.loss.w) << '\n';
  out << "alpha = " << format_double(t.loss.alpha) << '\n';
  out << "lambdas = ";
  for (std::size_t k = 0; k < t.loss.lambdas.size(); ++k) {
    out << (k ? "," : "") << format_double(t.loss.lambdas[k]);
  }
  out << '\n';
  out << "g = " << to_string(t.loss.g) << '\n';
  out << "seed = " << t.seed << '\n';
  out << "patience = " << t.patience << '\n';
  out << "variant = " << to_string(cfg.variant) << '\n';
  if (!cfg.dataset.empty()) out << "dataset = " << cfg.dataset << '\n';
  if (cfg.dataset_fingerprint) out << "dataset_fingerprint = " << *cfg.dataset_fingerprint << '\n';
  out << "version = " << cfg.version << '\n';
  return out.str();
}

BehaviorDataset drop_behavior(const BehaviorDataset& dataset, std::size_t behavior) {
  if (behavior >= dataset.target()) {
    throw ConfigError("only auxiliary behaviors can be dropped");
  }
  BehaviorDataset out = dataset;
  out.positives.erase(out.positives.begin() + static_cast<std::ptrdiff_t>(behavior));
  if (!out.behavior_labels.empty()) {
    out.behavior_labels.erase(out.behavior_labels.begin() + static_cast<std::ptrdiff_t>(behavior));
  }
  --out.num_behaviors;
  return out;
}

AblationSetup apply_variant(const SplitDataset& split, const TrainConfig& train, Variant variant) {
  AblationSetup setup{split, train};
  TrainConfig& t = setup.train;
  const auto drop = [&](std::size_t behavior, const char* name) {
    if (split.train.num_behaviors < behavior + 2) {
      throw ConfigError(std::string("variant needs a ") + name + " behavior before the target");
    }
    setup.split.train = drop_behavior(split.train, behavior);
    auto& lambdas = t.loss.lambdas;
    if (lambdas.size() != split.train.num_behaviors) {
      throw ConfigError("lambdas must have one entry per behavior before ablation");
    }
    lambdas.erase(lambdas.begin() + static_cast<std::ptrdiff_t>(behavior));
    double sum = 0.0;
    for (double l : lambdas) sum += l;
    if (!(sum > 0.0)) throw ConfigError("remaining lambdas sum to zero after ablation");
    for (double& l : lambdas) l /= sum;
  };
  switch (variant) {
    case Variant::None:
      break;
    case Variant::O:
      t.loss.form = LossForm::Regression;
      t.loss.bound_mode = BoundMode::Fixed;
      t.per_behavior_heads = true;
      break;
    case Variant::H:
      t.loss.form = LossForm::Regression;
      break;
    case Variant::U:
      t.loss.bound_mode = BoundMode::ItemOnly;
      break;
    case Variant::I:
      t.loss.bound_mode = BoundMode::UserOnly;
      break;
    case Variant::V:
      drop(0, "view");
      break;
    case Variant::C:
      drop(1, "cart");
      break;
  }
  return setup;
}

}  // namespace chcf
