#include "chcf/commands.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

#include "chcf/checkpoint.hpp"
#include "chcf/error.hpp"
#include "chcf/oracle.hpp"

namespace chcf::cli {
namespace {

std::string real17(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void log_split(const SplitDataset& split, std::ostream& log) {
  const BehaviorDataset& train = split.train;
  log << "users " << train.num_users << ", items " << train.num_items << ", behaviors "
      << train.num_behaviors << '\n';
  for (std::size_t k = 0; k < train.num_behaviors; ++k) {
    log << "  " << (train.behavior_labels.empty() ? std::to_string(k) : train.behavior_labels[k])
        << ": " << train.count(k) << " train positives\n";
  }
}

}  // namespace

PrepareSummary cmd_prepare(const fs::path& raw_file, const fs::path& out_dir,
                           std::size_t min_target, std::span<const std::string> behaviors,
                           std::ostream& log) {
  const InteractionLog raw = parse_interactions(raw_file, behaviors);
  log << "parsed " << raw.interactions.size() << " interactions\n";
  const BehaviorDataset filtered = build_dataset(raw, min_target);
  const DroppedUsers kept = drop_sparse_users(filtered, 3);
  if (kept.dropped > 0) {
    log << "dropped " << kept.dropped << " users with fewer than 3 target positives\n";
  }
  const SplitDataset split = leave_one_out_split(kept.dataset);
  write_split(out_dir, split);
  log_split(split, log);
  return {split.train.num_users, split.train.num_items, kept.dropped};
}

void cmd_synth(const SynthConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  const BehaviorDataset data = generate(cfg);
  for (std::size_t k = 0; k < data.num_behaviors; ++k) {
    log << data.behavior_labels[k] << " density " << data.density(k) << '\n';
  }
  const SplitDataset split = leave_one_out_split(data);
  write_split(out_dir, split);
  log_split(split, log);
}

TrainOutputs run_training(const fs::path& dataset_dir, RunConfig cfg, const fs::path& out_dir,
                          std::ostream& log) {
  const SplitDataset split = read_split(dataset_dir);
  const std::uint64_t fingerprint = dataset_fingerprint(dataset_dir);
  if (cfg.dataset_fingerprint && *cfg.dataset_fingerprint != fingerprint) {
    throw DataError("dataset fingerprint " + std::to_string(fingerprint) +
                    " does not match the manifest (" + std::to_string(*cfg.dataset_fingerprint) +
                    ")");
  }
  cfg.dataset = fs::absolute(dataset_dir).lexically_normal().string();
  cfg.dataset_fingerprint = fingerprint;
  cfg.version = std::string(kVersionTag);

  const AblationSetup setup = apply_variant(split, cfg.train, cfg.variant);
  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "manifest.txt");
    out << render_config(cfg);
  }

  TrainOutputs outputs;
  outputs.result = train(setup.split, setup.train);
  const TrainResult& result = outputs.result;
  write_checkpoint(out_dir / "checkpoint.txt", {result.params, result.criterion});
  {
    auto history = open_out(out_dir / "history.tsv");
    auto timing = open_out(out_dir / "timing.tsv");
    history << "epoch\tloss\tval_hr@100\tval_ndcg@100\n";
    timing << "epoch\twall_seconds\n";
    for (const EpochRecord& r : result.history) {
      history << r.epoch << '\t' << real17(r.loss) << '\t' << real17(r.val_hr) << '\t'
              << real17(r.val_ndcg) << '\n';
      timing << r.epoch << '\t' << r.seconds << '\n';
    }
  }
  log << "trained " << result.history.size() << " epochs, best epoch " << result.best_epoch
      << '\n';

  std::unique_ptr<Propagation> graph;
  if (result.params.model == ModelKind::LightGCN) graph = std::make_unique<Propagation>(setup.split.train);
  const Predictor predictor(result.params, graph.get(), result.criterion);
  outputs.test_report = evaluate(predictor, setup.split.train, setup.split.test, kDefaultCutoffs);
  write_report(out_dir / "report", outputs.test_report);
  log << format_report(outputs.test_report);
  return outputs;
}

TrainOutputs cmd_train(const fs::path& dataset_dir, const std::optional<fs::path>& config_file,
                       const fs::path& out_dir, std::ostream& log) {
  const RunConfig cfg = config_file ? parse_config(*config_file) : RunConfig{};
  return run_training(dataset_dir, cfg, out_dir, log);
}

RankingReport cmd_evaluate(const fs::path& checkpoint, const fs::path& dataset_dir,
                           std::span<const std::size_t> cutoffs,
                           const std::optional<fs::path>& report_stem, std::ostream& log) {
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  const SplitDataset split = read_split(dataset_dir);
  const BehaviorDataset& train = split.train;
  if (ckpt.params.num_users() != train.num_users || ckpt.params.num_items() != train.num_items ||
      ckpt.criterion.num_behaviors() != train.num_behaviors) {
    throw DataError("checkpoint shape (" + std::to_string(ckpt.params.num_users()) + " users, " +
                    std::to_string(ckpt.params.num_items()) + " items, " +
                    std::to_string(ckpt.criterion.num_behaviors()) +
                    " behaviors) does not match the dataset (" + std::to_string(train.num_users) +
                    ", " + std::to_string(train.num_items) + ", " +
                    std::to_string(train.num_behaviors) + ")");
  }
  std::unique_ptr<Propagation> graph;
  if (ckpt.params.model == ModelKind::LightGCN) graph = std::make_unique<Propagation>(train);
  const Predictor predictor(ckpt.params, graph.get(), ckpt.criterion);
  const RankingReport report = evaluate(predictor, train, split.test, cutoffs);
  if (report_stem) write_report(*report_stem, report);
  log << format_report(report);
  return report;
}

RankingReport cmd_ablate(const fs::path& dataset_dir, Variant variant,
                         const std::optional<fs::path>& config_file, const fs::path& out_dir,
                         std::ostream& log) {
  if (variant == Variant::None) throw ConfigError("ablate needs a variant (O, H, U, I, V, C)");
  RunConfig cfg = config_file ? parse_config(*config_file) : RunConfig{};
  cfg.variant = variant;
  log << "variant " << to_string(variant) << '\n';
  return run_training(dataset_dir, cfg, out_dir, log).test_report;
}

bool cmd_verify_bound(std::size_t instances, std::uint64_t seed, std::ostream& out) {
  bool all = true;
  for (DecoratedFn g : {DecoratedFn::Linear, DecoratedFn::Square}) {
    const oracle::BoundSweep sweep = oracle::verify_random(instances, seed, g);
    const bool pass = sweep.holding == sweep.instances;
    all = all && pass;
    out << "g=" << to_string(g) << " instances=" << sweep.instances << " holding=" << sweep.holding
        << " min_slack=" << real17(sweep.min_slack) << ' ' << (pass ? "PASS" : "FAIL") << '\n';
  }
  return all;
}

void cmd_dump_bounds(const fs::path& checkpoint, std::span<const Index> users,
                     std::span<const Index> items, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  const CriterionParams& cp = ckpt.criterion;
  out << "user\titem\tbehavior\tS\tT\n";
  for (Index u : users) {
    for (Index v : items) {
      for (std::size_t k = 0; k < cp.num_behaviors(); ++k) {
        const Bounds b = bounds(cp, u, v, k);
        out << u << '\t' << v << '\t' << k << '\t' << real17(b.upper) << '\t' << real17(b.lower)
            << '\n';
      }
    }
  }
}

}  // namespace chcf::cli
