#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chcf/config.hpp"
#include "chcf/eval.hpp"
#include "chcf/synth.hpp"
#include "chcf/trainer.hpp"

// Subcommand bodies behind tools/chcf_main.cpp. They throw ConfigError,
// DataError or NumericalError; the driver maps those to exit codes 1, 2, 3.
namespace chcf::cli {

namespace fs = std::filesystem;

struct PrepareSummary {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t dropped_users = 0;
};

/// Raw log -> filtered dataset -> leave-one-out split directory.
PrepareSummary cmd_prepare(const fs::path& raw_file, const fs::path& out_dir,
                           std::size_t min_target, std::span<const std::string> behaviors,
                           std::ostream& log);

void cmd_synth(const SynthConfig& cfg, const fs::path& out_dir, std::ostream& log);

struct TrainOutputs {
  TrainResult result;
  RankingReport test_report;
};

/// Writes checkpoint.txt, history.tsv, timing.tsv, manifest.txt and the test
/// report into `out_dir`. A config carrying `variant` trains that ablation.
TrainOutputs cmd_train(const fs::path& dataset_dir, const std::optional<fs::path>& config_file,
                       const fs::path& out_dir, std::ostream& log);

/// Same as cmd_train with an already-parsed config.
TrainOutputs run_training(const fs::path& dataset_dir, RunConfig cfg, const fs::path& out_dir,
                          std::ostream& log);

RankingReport cmd_evaluate(const fs::path& checkpoint, const fs::path& dataset_dir,
                           std::span<const std::size_t> cutoffs,
                           const std::optional<fs::path>& report_stem, std::ostream& log);

RankingReport cmd_ablate(const fs::path& dataset_dir, Variant variant,
                         const std::optional<fs::path>& config_file, const fs::path& out_dir,
                         std::ostream& log);

/// Returns true when every instance satisfies the bound for every g.
bool cmd_verify_bound(std::size_t instances, std::uint64_t seed, std::ostream& out);

/// One row (u, v, k, S, T) per requested pair and behavior.
void cmd_dump_bounds(const fs::path& checkpoint, std::span<const Index> users,
                     std::span<const Index> items, std::ostream& out);

}  // namespace chcf::cli
