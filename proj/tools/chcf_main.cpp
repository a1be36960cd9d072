#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "chcf/commands.hpp"
#include "chcf/error.hpp"
#include "chcf/simd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::optional<std::filesystem::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace chcf;
  namespace fs = std::filesystem;

  CLI::App app{"chcf: multi-behavior collaborative filtering with learned hinge bounds"};
  app.require_subcommand(1);
  std::string isa = "auto";
  app.add_option("--isa", isa, "Kernel set: auto, scalar, avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Raw interaction log to a split dataset directory");
  std::string raw_file, prepare_out;
  std::size_t min_target = 5;
  std::vector<std::string> labels{"view", "cart", "buy"};
  prepare->add_option("--input", raw_file, "user,item,behavior[,timestamp] file")->required();
  prepare->add_option("--out", prepare_out, "Output directory")->required();
  prepare->add_option("--min-target", min_target, "Target interactions per user and item")
      ->capture_default_str();
  prepare->add_option("--behaviors", labels, "Behavior labels, target last")
      ->delimiter(',')
      ->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a planted multi-behavior dataset");
  SynthConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--users", synth_cfg.num_users)->capture_default_str();
  synth->add_option("--items", synth_cfg.num_items)->capture_default_str();
  synth->add_option("--latent-dim", synth_cfg.latent_dim)->capture_default_str();
  synth->add_option("--spread", synth_cfg.criterion_spread)->capture_default_str();
  synth->add_option("--densities", synth_cfg.densities)->delimiter(',')->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed)->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train and write checkpoint, logs and test report");
  std::string train_data, train_config, train_out;
  train->add_option("--dataset", train_data)->required();
  train->add_option("--config", train_config, "key = value config or a previous manifest");
  train->add_option("--out", train_out)->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "HR@N and NDCG@N of a checkpoint on the test split");
  std::string eval_ckpt, eval_data, eval_report;
  std::vector<std::size_t> cutoffs = kDefaultCutoffs;
  evaluate->add_option("--checkpoint", eval_ckpt)->required();
  evaluate->add_option("--dataset", eval_data)->required();
  evaluate->add_option("--cutoffs", cutoffs)->delimiter(',')->capture_default_str();
  evaluate->add_option("--report", eval_report, "Write <stem>.txt and <stem>.kv");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train one ablation variant");
  std::string ablate_data, ablate_config, ablate_out, variant_name;
  ablate->add_option("--dataset", ablate_data)->required();
  ablate->add_option("--variant", variant_name, "O, H, U, I, V or C")->required();
  ablate->add_option("--config", ablate_config);
  ablate->add_option("--out", ablate_out)->required();

  // verify-bound
  auto* verify = app.add_subcommand("verify-bound", "Check the CML upper bound on random instances");
  std::size_t instances = 200;
  std::uint64_t verify_seed = 7;
  verify->add_option("--instances", instances)->capture_default_str();
  verify->add_option("--seed", verify_seed)->capture_default_str();

  // dump-bounds
  auto* dump = app.add_subcommand("dump-bounds", "Print learned S and T for (user, item) pairs");
  std::string dump_ckpt;
  std::vector<Index> dump_users, dump_items;
  dump->add_option("--checkpoint", dump_ckpt)->required();
  dump->add_option("--users", dump_users)->delimiter(',')->required();
  dump->add_option("--items", dump_items)->delimiter(',')->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (isa == "scalar") {
      simd::set_isa(simd::Isa::Scalar);
    } else if (isa == "avx2") {
      if (!simd::avx2_kernels()) throw ConfigError("this build has no avx2 kernels");
      simd::set_isa(simd::Isa::Avx2);
    }

    if (*prepare) {
      cli::cmd_prepare(raw_file, prepare_out, min_target, labels, std::cout);
    } else if (*synth) {
      cli::cmd_synth(synth_cfg, synth_out, std::cout);
    } else if (*train) {
      cli::cmd_train(train_data, optional_path(train_config), train_out, std::cout);
    } else if (*evaluate) {
      cli::cmd_evaluate(eval_ckpt, eval_data, cutoffs, optional_path(eval_report), std::cout);
    } else if (*ablate) {
      cli::cmd_ablate(ablate_data, parse_variant(variant_name), optional_path(ablate_config),
                      ablate_out, std::cout);
    } else if (*verify) {
      if (!cli::cmd_verify_bound(instances, verify_seed, std::cout)) return kExitNumerical;
    } else if (*dump) {
      cli::cmd_dump_bounds(dump_ckpt, dump_users, dump_items, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
