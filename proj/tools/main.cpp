// nimp: train, measure and ablate small MLPs from a JSON experiment config.

#include "nimp/error.hpp"
#include "nimp/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kBadArguments = 2, kBadData = 3, kFailure = 4 };

struct Common {
  std::string config;
  std::size_t workers = 0;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--workers", c.workers, "Concurrent replicates (overrides config)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Output directory (overrides config)");
}

nimp::ExperimentConfig resolve(const Common& c) {
  auto config = nimp::load_config(c.config);
  if (c.workers) config.workers = c.workers;
  if (!c.out.empty()) config.output_dir = c.out;
  return config;
}

std::vector<std::filesystem::path> checkpoints_for(const nimp::ExperimentConfig& config,
                                                   const std::vector<std::string>& given) {
  if (given.empty()) return nimp::default_checkpoints(config);
  return {given.begin(), given.end()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-theoretic neuron importance and cumulative ablation"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> checkpoints;
  bool dump_histograms = false;
  nimp::VerifyOptions verify;

  auto* train = app.add_subcommand("train", "Train every replicate and write checkpoints");
  add_common(train, common);

  auto* measure = app.add_subcommand("measure", "Per-neuron measures and pooled layer summaries");
  add_common(measure, common);
  measure->add_option("--checkpoint", checkpoints, "Checkpoint file (repeatable; default: trained replicates)");
  measure->add_flag("--dump-histograms", dump_histograms, "Also write the joint histograms");

  auto* ablate = app.add_subcommand("ablate", "Cumulative ablation curves for every configured plan");
  add_common(ablate, common);
  ablate->add_option("--checkpoint", checkpoints, "Checkpoint file (repeatable; default: trained replicates)");

  auto* check = app.add_subcommand("verify", "Property suite on synthetic histograms and small networks");
  check->add_option("--histograms", verify.histograms, "Random histograms to check");
  check->add_option("--networks", verify.networks, "Random networks to gradient-check");
  check->add_option("--seed", verify.seed, "Seed of the synthetic inputs");
  check->add_flag("--inject-kl-fault", verify.fault_negate_kl)->group("");

  auto* report = app.add_subcommand("report", "Merge curve CSVs into one table");
  add_common(report, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) return nimp::cmd_verify(verify, std::cout).passed ? kOk : kVerifyFailed;

    const auto config = resolve(common);
    if (*train) {
      const auto results = nimp::cmd_train(config, std::cout);
      for (const auto& r : results)
        if (r.status != "ok") std::cerr << "replicate " << r.replicate << ' ' << r.status << '\n';
    } else if (*measure) {
      nimp::cmd_measure(config, checkpoints_for(config, checkpoints), std::cout, dump_histograms);
    } else if (*ablate) {
      nimp::cmd_ablate(config, checkpoints_for(config, checkpoints), std::cout);
    } else if (*report) {
      const auto path = nimp::cmd_report(config, std::cout);
      std::cout << "wrote " << path.string() << '\n';
    }
  } catch (const nimp::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadArguments;
  } catch (const nimp::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadData;
  } catch (const nimp::ConsistencyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
