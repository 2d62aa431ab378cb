#pragma once

#include "nimp/ablation.hpp"
#include "nimp/datasets.hpp"
#include "nimp/nn.hpp"
#include "nimp/train.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nimp {

enum class DatasetKind { mnist, fashionmnist, cifar10 };

std::string_view to_string(DatasetKind kind);

struct DatasetConfig {
  DatasetKind kind = DatasetKind::mnist;
  // IDX datasets
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  // CIFAR-10
  std::vector<std::filesystem::path> train_batches;
  std::vector<std::filesystem::path> test_batches;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

/// Everything needed to reproduce one experiment cell. Stored as JSON; see
/// README for the schema. Unknown keys are rejected.
struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<std::size_t> architecture;
  Activation activation = Activation::relu;
  TrainConfig training;  ///< `seed` is ignored; replicate r uses seed + r
  double validation_fraction = 0.2;
  std::size_t quantizer_bins = 2;
  bool compute_js = true;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::vector<AblationPlan> plans;
  std::filesystem::path output_dir = "out";

  /// Throws ConfigError on inconsistent settings or missing dataset files.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses JSON text. Relative paths are kept as written.
ExperimentConfig parse_config(std::string_view json_text);
/// Parses a file; relative dataset and output paths resolve against its directory.
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

/// Seed of the random-ablation stream for a config.
std::uint64_t random_ablation_seed(const ExperimentConfig& config);

struct ExperimentData {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Loads the configured dataset and performs the seeded train/validation split.
ExperimentData load_experiment_data(const ExperimentConfig& config);

/// Validation-set activations -> quantized joint histograms -> measures, for
/// every hidden neuron. ReLU with more than two bins uses per-neuron maxima
/// of the same activations.
LayerMeasures measure_network(const MlpModel& model, const Dataset& validation, std::size_t bins,
                              bool compute_js);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);

struct Quartiles {
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

/// Linear-interpolation quantiles.
Quartiles summarize(std::vector<double> values);

// ---------------------------------------------------------------------------
// Subcommands. Each writes below config.output_dir and logs progress to `log`.
// ---------------------------------------------------------------------------

struct ReplicateTraining {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint;  ///< empty if training failed
  std::size_t best_epoch = 0;
  double test_accuracy = 0.0;
  std::string status = "ok";
  std::vector<EpochLog> history;
};

std::filesystem::path checkpoint_path(const ExperimentConfig& config, std::size_t replicate);
std::vector<std::filesystem::path> default_checkpoints(const ExperimentConfig& config);

/// Trains every replicate. A diverging replicate is reported in its status
/// without stopping the others.
std::vector<ReplicateTraining> cmd_train(const ExperimentConfig& config, std::ostream& log);

struct MeasureOutput {
  std::vector<LayerMeasures> measures;  ///< one per checkpoint
  /// Pooled per-layer summaries: summary[i - 1][measure name index].
  std::vector<std::vector<Quartiles>> summary;
};

MeasureOutput cmd_measure(const ExperimentConfig& config,
                          std::span<const std::filesystem::path> checkpoints, std::ostream& log,
                          bool dump_histograms = false);

std::vector<ExperimentCurves> cmd_ablate(const ExperimentConfig& config,
                                         std::span<const std::filesystem::path> checkpoints,
                                         std::ostream& log);

struct VerifyOptions {
  std::size_t histograms = 200;
  std::size_t classes = 10;
  std::size_t networks = 20;
  std::uint64_t seed = 2024;
  bool fault_negate_kl = false;  ///< test hook
};

struct VerifyResult {
  bool passed = true;
  std::vector<std::string> failures;  ///< check names that failed at least once
  double worst_gradient_error = 0.0;
};

/// Lemma checks on seeded random histograms plus gradient checks on random
/// small networks.
VerifyResult cmd_verify(const VerifyOptions& options, std::ostream& log);

/// Merges every curve CSV into output_dir/report.csv and prints a summary table.
std::filesystem::path cmd_report(const ExperimentConfig& config, std::ostream& out);

/// Random joint histogram for property checks: mixes dense, sparse and exactly
/// independent (product-form) count tables.
JointHistogram random_histogram(std::uint64_t seed, std::size_t bins, std::size_t classes);

/// Random network (<= 32 units per layer) with non-zero biases.
MlpModel random_network(std::uint64_t seed, Activation activation, bool batch_norm = false);

}  // namespace nimp
