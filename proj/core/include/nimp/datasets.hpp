#pragma once

#include "nimp/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace nimp {

enum class SplitTag { train, validation, test };

std::string_view to_string(SplitTag tag);

/// Feature matrix (one row per sample, values in [0, 1]) plus class labels.
struct Dataset {
  FeatureMatrix features;
  Labels labels;
  int num_classes = 10;
  SplitTag split_tag = SplitTag::train;

  std::size_t size() const { return labels.size(); }
  std::size_t dimension() const { return static_cast<std::size_t>(features.cols()); }

  /// Rows `begin..begin+count` widened to double.
  Matrix rows(std::size_t begin, std::size_t count) const;

  /// Copies the selected rows (in the given order) into a new dataset.
  Dataset subset(std::span<const std::size_t> indices, SplitTag tag) const;

  /// Number of samples per class.
  std::vector<std::size_t> class_counts() const;

  /// Throws ConsistencyError if labels/rows disagree or a label is out of range.
  void validate() const;
};

struct SplitSpec {
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Loads an IDX image/label file pair (MNIST, FashionMNIST). Pixels are
/// divided by 255.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Loads one or more CIFAR-10 binary batches (1 label byte + 3072 pixel bytes
/// per record). Pixels are divided by 255.
Dataset load_cifar10(std::span<const std::filesystem::path> batch_paths);

/// Uniform random partition of `0..n-1`; the validation part has
/// round(fraction * n) entries. Both parts are returned in ascending order.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

/// Splits a training set into (train, validation).
std::pair<Dataset, Dataset> split(const Dataset& train, const SplitSpec& spec);

}  // namespace nimp
