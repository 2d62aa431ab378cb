#include "nimp/datasets.hpp"

#include "nimp/error.hpp"
#include "nimp/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace nimp {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarPixels = 3072;
constexpr std::size_t kCifarRecord = kCifarPixels + 1;
constexpr int kNumClasses = 10;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::validation: return "validation";
    case SplitTag::test: return "test";
  }
  return "unknown";
}

Matrix Dataset::rows(std::size_t begin, std::size_t count) const {
  return features.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count))
      .cast<double>();
}

Dataset Dataset::subset(std::span<const std::size_t> indices, SplitTag tag) const {
  Dataset out;
  out.num_classes = num_classes;
  out.split_tag = tag;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) =
        features.row(static_cast<Eigen::Index>(indices[r]));
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (const int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ConsistencyError("feature rows (" + std::to_string(features.rows()) +
                           ") and labels (" + std::to_string(labels.size()) + ") differ");
  for (const int y : labels)
    if (y < 0 || y >= num_classes)
      throw ConsistencyError("label " + std::to_string(y) + " outside [0, " +
                             std::to_string(num_classes) + ")");
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  if (images.size() < 16 || read_be32(images, 0) != kIdxImagesMagic)
    throw FormatError(images_path.string() + ": not an IDX image file");
  const std::size_t count = read_be32(images, 4);
  const std::size_t pixels = std::size_t{read_be32(images, 8)} * read_be32(images, 12);
  if (images.size() != 16 + count * pixels)
    throw FormatError(images_path.string() + ": expected " + std::to_string(16 + count * pixels) +
                      " bytes, found " + std::to_string(images.size()));

  const auto labels = read_file(labels_path);
  if (labels.size() < 8 || read_be32(labels, 0) != kIdxLabelsMagic)
    throw FormatError(labels_path.string() + ": not an IDX label file");
  const std::size_t label_count = read_be32(labels, 4);
  if (labels.size() != 8 + label_count)
    throw FormatError(labels_path.string() + ": truncated label file");
  if (label_count != count)
    throw ConsistencyError("image count " + std::to_string(count) + " != label count " +
                           std::to_string(label_count));

  Dataset out;
  out.num_classes = kNumClasses;
  out.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  float* dst = out.features.data();
  for (std::size_t i = 0; i < count * pixels; ++i)
    dst[i] = static_cast<float>(images[16 + i]) / 255.0f;
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) out.labels[i] = labels[8 + i];
  out.validate();
  return out;
}

Dataset load_cifar10(std::span<const std::filesystem::path> batch_paths) {
  std::vector<std::vector<unsigned char>> batches;
  std::size_t total = 0;
  for (const auto& path : batch_paths) {
    auto bytes = read_file(path);
    if (bytes.empty() || bytes.size() % kCifarRecord != 0)
      throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                        " is not a positive multiple of " + std::to_string(kCifarRecord));
    total += bytes.size() / kCifarRecord;
    batches.push_back(std::move(bytes));
  }

  Dataset out;
  out.num_classes = kNumClasses;
  out.features.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(kCifarPixels));
  out.labels.reserve(total);
  Eigen::Index row = 0;
  for (const auto& bytes : batches) {
    for (std::size_t offset = 0; offset < bytes.size(); offset += kCifarRecord, ++row) {
      const int label = bytes[offset];
      if (label >= kNumClasses)
        throw ConsistencyError("CIFAR-10 label byte " + std::to_string(label) + " >= 10");
      out.labels.push_back(label);
      for (std::size_t p = 0; p < kCifarPixels; ++p)
        out.features(row, static_cast<Eigen::Index>(p)) =
            static_cast<float>(bytes[offset + 1 + p]) / 255.0f;
    }
  }
  return out;
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  if (!(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0))
    throw ArgumentError("validation_fraction must lie in (0, 1), got " +
                        std::to_string(spec.validation_fraction));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(spec.seed, "split"));
  rng.shuffle(std::span<std::size_t>(order));

  const auto n_val = static_cast<std::size_t>(std::llround(spec.validation_fraction * double(n)));
  SplitIndices out;
  out.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& train, const SplitSpec& spec) {
  const auto idx = split_indices(train.size(), spec);
  return {train.subset(idx.train, SplitTag::train),
          train.subset(idx.validation, SplitTag::validation)};
}

}  // namespace nimp
