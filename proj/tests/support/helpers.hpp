#pragma once

#include "oracles.hpp"

#include <nimp/nimp.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <unistd.h>
#include <string>
#include <vector>

namespace testing_support {

namespace fs = std::filesystem;

inline oracle::Counts to_counts(const nimp::JointHistogram& h) {
  oracle::Counts n(h.bins(), std::vector<double>(h.classes()));
  for (std::size_t t = 0; t < h.bins(); ++t)
    for (std::size_t c = 0; c < h.classes(); ++c) n[t][c] = double(h.count(t, c));
  return n;
}

inline void put_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_idx_images(const fs::path& path, const std::vector<std::uint8_t>& pixels, std::uint32_t n,
                             std::uint32_t rows = 28, std::uint32_t cols = 28, std::uint32_t magic = 0x803) {
  std::ofstream out(path, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, n);
  put_be32(out, rows);
  put_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

inline void write_idx_labels(const fs::path& path, const std::vector<std::uint8_t>& labels,
                             std::uint32_t magic = 0x801) {
  std::ofstream out(path, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

inline void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Scratch directory removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("nimp_" + tag + "_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

/// Separable 28x28 digit-like data: class c lights a 4x4 patch at a
/// class-specific position plus seeded noise.
struct SyntheticIdx {
  fs::path train_images, train_labels, test_images, test_labels;
};

inline void synth_digits(std::uint64_t seed, std::uint32_t n, std::vector<std::uint8_t>& pixels,
                         std::vector<std::uint8_t>& labels) {
  nimp::Rng rng(seed);
  pixels.assign(std::size_t{n} * 784, 0);
  labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::uint8_t>(rng.below(10));
    labels[i] = c;
    auto* img = pixels.data() + std::size_t{i} * 784;
    for (int k = 0; k < 784; ++k) img[k] = static_cast<std::uint8_t>(rng.below(40));
    const int r0 = 2 + 6 * (c / 4), c0 = 2 + 6 * (c % 4);
    for (int r = 0; r < 4; ++r)
      for (int q = 0; q < 4; ++q) img[(r0 + r) * 28 + c0 + q] = static_cast<std::uint8_t>(180 + rng.below(76));
  }
}

inline SyntheticIdx write_synthetic_idx(const fs::path& dir, std::uint32_t n_train = 600,
                                        std::uint32_t n_test = 200, std::uint64_t seed = 11) {
  SyntheticIdx s{dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", dir / "t10k-images-idx3-ubyte",
                 dir / "t10k-labels-idx1-ubyte"};
  std::vector<std::uint8_t> px, lb;
  synth_digits(seed, n_train, px, lb);
  write_idx_images(s.train_images, px, n_train);
  write_idx_labels(s.train_labels, lb);
  synth_digits(seed + 1, n_test, px, lb);
  write_idx_images(s.test_images, px, n_test);
  write_idx_labels(s.test_labels, lb);
  return s;
}

/// MNIST directory if all four IDX files are present. NIMP_MNIST_DIR in the
/// environment takes precedence over the build-time default.
inline std::optional<fs::path> mnist_dir() {
  fs::path dir;
  if (const char* env = std::getenv("NIMP_MNIST_DIR")) dir = env;
#ifdef NIMP_TEST_MNIST_DIR
  if (dir.empty()) dir = NIMP_TEST_MNIST_DIR;
#endif
  if (dir.empty()) return std::nullopt;
  for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                        "t10k-labels-idx1-ubyte"})
    if (!fs::is_regular_file(dir / f)) return std::nullopt;
  return dir;
}

/// Random model with small layers and non-trivial biases.
inline nimp::MlpModel random_model(std::vector<std::size_t> sizes, nimp::Activation act, std::uint64_t seed,
                                   bool batch_norm = false) {
  auto model = nimp::MlpModel::initialize(sizes, act, seed, batch_norm);
  nimp::Rng rng(seed ^ 0xabcdefULL);
  for (auto& layer : model.layers) {
    for (Eigen::Index k = 0; k < layer.bias.size(); ++k) layer.bias[k] = rng.uniform(-0.5, 0.5);
    if (layer.batch_norm) {
      for (Eigen::Index k = 0; k < layer.bias.size(); ++k) {
        layer.batch_norm->gamma[k] = rng.uniform(0.5, 1.5);
        layer.batch_norm->beta[k] = rng.uniform(-0.3, 0.3);
        layer.batch_norm->running_mean[k] = rng.uniform(-0.2, 0.2);
        layer.batch_norm->running_var[k] = rng.uniform(0.5, 1.5);
      }
    }
  }
  return model;
}

inline nimp::Matrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = 0.0,
                                 double hi = 1.0) {
  nimp::Rng rng(seed);
  nimp::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(lo, hi);
  return m;
}

inline nimp::Dataset dataset_from(const nimp::Matrix& x, std::vector<int> labels, int classes = 10) {
  nimp::Dataset d;
  d.features = x.cast<float>();
  d.labels = std::move(labels);
  d.num_classes = classes;
  return d;
}

}  // namespace testing_support
