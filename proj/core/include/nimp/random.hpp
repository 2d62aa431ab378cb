#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace nimp {

/// Derives an independent seed for a named sub-stream of `base`.
/// Every source of randomness (init, batch order, dropout masks, random
/// ablation orders, splits) draws from its own stream so that changing one
/// does not perturb the others.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index);

/// Seeded generator with platform-independent sampling helpers.
/// The standard distributions are implementation-defined, so they are not
/// used anywhere results must be bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound), unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nimp
