#pragma once

#include "nimp/nn.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace nimp {

using Bin = std::uint32_t;

/// Maps real neuron outputs to the alphabet {0, ..., bins-1}.
///
/// Two bins: ReLU splits at 0 (exact zero -> 0, positive -> 1), sigmoid at
/// 0.5 (half-open, so 0.5 -> 1). More bins: sigmoid uses equal-width
/// half-open intervals of [0, 1]; ReLU keeps exact zero in bin 0 and splits
/// (0, neuron_max] into bins-1 equal right-closed intervals, clamping values
/// above neuron_max into the last bin.
struct QuantizerSpec {
  std::size_t bins = 2;
  Activation activation = Activation::relu;
  std::vector<double> per_neuron_max;  ///< ReLU with bins > 2 only

  bool needs_maximum() const { return activation == Activation::relu && bins > 2; }
};

Bin quantize_value(double value, const QuantizerSpec& spec, std::optional<double> neuron_max = {});

std::vector<Bin> quantize(std::span<const double> values, const QuantizerSpec& spec,
                          std::optional<double> neuron_max = {});

/// Empirical joint counts of (quantized output, class) over N samples.
class JointHistogram {
 public:
  JointHistogram(std::size_t bins, std::size_t classes);

  /// counts[t][c]; throws ConsistencyError on ragged rows or zero total.
  static JointHistogram from_counts(const std::vector<std::vector<std::uint64_t>>& counts);

  std::size_t bins() const { return bins_; }
  std::size_t classes() const { return classes_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t count(std::size_t bin, std::size_t cls) const { return counts_[bin * classes_ + cls]; }
  std::uint64_t bin_total(std::size_t bin) const;
  std::uint64_t class_total(std::size_t cls) const;

  void add(std::size_t bin, std::size_t cls, std::uint64_t amount = 1);

  /// True when N < 10 * C * |T|, i.e. the plug-in estimate is unreliable.
  bool undersampled() const { return total_ < 10 * classes_ * bins_; }

  friend bool operator==(const JointHistogram&, const JointHistogram&) = default;

 private:
  std::size_t bins_;
  std::size_t classes_;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Counts (bin, label) pairs. Throws ConsistencyError for length mismatch,
/// empty input, or out-of-range bins/labels.
JointHistogram build_joint(std::span<const Bin> quantized, std::span<const int> labels,
                           std::size_t bins, std::size_t classes);

/// Distributions derived from a histogram. conditional[c] is P_{T|Y=c};
/// for classes with zero count class_present[c] is false and the
/// conditional is left all-zero.
struct Marginals {
  std::vector<double> p_t;
  std::vector<double> p_y;
  std::vector<std::vector<double>> conditional;
  std::vector<bool> class_present;
};

Marginals marginals(const JointHistogram& h);

/// Per-neuron maxima over a layer's recorded outputs.
std::vector<double> neuron_maxima(const ActivationMatrix& activations);

/// One histogram per neuron of a layer. For ReLU with more than two bins the
/// spec's per_neuron_max must hold one entry per neuron.
std::vector<JointHistogram> layer_histograms(const ActivationMatrix& activations,
                                             std::span<const int> labels,
                                             const QuantizerSpec& spec, std::size_t classes);

/// Debug dump: rows "layer,neuron,bin,class,count".
void write_histogram_csv_header(std::ostream& out);
void write_histogram_csv(std::ostream& out, std::size_t layer, std::size_t neuron,
                         const JointHistogram& h);

}  // namespace nimp
