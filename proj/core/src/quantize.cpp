#include "nimp/quantize.hpp"

#include "nimp/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace nimp {

Bin quantize_value(double value, const QuantizerSpec& spec, std::optional<double> neuron_max) {
  if (spec.bins < 2) throw ArgumentError("a quantizer needs at least two bins");
  if (std::isnan(value)) throw DomainError("cannot quantize NaN");
  const auto last = static_cast<Bin>(spec.bins - 1);
  switch (spec.activation) {
    case Activation::sigmoid: {
      if (value < 0.0 || value > 1.0)
        throw DomainError("sigmoid output " + std::to_string(value) + " outside [0, 1]");
      const auto bin = static_cast<Bin>(std::floor(value * double(spec.bins)));
      return std::min(bin, last);
    }
    case Activation::relu: {
      if (value < 0.0) throw DomainError("negative ReLU output " + std::to_string(value));
      if (value == 0.0) return 0;
      if (spec.bins == 2) return 1;
      if (!neuron_max) throw ArgumentError("ReLU quantization with more than two bins needs the neuron maximum");
      if (*neuron_max <= 0.0) return last;
      const double width = *neuron_max / double(spec.bins - 1);
      const double cell = std::ceil(value / width);  // (0, w] -> 1, (w, 2w] -> 2, ...
      return cell >= double(last) ? last : static_cast<Bin>(std::max(cell, 1.0));
    }
    case Activation::linear: break;
  }
  throw ArgumentError("no quantizer for linear activations");
}

std::vector<Bin> quantize(std::span<const double> values, const QuantizerSpec& spec,
                          std::optional<double> neuron_max) {
  if (spec.needs_maximum() && !neuron_max)
    throw ArgumentError("ReLU quantization with more than two bins needs the neuron maximum");
  std::vector<Bin> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = quantize_value(values[i], spec, neuron_max);
  return out;
}

JointHistogram::JointHistogram(std::size_t bins, std::size_t classes)
    : bins_(bins), classes_(classes), counts_(bins * classes, 0) {
  if (bins == 0 || classes == 0) throw ArgumentError("histogram needs at least one bin and one class");
}

JointHistogram JointHistogram::from_counts(const std::vector<std::vector<std::uint64_t>>& counts) {
  if (counts.empty() || counts.front().empty()) throw ConsistencyError("empty count table");
  JointHistogram h(counts.size(), counts.front().size());
  for (std::size_t t = 0; t < counts.size(); ++t) {
    if (counts[t].size() != h.classes_) throw ConsistencyError("ragged count table");
    for (std::size_t c = 0; c < h.classes_; ++c) h.add(t, c, counts[t][c]);
  }
  if (h.total_ == 0) throw ConsistencyError("histogram has no samples");
  return h;
}

std::uint64_t JointHistogram::bin_total(std::size_t bin) const {
  std::uint64_t s = 0;
  for (std::size_t c = 0; c < classes_; ++c) s += count(bin, c);
  return s;
}

std::uint64_t JointHistogram::class_total(std::size_t cls) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < bins_; ++t) s += count(t, cls);
  return s;
}

void JointHistogram::add(std::size_t bin, std::size_t cls, std::uint64_t amount) {
  if (bin >= bins_ || cls >= classes_) throw ConsistencyError("histogram cell out of range");
  counts_[bin * classes_ + cls] += amount;
  total_ += amount;
}

JointHistogram build_joint(std::span<const Bin> quantized, std::span<const int> labels,
                           std::size_t bins, std::size_t classes) {
  if (quantized.size() != labels.size())
    throw ConsistencyError("quantized outputs (" + std::to_string(quantized.size()) +
                           ") and labels (" + std::to_string(labels.size()) + ") differ in length");
  if (quantized.empty()) throw ConsistencyError("cannot build a histogram from zero samples");
  JointHistogram h(bins, classes);
  for (std::size_t i = 0; i < quantized.size(); ++i) {
    if (quantized[i] >= bins) throw ConsistencyError("bin index " + std::to_string(quantized[i]) + " out of range");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw ConsistencyError("label " + std::to_string(labels[i]) + " out of range");
    h.add(quantized[i], static_cast<std::size_t>(labels[i]));
  }
  return h;
}

Marginals marginals(const JointHistogram& h) {
  if (h.total() == 0) throw ConsistencyError("histogram has no samples");
  const double n = double(h.total());
  Marginals m;
  m.p_t.resize(h.bins());
  m.p_y.resize(h.classes());
  m.conditional.assign(h.classes(), std::vector<double>(h.bins(), 0.0));
  m.class_present.assign(h.classes(), false);
  for (std::size_t t = 0; t < h.bins(); ++t) m.p_t[t] = double(h.bin_total(t)) / n;
  for (std::size_t c = 0; c < h.classes(); ++c) {
    const auto nc = h.class_total(c);
    m.p_y[c] = double(nc) / n;
    if (nc == 0) continue;
    m.class_present[c] = true;
    for (std::size_t t = 0; t < h.bins(); ++t) m.conditional[c][t] = double(h.count(t, c)) / double(nc);
  }
  return m;
}

std::vector<double> neuron_maxima(const ActivationMatrix& activations) {
  std::vector<double> out(static_cast<std::size_t>(activations.values.cols()), 0.0);
  if (activations.values.rows() == 0) return out;
  const RowVector max = activations.values.colwise().maxCoeff();
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = max(static_cast<Eigen::Index>(j));
  return out;
}

std::vector<JointHistogram> layer_histograms(const ActivationMatrix& activations,
                                             std::span<const int> labels,
                                             const QuantizerSpec& spec, std::size_t classes) {
  const auto neurons = static_cast<std::size_t>(activations.values.cols());
  if (spec.needs_maximum() && spec.per_neuron_max.size() != neurons)
    throw ArgumentError("need one maximum per neuron for multi-bin ReLU quantization");
  if (static_cast<std::size_t>(activations.values.rows()) != labels.size())
    throw ConsistencyError("activation rows and labels differ");
  std::vector<JointHistogram> out;
  out.reserve(neurons);
  std::vector<Bin> bins(labels.size());
  for (std::size_t j = 0; j < neurons; ++j) {
    const std::optional<double> max =
        spec.needs_maximum() ? std::optional<double>(spec.per_neuron_max[j]) : std::nullopt;
    const auto column = activations.values.col(static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < bins.size(); ++i)
      bins[i] = quantize_value(column(static_cast<Eigen::Index>(i)), spec, max);
    out.push_back(build_joint(bins, labels, spec.bins, classes));
  }
  return out;
}

void write_histogram_csv_header(std::ostream& out) { out << "layer,neuron,bin,class,count\n"; }

void write_histogram_csv(std::ostream& out, std::size_t layer, std::size_t neuron,
                         const JointHistogram& h) {
  for (std::size_t t = 0; t < h.bins(); ++t)
    for (std::size_t c = 0; c < h.classes(); ++c)
      out << layer << ',' << neuron << ',' << t << ',' << c << ',' << h.count(t, c) << '\n';
}

}  // namespace nimp
