#pragma once

#include "nimp/quantize.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nimp {

/// All quantities are in bits. Tie-breaking for every argmax is "lowest
/// class index" (or smallest subset bitmask); values within kTieTolerance of
/// the running maximum count as ties.
inline constexpr double kTieTolerance = 1e-12;
/// Negative round-off residues above -kClampTolerance are reported as 0.
inline constexpr double kClampTolerance = 1e-12;
/// Largest class count for the exhaustive subset search.
inline constexpr std::size_t kMaxSubsetClasses = 20;

/// Shannon entropy of a distribution; throws ArgumentError unless entries
/// are >= 0 and sum to 1 within 1e-12.
double entropy(std::span<const double> distribution);

/// H(T) of the quantized neuron output.
double entropy(const JointHistogram& h);

/// I(T;Y) = H(T) - H(T|Y), evaluated from count ratios.
double mutual_information(const JointHistogram& h);

/// D(p || q). Infinite when p puts mass where q has none.
double kl_divergence(std::span<const double> p, std::span<const double> q);

struct KlSelectivity {
  double value = 0.0;
  std::size_t argmax = 0;
  /// D(P_{T|Y=y} || P_T) for every class; 0 for classes absent from the data.
  std::vector<double> specific_information;
};

/// max_y D(P_{T|Y=y} || P_T) over classes present in the histogram.
KlSelectivity kl_selectivity(const JointHistogram& h);

/// pi * D(P1||M) + (1 - pi) * D(P2||M) with M = pi * P1 + (1 - pi) * P2.
double js_divergence(double pi, std::span<const double> p1, std::span<const double> p2);

struct SubsetSeparation {
  double value = 0.0;
  std::uint32_t argmax_mask = 0;  ///< representative containing class 0
};

/// max over nonempty proper class subsets A of
/// JSD(P_Y(A); P_{T|Y in A}, P_{T|Y not in A}). Only subsets containing
/// class 0 are enumerated (the divergence is complement-symmetric).
/// Throws CapabilityError when C > kMaxSubsetClasses.
SubsetSeparation js_subset_separation(const JointHistogram& h);

struct LabeledMi {
  double value = 0.0;
  std::size_t argmax = 0;
};

/// max_y I(T; 1{Y = y}).
LabeledMi labeled_mi(const JointHistogram& h);

/// Histogram of (T, 1{Y in A}) with column 1 holding the classes in `mask`.
JointHistogram collapse_to_indicator(const JointHistogram& h, std::uint64_t mask);

struct NeuronMeasures {
  double entropy = 0.0;
  double mutual_information = 0.0;
  double kl_selectivity = 0.0;
  std::size_t kl_argmax = 0;
  std::vector<double> specific_information;
  std::optional<double> js_separation;
  std::optional<std::uint32_t> js_argmax_mask;
  double labeled_mi = 0.0;
  std::size_t labeled_mi_argmax = 0;
};

NeuronMeasures measure_all(const JointHistogram& h, bool compute_js);

/// Result of one property check; `slack` is the signed margin by which it
/// held (negative means violated beyond tolerance when passed == false).
struct LemmaCheck {
  std::string name;
  bool passed = true;
  double slack = 0.0;
};

struct LemmaReport {
  std::vector<LemmaCheck> checks;
  bool all_passed() const;
};

struct LemmaOptions {
  double order_tolerance = 1e-10;
  double identity_tolerance = 1e-12;
  /// Test hook: flips the sign of the KL selectivity fed to the checks.
  bool fault_negate_kl = false;
};

/// Verifies on one histogram (C <= 12):
///  - KLDmax: max over class subsets of D(P_{T|Y in A}||P_T) equals the
///    single-class maximum (exhaustive enumeration);
///  - KLDmaxvsMI: KL selectivity >= I(T;Y), and both vanish together;
///  - JSDvsMI: JSD of every subset split equals I(T; 1{Y in A});
///  - OrderingChain: H >= I >= max subset MI >= max labeled MI.
LemmaReport lemma_oracles(const JointHistogram& h, const LemmaOptions& options = {});

inline constexpr std::size_t kMaxLemmaClasses = 12;

}  // namespace nimp
