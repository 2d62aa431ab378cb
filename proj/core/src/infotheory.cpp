#include "nimp/infotheory.hpp"

#include "nimp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nimp {
namespace {

double clamp_residue(double v) { return (v < 0.0 && v > -kClampTolerance) ? 0.0 : v; }

void check_distribution(std::span<const double> p) {
  double sum = 0.0;
  for (const double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ArgumentError("distribution has a negative or non-finite entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ArgumentError("distribution sums to " + std::to_string(sum));
}

std::uint64_t full_mask(std::size_t classes) {
  return classes >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << classes) - 1;
}

// D(P_{T|Y in A} || P_T) from counts; 0 when A carries no samples.
double subset_kl(const JointHistogram& h, std::uint64_t mask) {
  std::vector<std::uint64_t> in(h.bins(), 0);
  std::uint64_t n_in = 0;
  for (std::size_t c = 0; c < h.classes(); ++c) {
    if (!((mask >> c) & 1)) continue;
    for (std::size_t t = 0; t < h.bins(); ++t) in[t] += h.count(t, c);
  }
  for (const auto v : in) n_in += v;
  if (n_in == 0) return 0.0;
  const double n = double(h.total());
  double d = 0.0;
  for (std::size_t t = 0; t < h.bins(); ++t) {
    if (in[t] == 0) continue;
    d += double(in[t]) / double(n_in) * std::log2(double(in[t]) * n / (double(n_in) * double(h.bin_total(t))));
  }
  return clamp_residue(d);
}

// JSD of the split (A, complement) through the divergence definition.
double subset_jsd(const JointHistogram& h, std::uint64_t mask) {
  std::vector<double> in(h.bins(), 0.0), out(h.bins(), 0.0);
  double n_in = 0.0, n_out = 0.0;
  for (std::size_t c = 0; c < h.classes(); ++c) {
    const bool member = (mask >> c) & 1;
    for (std::size_t t = 0; t < h.bins(); ++t) {
      const double k = double(h.count(t, c));
      (member ? in[t] : out[t]) += k;
      (member ? n_in : n_out) += k;
    }
  }
  if (n_in == 0.0 || n_out == 0.0) return 0.0;
  for (auto& v : in) v /= n_in;
  for (auto& v : out) v /= n_out;
  return js_divergence(n_in / double(h.total()), in, out);
}

}  // namespace

double entropy(std::span<const double> distribution) {
  check_distribution(distribution);
  double h = 0.0;
  for (const double p : distribution)
    if (p > 0.0) h -= p * std::log2(p);
  return clamp_residue(h);
}

double entropy(const JointHistogram& h) {
  const double n = double(h.total());
  if (n == 0.0) throw ConsistencyError("histogram has no samples");
  double s = 0.0;
  for (std::size_t t = 0; t < h.bins(); ++t) {
    const double k = double(h.bin_total(t));
    if (k > 0.0) s -= k / n * std::log2(k / n);
  }
  return clamp_residue(s);
}

double mutual_information(const JointHistogram& h) {
  const double n = double(h.total());
  if (n == 0.0) throw ConsistencyError("histogram has no samples");
  std::vector<double> class_totals(h.classes());
  for (std::size_t c = 0; c < h.classes(); ++c) class_totals[c] = double(h.class_total(c));
  double mi = 0.0;
  for (std::size_t t = 0; t < h.bins(); ++t) {
    const double nt = double(h.bin_total(t));
    for (std::size_t c = 0; c < h.classes(); ++c) {
      const double k = double(h.count(t, c));
      if (k > 0.0) mi += k / n * std::log2(k * n / (nt * class_totals[c]));
    }
  }
  return clamp_residue(mi);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ArgumentError("distributions live on different alphabets");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log2(p[i] / q[i]);
  }
  return clamp_residue(d);
}

KlSelectivity kl_selectivity(const JointHistogram& h) {
  const double n = double(h.total());
  if (n == 0.0) throw ConsistencyError("histogram has no samples");
  KlSelectivity out;
  out.specific_information.assign(h.classes(), 0.0);
  bool found = false;
  for (std::size_t c = 0; c < h.classes(); ++c) {
    const double nc = double(h.class_total(c));
    if (nc == 0.0) continue;
    double d = 0.0;
    for (std::size_t t = 0; t < h.bins(); ++t) {
      const double k = double(h.count(t, c));
      if (k > 0.0) d += k / nc * std::log2(k * n / (nc * double(h.bin_total(t))));
    }
    d = clamp_residue(d);
    out.specific_information[c] = d;
    if (!found || d > out.value + kTieTolerance) {
      out.value = d;
      out.argmax = c;
      found = true;
    }
  }
  return out;
}

double js_divergence(double pi, std::span<const double> p1, std::span<const double> p2) {
  if (!(pi >= 0.0 && pi <= 1.0)) throw ArgumentError("JS weight must lie in [0, 1]");
  if (p1.size() != p2.size()) throw ArgumentError("distributions live on different alphabets");
  check_distribution(p1);
  check_distribution(p2);
  std::vector<double> mix(p1.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = pi * p1[i] + (1.0 - pi) * p2[i];
  double d = 0.0;
  if (pi > 0.0) d += pi * kl_divergence(p1, mix);
  if (pi < 1.0) d += (1.0 - pi) * kl_divergence(p2, mix);
  return clamp_residue(d);
}

SubsetSeparation js_subset_separation(const JointHistogram& h) {
  if (h.classes() > kMaxSubsetClasses)
    throw CapabilityError("JS subset separation enumerates 2^C subsets; C = " +
                          std::to_string(h.classes()) + " exceeds " +
                          std::to_string(kMaxSubsetClasses) + ", use labeled_mi instead");
  SubsetSeparation best;
  const std::uint64_t full = full_mask(h.classes());
  bool found = false;
  for (std::uint64_t mask = 1; mask < full; mask += 2) {
    const double v = subset_jsd(h, mask);
    if (!found || v > best.value + kTieTolerance) {
      best.value = v;
      best.argmax_mask = static_cast<std::uint32_t>(mask);
      found = true;
    }
  }
  return best;
}

JointHistogram collapse_to_indicator(const JointHistogram& h, std::uint64_t mask) {
  if (h.classes() > 64) throw CapabilityError("class masks support at most 64 classes");
  JointHistogram out(h.bins(), 2);
  for (std::size_t t = 0; t < h.bins(); ++t)
    for (std::size_t c = 0; c < h.classes(); ++c)
      if (const auto k = h.count(t, c); k > 0) out.add(t, (mask >> c) & 1, k);
  return out;
}

LabeledMi labeled_mi(const JointHistogram& h) {
  if (h.total() == 0) throw ConsistencyError("histogram has no samples");
  LabeledMi best;
  bool found = false;
  for (std::size_t c = 0; c < h.classes(); ++c) {
    if (h.class_total(c) == 0) continue;
    const double v = mutual_information(collapse_to_indicator(h, std::uint64_t{1} << c));
    if (!found || v > best.value + kTieTolerance) {
      best.value = v;
      best.argmax = c;
      found = true;
    }
  }
  return best;
}

NeuronMeasures measure_all(const JointHistogram& h, bool compute_js) {
  NeuronMeasures m;
  m.entropy = entropy(h);
  m.mutual_information = mutual_information(h);
  auto kl = kl_selectivity(h);
  m.kl_selectivity = kl.value;
  m.kl_argmax = kl.argmax;
  m.specific_information = std::move(kl.specific_information);
  if (compute_js) {
    const auto js = js_subset_separation(h);
    m.js_separation = js.value;
    m.js_argmax_mask = js.argmax_mask;
  }
  const auto lmi = labeled_mi(h);
  m.labeled_mi = lmi.value;
  m.labeled_mi_argmax = lmi.argmax;
  return m;
}

bool LemmaReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const LemmaCheck& c) { return c.passed; });
}

LemmaReport lemma_oracles(const JointHistogram& h, const LemmaOptions& options) {
  if (h.classes() > kMaxLemmaClasses)
    throw ArgumentError("lemma checks enumerate class subsets; C must be <= " +
                        std::to_string(kMaxLemmaClasses));
  const double ent = entropy(h);
  const double mi = mutual_information(h);
  double kl = kl_selectivity(h).value;
  if (options.fault_negate_kl) kl = -kl;
  const double js = js_subset_separation(h).value;
  const double lmi = labeled_mi(h).value;
  const std::uint64_t full = full_mask(h.classes());

  LemmaReport report;
  auto add = [&](std::string name, double slack, bool passed) {
    report.checks.push_back({std::move(name), passed, slack});
  };

  double subset_max = 0.0;
  for (std::uint64_t mask = 1; mask <= full; ++mask) subset_max = std::max(subset_max, subset_kl(h, mask));
  const double kld_gap = std::abs(subset_max - kl);
  add("KLDmax", -kld_gap, kld_gap <= options.identity_tolerance);

  add("KLDmaxvsMI", kl - mi, kl - mi >= -options.order_tolerance);
  const bool kl_zero = std::abs(kl) <= options.identity_tolerance;
  const bool mi_zero = mi <= options.identity_tolerance;
  add("KLDmaxvsMI.zero_iff", kl_zero == mi_zero ? 0.0 : -std::max(std::abs(kl), mi), kl_zero == mi_zero);

  double jsd_gap = 0.0;
  for (std::uint64_t mask = 1; mask < full; ++mask)
    jsd_gap = std::max(jsd_gap, std::abs(subset_jsd(h, mask) -
                                         mutual_information(collapse_to_indicator(h, mask))));
  add("JSDvsMI", -jsd_gap, jsd_gap <= options.identity_tolerance);

  add("OrderingChain.H>=I", ent - mi, ent - mi >= -options.order_tolerance);
  add("OrderingChain.I>=JS", mi - js, mi - js >= -options.order_tolerance);
  add("OrderingChain.JS>=LabeledMI", js - lmi, js - lmi >= -options.order_tolerance);
  return report;
}

}  // namespace nimp
