#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace nimp;
using namespace testing_support;

namespace {

// Values obtained by evaluating the defining sums independently in Python.
constexpr double kH_quarter = 0.8112781244591328;      // H([0.25, 0.75])
constexpr double kMI_40_10 = 0.2780719051126377;       // counts [[40,10],[10,40]]
constexpr double kLog2Ten = 3.321928094887362;
constexpr double kH2_tenth = 0.4689955935892812;       // binary entropy of 0.1
constexpr double kKL_rest = 0.15200309344505006;       // D(P_{T|Y=c} || P_T), c != 0, one-vs-rest

JointHistogram one_vs_rest() {
  std::vector<std::vector<std::uint64_t>> c(2, std::vector<std::uint64_t>(10, 0));
  c[1][0] = 100;
  for (int k = 1; k < 10; ++k) c[0][k] = 100;
  return JointHistogram::from_counts(c);
}

JointHistogram independent(std::size_t bins, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint64_t> a(bins), b(classes);
  for (auto& v : a) v = 1 + rng.below(9);
  for (auto& v : b) v = 1 + rng.below(9);
  std::vector<std::vector<std::uint64_t>> c(bins, std::vector<std::uint64_t>(classes));
  for (std::size_t t = 0; t < bins; ++t)
    for (std::size_t k = 0; k < classes; ++k) c[t][k] = a[t] * b[k];
  return JointHistogram::from_counts(c);
}

// Test-side generator, independent of the library's random_histogram.
JointHistogram sampled(std::uint64_t seed, std::size_t bins, std::size_t classes) {
  Rng rng(seed * 7919 + 1);
  std::vector<std::vector<std::uint64_t>> c(bins, std::vector<std::uint64_t>(classes));
  const double sparsity = rng.uniform(0.0, 0.7);
  std::uint64_t total = 0;
  for (auto& row : c)
    for (auto& v : row) {
      v = rng.uniform() < sparsity ? 0 : rng.below(200);
      total += v;
    }
  if (total == 0) c[0][0] = 1;
  return JointHistogram::from_counts(c);
}

}  // namespace

TEST(Entropy, Examples) {
  const std::vector<double> half{0.5, 0.5}, det{1.0, 0.0}, q{0.25, 0.75};
  EXPECT_DOUBLE_EQ(entropy(half), 1.0);
  EXPECT_EQ(entropy(det), 0.0);
  EXPECT_NEAR(entropy(q), kH_quarter, 1e-12);
}

TEST(Entropy, RejectsNonDistributions) {
  const std::vector<double> a{0.5, 0.6}, b{1.2, -0.2}, c{};
  EXPECT_THROW(entropy(a), ArgumentError);
  EXPECT_THROW(entropy(b), ArgumentError);
  EXPECT_THROW(entropy(c), ArgumentError);
}

TEST(MutualInformation, Examples) {
  EXPECT_EQ(mutual_information(JointHistogram::from_counts({{25, 25}, {25, 25}})), 0.0);
  EXPECT_NEAR(mutual_information(JointHistogram::from_counts({{50, 0}, {0, 50}})), 1.0, 1e-15);
  EXPECT_NEAR(mutual_information(JointHistogram::from_counts({{40, 10}, {10, 40}})), kMI_40_10, 1e-12);
}

TEST(MutualInformation, MatchesBruteForceOracle) {
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto h = sampled(s, 2 + s % 7, 2 + s % 11);
    EXPECT_NEAR(mutual_information(h), oracle::mutual_information(to_counts(h)), 1e-12);
    EXPECT_NEAR(entropy(h), oracle::entropy(oracle::p_t(to_counts(h))), 1e-12);
  }
}

TEST(KlSelectivity, IndependentIsZero) {
  const auto r = kl_selectivity(independent(3, 5, 1));
  EXPECT_EQ(r.value, 0.0);
  for (double d : r.specific_information) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(r.argmax, 0u);
}

TEST(KlSelectivity, OneVsRest) {
  const auto r = kl_selectivity(one_vs_rest());
  EXPECT_NEAR(r.value, kLog2Ten, 1e-9);
  EXPECT_EQ(r.argmax, 0u);
  for (int c = 1; c < 10; ++c) EXPECT_NEAR(r.specific_information[c], kKL_rest, 1e-12);
}

TEST(KlSelectivity, SymmetricTieGoesToClassZero) {
  const auto r = kl_selectivity(JointHistogram::from_counts({{40, 10}, {10, 40}}));
  EXPECT_NEAR(r.specific_information[0], r.specific_information[1], 1e-15);
  EXPECT_EQ(r.argmax, 0u);
}

TEST(KlSelectivity, AbsentClassesSkipped) {
  const auto r = kl_selectivity(JointHistogram::from_counts({{5, 0, 1}, {1, 0, 5}}));
  EXPECT_EQ(r.specific_information[1], 0.0);
  EXPECT_NE(r.argmax, 1u);
}

TEST(KlSelectivity, MatchesBruteForceOracle) {
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto h = sampled(s, 2 + s % 5, 2 + s % 10);
    const auto n = to_counts(h);
    const auto r = kl_selectivity(h);
    EXPECT_NEAR(r.value, oracle::max_class_kl(n), 1e-12);
    for (std::size_t c = 0; c < h.classes(); ++c)
      if (h.class_total(c) > 0)
        EXPECT_NEAR(r.specific_information[c], oracle::kl(oracle::conditional(n, 1ull << c), oracle::p_t(n)), 1e-12);
  }
}

TEST(KlDivergence, InfiniteOutsideSupport) {
  const std::vector<double> p{0.5, 0.5}, q{1.0, 0.0};
  EXPECT_TRUE(std::isinf(kl_divergence(p, q)));
  EXPECT_EQ(kl_divergence(q, p), 1.0);
}

TEST(JsDivergence, Examples) {
  const std::vector<double> p{0.3, 0.7}, a{1, 0}, b{0, 1};
  EXPECT_EQ(js_divergence(0.4, p, p), 0.0);
  EXPECT_DOUBLE_EQ(js_divergence(0.5, a, b), 1.0);
}

TEST(JsDivergence, EqualsEntropyForm) {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const std::size_t k = 2 + rng.below(6);
    std::vector<double> p1(k), p2(k);
    double s1 = 0, s2 = 0;
    for (std::size_t j = 0; j < k; ++j) {
      p1[j] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
      p2[j] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
      s1 += p1[j];
      s2 += p2[j];
    }
    if (s1 == 0 || s2 == 0) continue;
    for (std::size_t j = 0; j < k; ++j) p1[j] /= s1, p2[j] /= s2;
    const double pi = rng.uniform();
    const double js = js_divergence(pi, p1, p2);
    EXPECT_NEAR(js, oracle::jsd_entropy_form(pi, p1, p2), 1e-12);
    EXPECT_GE(js, 0.0);
    EXPECT_LE(js, 1.0 + 1e-12);
  }
}

TEST(JsSubsetSeparation, Examples) {
  EXPECT_EQ(js_subset_separation(independent(2, 6, 3)).value, 0.0);
  const auto r = js_subset_separation(JointHistogram::from_counts({{50, 0}, {0, 50}}));
  EXPECT_NEAR(r.value, 1.0, 1e-15);
  EXPECT_EQ(r.argmax_mask, 1u);
}

TEST(JsSubsetSeparation, EqualsMaxCollapsedMi) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto h = sampled(s, 2 + s % 4, 2 + s % 9);
    const auto r = js_subset_separation(h);
    EXPECT_NEAR(r.value, oracle::max_subset_mi(to_counts(h)), 1e-12);
    EXPECT_EQ(r.argmax_mask & 1u, 1u);
    EXPECT_NEAR(mutual_information(collapse_to_indicator(h, r.argmax_mask)), r.value, 1e-12);
  }
}

TEST(JsSubsetSeparation, TooManyClassesIsCapabilityError) {
  JointHistogram h(2, 21);
  h.add(0, 0, 3);
  h.add(1, 20, 3);
  EXPECT_THROW(js_subset_separation(h), CapabilityError);
  EXPECT_NO_THROW(labeled_mi(h));
}

TEST(LabeledMi, Examples) {
  EXPECT_EQ(labeled_mi(independent(4, 3, 2)).value, 0.0);
  const auto r = labeled_mi(one_vs_rest());
  EXPECT_NEAR(r.value, kH2_tenth, 1e-12);
  EXPECT_EQ(r.argmax, 0u);
}

TEST(LabeledMi, MatchesOracleAndBoundedBySubsetSeparation) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto h = sampled(s + 1000, 2 + s % 4, 2 + s % 9);
    const double l = labeled_mi(h).value;
    EXPECT_NEAR(l, oracle::max_class_mi(to_counts(h)), 1e-12);
    EXPECT_LE(l, js_subset_separation(h).value + 1e-12);
  }
}

TEST(CollapseToIndicator, MovesMaskedClassesToColumnOne) {
  const auto h = JointHistogram::from_counts({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(collapse_to_indicator(h, 0b101), JointHistogram::from_counts({{2, 4}, {5, 10}}));
}

TEST(MeasureAll, Examples) {
  const auto ind = measure_all(independent(2, 4, 8), true);
  EXPECT_GT(ind.entropy, 0.0);
  EXPECT_EQ(ind.mutual_information, 0.0);
  EXPECT_EQ(ind.kl_selectivity, 0.0);
  EXPECT_EQ(*ind.js_separation, 0.0);
  EXPECT_EQ(ind.labeled_mi, 0.0);

  const auto p = measure_all(JointHistogram::from_counts({{50, 0}, {0, 50}}), true);
  EXPECT_NEAR(p.entropy, 1.0, 1e-15);
  EXPECT_NEAR(p.mutual_information, 1.0, 1e-15);
  EXPECT_NEAR(p.kl_selectivity, 1.0, 1e-15);
  EXPECT_NEAR(*p.js_separation, 1.0, 1e-15);
  EXPECT_NEAR(p.labeled_mi, 1.0, 1e-15);

  const auto no_js = measure_all(one_vs_rest(), false);
  EXPECT_FALSE(no_js.js_separation.has_value());
  EXPECT_FALSE(no_js.js_argmax_mask.has_value());
}

TEST(MeasureAll, XorPairCarriesInformationOnlyJointly) {
  // T1, T2 uniform bits, Y = T1 xor T2; 25 samples per (t1, t2).
  std::vector<Bin> t1, t2, pair;
  std::vector<int> y;
  for (Bin a = 0; a < 2; ++a)
    for (Bin b = 0; b < 2; ++b)
      for (int r = 0; r < 25; ++r) {
        t1.push_back(a);
        t2.push_back(b);
        pair.push_back(2 * a + b);
        y.push_back(static_cast<int>(a ^ b));
      }
  for (const auto* t : {&t1, &t2}) {
    const auto m = measure_all(build_joint(*t, y, 2, 2), true);
    EXPECT_LE(m.mutual_information, 1e-12);
    EXPECT_LE(m.kl_selectivity, 1e-12);
  }
  EXPECT_EQ(mutual_information(build_joint(pair, y, 4, 2)), 1.0);
}

TEST(MeasureAll, InvariantsOnRandomHistograms) {
  for (std::uint64_t s = 0; s < 300; ++s) {
    const std::size_t bins = 2 + s % 7, classes = 2 + s % 10;
    const auto h = sampled(s + 77, bins, classes);
    const auto m = measure_all(h, true);
    for (double v : {m.entropy, m.mutual_information, m.kl_selectivity, *m.js_separation, m.labeled_mi}) {
      EXPECT_GE(v, 0.0);
      EXPECT_TRUE(std::isfinite(v));
    }
    EXPECT_LE(m.entropy, std::log2(double(bins)) + 1e-12);
    EXPECT_LE(m.mutual_information, std::min(m.entropy, std::log2(double(classes))) + 1e-10);
    EXPECT_GE(m.mutual_information, *m.js_separation - 1e-10);
    EXPECT_GE(*m.js_separation, m.labeled_mi - 1e-10);
    EXPECT_GE(m.kl_selectivity, m.mutual_information - 1e-10);
  }
}

TEST(MeasureAll, ZeroEntropyNeuronHasNoInformation) {
  const auto m = measure_all(JointHistogram::from_counts({{0, 0, 0}, {3, 7, 1}}), true);
  EXPECT_EQ(m.entropy, 0.0);
  EXPECT_EQ(m.mutual_information, 0.0);
  EXPECT_EQ(m.kl_selectivity, 0.0);
  EXPECT_EQ(*m.js_separation, 0.0);
  EXPECT_EQ(m.labeled_mi, 0.0);
}

TEST(LemmaOracles, PassOnRandomHistograms) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto report = lemma_oracles(random_histogram(s, 2, 10));
    EXPECT_TRUE(report.all_passed()) << "seed " << s;
    for (const auto& c : report.checks) EXPECT_GE(c.slack, -1e-10) << c.name;
  }
}

TEST(LemmaOracles, IndependentJointIsTightAtZero) {
  const auto report = lemma_oracles(independent(4, 6, 9));
  EXPECT_TRUE(report.all_passed());
  for (const auto& c : report.checks)
    if (c.name != "OrderingChain.H>=I") EXPECT_NEAR(c.slack, 0.0, 1e-12) << c.name;
}

TEST(LemmaOracles, KlGapVanishesOnlyForEqualSpecificInformation) {
  // Symmetric two-class table: both classes carry the same specific
  // information, so its P_Y-weighted mean (the MI) equals the maximum.
  const auto sym = JointHistogram::from_counts({{40, 10}, {10, 40}});
  EXPECT_NEAR(kl_selectivity(sym).value, mutual_information(sym), 1e-15);
  EXPECT_TRUE(lemma_oracles(sym).all_passed());

  const auto h = JointHistogram::from_counts({{40, 10, 30}, {10, 40, 30}});
  EXPECT_GT(kl_selectivity(h).value - mutual_information(h), 0.01);
  const auto report = lemma_oracles(h);
  const auto it = std::find_if(report.checks.begin(), report.checks.end(),
                               [](const LemmaCheck& c) { return c.name == "KLDmaxvsMI"; });
  ASSERT_NE(it, report.checks.end());
  EXPECT_GT(it->slack, 0.0);
}

TEST(LemmaOracles, NegatedKlIsCaught) {
  LemmaOptions opts;
  opts.fault_negate_kl = true;
  const auto report = lemma_oracles(one_vs_rest(), opts);
  EXPECT_FALSE(report.all_passed());
  const bool named = std::any_of(report.checks.begin(), report.checks.end(),
                                 [](const LemmaCheck& c) { return !c.passed && c.name == "KLDmaxvsMI"; });
  EXPECT_TRUE(named);
}

TEST(LemmaOracles, RejectsTooManyClasses) {
  JointHistogram h(2, 13);
  h.add(0, 0);
  EXPECT_THROW(lemma_oracles(h), ArgumentError);
}
