#pragma once

// Brute-force reference implementations written straight from the
// definitions in terms of the joint distribution P(t, c). They share no code
// with the library's measure implementations.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

using Counts = std::vector<std::vector<double>>;  // counts[t][c]

inline double log2_safe(double x) { return std::log(x) / std::log(2.0); }

inline double total(const Counts& n) {
  double s = 0;
  for (const auto& row : n)
    for (double v : row) s += v;
  return s;
}

inline std::vector<double> p_t(const Counts& n) {
  const double N = total(n);
  std::vector<double> p;
  for (const auto& row : n) {
    double s = 0;
    for (double v : row) s += v;
    p.push_back(s / N);
  }
  return p;
}

inline std::vector<double> p_y(const Counts& n) {
  const double N = total(n);
  std::vector<double> p(n[0].size(), 0.0);
  for (const auto& row : n)
    for (std::size_t c = 0; c < row.size(); ++c) p[c] += row[c] / N;
  return p;
}

inline double entropy(const std::vector<double>& p) {
  double h = 0;
  for (double v : p)
    if (v > 0) h -= v * log2_safe(v);
  return h;
}

// sum_{t,c} P(t,c) log2 P(t,c) / (P(t) P(c))
inline double mutual_information(const Counts& n) {
  const double N = total(n);
  const auto pt = p_t(n), py = p_y(n);
  double mi = 0;
  for (std::size_t t = 0; t < n.size(); ++t)
    for (std::size_t c = 0; c < n[t].size(); ++c) {
      const double p = n[t][c] / N;
      if (p > 0) mi += p * log2_safe(p / (pt[t] * py[c]));
    }
  return mi;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) d += p[i] * log2_safe(p[i] / q[i]);
  return d;
}

// P_{T | Y in mask}
inline std::vector<double> conditional(const Counts& n, std::uint64_t mask) {
  std::vector<double> p(n.size(), 0.0);
  double s = 0;
  for (std::size_t t = 0; t < n.size(); ++t)
    for (std::size_t c = 0; c < n[t].size(); ++c)
      if (mask >> c & 1) {
        p[t] += n[t][c];
        s += n[t][c];
      }
  for (double& v : p) v /= s;
  return p;
}

inline double class_mass(const Counts& n, std::uint64_t mask) {
  double s = 0;
  for (const auto& row : n)
    for (std::size_t c = 0; c < row.size(); ++c)
      if (mask >> c & 1) s += row[c];
  return s;
}

inline Counts collapse(const Counts& n, std::uint64_t mask) {
  Counts out(n.size(), std::vector<double>(2, 0.0));
  for (std::size_t t = 0; t < n.size(); ++t)
    for (std::size_t c = 0; c < n[t].size(); ++c) out[t][(mask >> c & 1) ? 1 : 0] += n[t][c];
  return out;
}

// Largest I(T; 1{Y in A}) over all nonempty proper subsets A.
inline double max_subset_mi(const Counts& n) {
  const std::size_t C = n[0].size();
  double best = 0;
  for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << C); ++mask) {
    const auto col = collapse(n, mask);
    if (class_mass(n, mask) == 0 || class_mass(n, ~mask & ((std::uint64_t{1} << C) - 1)) == 0) continue;
    best = std::max(best, mutual_information(col));
  }
  return best;
}

inline double max_class_mi(const Counts& n) {
  double best = 0;
  for (std::size_t c = 0; c < n[0].size(); ++c)
    if (class_mass(n, std::uint64_t{1} << c) > 0) best = std::max(best, mutual_information(collapse(n, std::uint64_t{1} << c)));
  return best;
}

inline double max_class_kl(const Counts& n) {
  const auto pt = p_t(n);
  double best = 0;
  for (std::size_t c = 0; c < n[0].size(); ++c)
    if (class_mass(n, std::uint64_t{1} << c) > 0) best = std::max(best, kl(conditional(n, std::uint64_t{1} << c), pt));
  return best;
}

// H(M) - pi H(P1) - (1 - pi) H(P2)
inline double jsd_entropy_form(double pi, const std::vector<double>& p1, const std::vector<double>& p2) {
  std::vector<double> m(p1.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = pi * p1[i] + (1 - pi) * p2[i];
  return entropy(m) - pi * entropy(p1) - (1 - pi) * entropy(p2);
}

}  // namespace oracle
