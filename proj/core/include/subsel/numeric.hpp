#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace subsel {

// Shared tolerance for threshold comparisons near rule boundaries (stopping
// rules, calibration decisions). Relative in the right operand.
inline constexpr double kCompareTol = 1e-12;

inline bool approx_leq(double a, double b) {
  return a <= b + kCompareTol * std::max(1.0, std::abs(b));
}

inline bool approx_lt(double a, double b) {
  return a < b - kCompareTol * std::max(1.0, std::abs(b));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485); }

// Binomial pmf vector (p_k)_{k=0..n} by the stable ratio recurrence; exact for
// dyadic p at small n, accurate to a few ulp otherwise.
inline std::vector<double> binomial_pmf(int n, double p) {
  if (n < 0) throw std::invalid_argument("binomial_pmf: n < 0");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("binomial_pmf: p outside [0,1]");
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
  if (p == 1.0) {
    pmf[static_cast<std::size_t>(n)] = 1.0;
    return pmf;
  }
  double q = 1.0 - p;
  double cur = 1.0;
  for (int i = 0; i < n; ++i) cur *= q;
  pmf[0] = cur;
  double ratio = p / q;
  for (int k = 0; k < n; ++k) {
    cur *= ratio * static_cast<double>(n - k) / static_cast<double>(k + 1);
    pmf[static_cast<std::size_t>(k) + 1] = cur;
  }
  return pmf;
}

// P(Bin(n, p) > t). t < 0 gives 1, t >= n gives 0.
inline double binomial_tail_gt(int n, double p, int t) {
  if (t < 0) return 1.0;
  if (t >= n) return 0.0;
  std::vector<double> pmf = binomial_pmf(n, p);
  double s = 0.0;
  for (int k = n; k > t; --k) s += pmf[static_cast<std::size_t>(k)];
  return std::min(1.0, s);
}

// P(Bin(n, p) >= c).
inline double binomial_tail_geq(int n, double p, int c) { return binomial_tail_gt(n, p, c - 1); }

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd out;
  if (v.empty()) return out;
  double s = 0.0;
  for (double x : v) s += x;
  out.mean = s / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return out;
}

}  // namespace subsel
