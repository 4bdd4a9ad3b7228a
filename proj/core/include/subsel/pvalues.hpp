#pragma once

#include <cstdint>
#include <vector>

#include "subsel/rng.hpp"

namespace subsel {

enum class PValueMode { Exact, NormalApprox };

struct PValue {
  double value = 1.0;
  bool randomized = false;
  PValueMode mode = PValueMode::Exact;
};

// Worst-case signed-rank p-value under the bounded-odds model: the right tail
// of S = sum of weights with positive sign when each nonzero sign is +1 with
// probability gamma/(1+gamma) independently. Zero signs drop out. Exact
// (dynamic program over integer weights, else full enumeration) up to
// exact_limit nonzero signs, normal approximation with continuity correction
// beyond. randomized draws U once from rng to smooth the atom at the observed
// sum.
PValue signed_rank_sensitivity_pvalue(const std::vector<int>& signs,
                                      const std::vector<double>& weights, double gamma,
                                      bool randomized, RngStream* rng, int exact_limit = 20);

// Midranks of |values| ascending (average rank across ties).
std::vector<double> midranks(const std::vector<double>& values);

// Benjamini-Hochberg step-up at level alpha; returns selected indices ascending.
std::vector<int> bh_select(const std::vector<double>& pvalues, double alpha);

struct PscreenConfig {
  double alpha_bar = 0.3;  // positive-call threshold
  double lambda = 0.5;     // negative band lower edge
  double nu = 1.0;         // negative band upper edge
  double eps = 0.01;       // magnitude regularizer
};

struct PscreenStats {
  int sign = 0;
  double magnitude = 0.0;
};

// Map a p-value to a masked (sign, magnitude) pair: +1 below alpha_bar, -1 on
// [lambda, nu], 0 between. kappa for downstream screening is
// (nu - lambda) / alpha_bar.
PscreenStats pscreen_mask(double p, const PscreenConfig& cfg);

double pscreen_kappa(const PscreenConfig& cfg);

enum class Combine { Fisher, Bonferroni };

double combine_pvalues(const std::vector<double>& pvalues, Combine method);

// Diagnostic rows for mirror symmetry of the p-value around 1/2, conditional
// on v = min(p, 1-p). Deterministic p-values give conditional masses at the
// attainable atoms; randomized p-values give the density on v-intervals.
struct MirrorRow {
  double v_lo = 0.0;
  double v_hi = 0.0;   // == v_lo for atoms
  double below = 0.0;  // mass or density at p = v
  double above = 0.0;  // mass or density at p = 1 - v
};

// probs[i] = P(sign_i = +1) in (0,1); weights as in the p-value. gamma fixes
// the reference tail used to map sums to p-values.
std::vector<MirrorRow> mirror_symmetry_check(const std::vector<double>& probs,
                                             const std::vector<double>& weights, double gamma,
                                             bool randomized);

// Distribution of the weighted positive-sign sum: support (ascending) and
// probabilities under independent sign probabilities probs.
struct SumDist {
  std::vector<double> support;
  std::vector<double> prob;
};

SumDist weighted_sign_sum_dist(const std::vector<double>& probs, const std::vector<double>& weights);

}  // namespace subsel
