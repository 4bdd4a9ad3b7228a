#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "subsel/rng.hpp"
#include "subsel/types.hpp"

namespace subsel {

enum class Magnitude { Np, Max, TopGap, MedSplit };

struct PairStats {
  int sign = 0;
  double magnitude = 0.0;
};

// Treated-minus-control signed difference for a pair. z1, z2 in {0,1}, exactly
// one treated.
PairStats pair_stats(double r1, double r2, int z1, int z2);

struct RankResult {
  int rank = 1;                // treated unit's rank, descending, 1-based
  std::vector<double> sorted;  // outcomes sorted descending (ties in key order)
  int partner = 1;             // n + 1 - rank
};

// Rank of the treated unit among all outcomes in the set, descending. Ties are
// broken by independent uniform keys drawn once per unit from rng.
RankResult treated_rank(const std::vector<double>& outcomes, int treated, RngStream& rng);

// +1 for a top-half rank, -1 for a bottom-half rank, 0 for the middle rank of
// an odd-sized set.
int sign_from_rank(int rank, int n);

// Masked rank g = min(rank, n + 1 - rank) in 1..ceil(n/2).
int masked_rank(int rank, int n);

// Sign-free magnitude of evidence from the descending sorted outcomes and the
// treated unit's rank. All variants are invariant to rank reflection.
double magnitude_from_ranks(Magnitude variant, const std::vector<double>& sorted_desc, int rank);

// Pair transform for two-sided effects: Y = (r1 - r2)(r1 + r2 - 2 r0)(z1 - z2)
// with r0 the null-model predicted outcome level for the pair's covariates.
// Sign/magnitude are sgn(Y), |Y|.
PairStats two_sided_transform(double r1, double r2, int z1, double r0);

// Static baseline for the two-sided transform: ridge linear model of control
// outcomes on covariates, fit once per dataset.
struct RidgeBaseline {
  Eigen::VectorXd coef;
  double intercept = 0.0;

  double predict(const Eigen::VectorXd& x) const { return intercept + coef.dot(x); }
};

RidgeBaseline fit_control_baseline(const std::vector<MatchedSet>& sets, int outcome = 0,
                                   double lambda = 1.0);

// Combine per-outcome (sign, magnitude) pairs: keep the largest magnitude,
// ties resolved toward the lowest outcome index.
PairStats multi_outcome_merge(const std::vector<PairStats>& per_outcome);

struct UnitStatsOptions {
  Magnitude variant = Magnitude::Np;
  bool two_sided = false;
};

// Masked statistics for one set and one outcome column.
UnitStats unit_stats_for_set(const MatchedSet& set, int outcome, const UnitStatsOptions& opt,
                             const RidgeBaseline* baseline, RngStream& rng);

// Masked statistics for every set, merging outcomes when M > 1. Draws one key
// stream per set id so results do not depend on set order.
std::vector<UnitStats> compute_unit_stats(const std::vector<MatchedSet>& sets,
                                          const UnitStatsOptions& opt, std::uint64_t seed);

}  // namespace subsel
