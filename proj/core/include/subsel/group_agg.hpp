#pragma once

#include <vector>

#include "subsel/types.hpp"
#include "subsel/unit_stats.hpp"

namespace subsel {

// Smallest t >= 0 with P(Bin(q, pstar) > t) <= pstar.
int binomial_eta(int q, double pstar);

// Worst-case prior odds of a positive group label from q sign draws:
// P(Bin(q, pstar) > eta) / P(Bin(q, pstar) <= eta), at eta = binomial_eta.
// q = 0 degenerates to pstar / (1 - pstar).
double group_kappa(int q, double pstar);

// Worst-case marginal odds that one set of size n yields sign +1 under the
// bounded-odds model: ((n-1)(gamma-1) + floor(n/2)) / floor(n/2).
double unit_marginal_kappa(int n, double gamma);

// Indices (into the input) of the k largest magnitudes, ties toward the lower
// set id. k is clamped to the input size.
std::vector<int> representative_set(const std::vector<UnitStats>& units, int k);

struct AggregateOptions {
  Magnitude variant = Magnitude::Np;
  int rep_size = 1;           // k
  double size_exponent = 0.0; // b in the optional |g|^b magnitude factor
};

// Default representative count: min(4, floor(min group size / 2)), at least 1.
int default_rep_size(const std::vector<std::vector<int>>& groups);

// Fold a group's unit statistics into masked group statistics.
GroupStats aggregate_group(int group_id, const std::vector<UnitStats>& units, double gamma,
                           const AggregateOptions& opt);

std::vector<GroupStats> aggregate_groups(const std::vector<UnitStats>& units,
                                         const Partition& partition, double gamma,
                                         Magnitude variant, double size_exponent = 0.0,
                                         int rep_size_override = 0);

}  // namespace subsel
