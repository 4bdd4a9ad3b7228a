#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace subsel {

// Bounded odds model for treatment assignment within a matched set: any two
// units' assignment odds differ by at most a factor gamma >= 1.
struct SensitivityModel {
  double gamma = 1.0;
};

inline void validate_gamma(double gamma) {
  if (!(gamma >= 1.0)) throw std::invalid_argument("gamma must be >= 1");
}

struct SignProbBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Range of P(treated unit has the top rank) in a set of n units under the
// bounded-odds model: [1/(1+(n-1)gamma), gamma/(n-1+gamma)].
inline SignProbBounds rank_prob_bounds(double gamma, int n) {
  validate_gamma(gamma);
  if (n < 2) throw std::invalid_argument("rank_prob_bounds: set size must be >= 2");
  double m = static_cast<double>(n - 1);
  return {1.0 / (1.0 + m * gamma), gamma / (m + gamma)};
}

// One treated unit plus n-1 matched controls. Outcomes are n x M (rows follow
// unit order, columns are outcomes); covariates describe the set (treated
// unit's by convention for matched data).
struct MatchedSet {
  int id = -1;
  Eigen::VectorXd covariates;
  Eigen::MatrixXd outcomes;
  int treated = 0;  // row index of the treated unit
  std::vector<std::string> unit_ids;  // optional, parallel to outcome rows

  int n_units() const { return static_cast<int>(outcomes.rows()); }
  int n_outcomes() const { return static_cast<int>(outcomes.cols()); }
};

inline void validate_set(const MatchedSet& s) {
  if (s.outcomes.rows() < 2) throw std::invalid_argument("matched set needs >= 2 units");
  if (s.outcomes.cols() < 1) throw std::invalid_argument("matched set needs >= 1 outcome");
  if (s.treated < 0 || s.treated >= s.outcomes.rows())
    throw std::invalid_argument("treated index out of range");
  if (!s.unit_ids.empty() && static_cast<int>(s.unit_ids.size()) != s.outcomes.rows())
    throw std::invalid_argument("unit_ids size mismatch");
}

// Disjoint cover of set indices by groups 0..n_groups-1.
struct Partition {
  std::vector<int> group_of;  // group id per set index
  int n_groups = 0;
  std::string tree_text;  // human-readable description when built by a tree

  std::vector<std::vector<int>> groups() const {
    std::vector<std::vector<int>> g(static_cast<std::size_t>(n_groups));
    for (std::size_t i = 0; i < group_of.size(); ++i)
      g[static_cast<std::size_t>(group_of[i])].push_back(static_cast<int>(i));
    return g;
  }
};

inline void validate_partition(const Partition& p, int n_sets) {
  if (static_cast<int>(p.group_of.size()) != n_sets)
    throw std::invalid_argument("partition does not cover the sets");
  if (p.n_groups < 1) throw std::invalid_argument("partition needs >= 1 group");
  std::vector<int> count(static_cast<std::size_t>(p.n_groups), 0);
  for (int g : p.group_of) {
    if (g < 0 || g >= p.n_groups) throw std::invalid_argument("group id out of range");
    ++count[static_cast<std::size_t>(g)];
  }
  for (int c : count)
    if (c == 0) throw std::invalid_argument("empty group in partition");
}

// Masked per-set statistics: sign carries the treated unit's rank direction,
// magnitude is sign-free evidence strength.
struct UnitStats {
  int set_id = -1;
  int sign = 0;         // -1, 0, +1
  double magnitude = 0.0;
  int rank = 0;         // treated unit's descending rank, 1-based (0 if untracked)
  int masked_rank = 0;  // min(rank, n+1-rank)
  int n_units = 2;
};

// Masked group-level statistics produced by aggregation.
struct GroupStats {
  int group_id = -1;
  std::vector<int> members;         // set ids, ascending
  std::vector<int> rep_members;     // representative subset of members, ascending
  std::vector<int> residual_signs;  // signs outside the representative set, by ascending set id
  int sign = 0;                     // group label in {-1, +1}
  double magnitude = 0.0;
  double kappa = 0.0;  // worst-case odds of sign = +1 for a null group
  double pstar = 0.0;  // worst-case per-draw success probability
  int eta = 0;         // binomial majority threshold used for the label
  int rep_nonzero = 0; // sign-carrying representatives
};

}  // namespace subsel
