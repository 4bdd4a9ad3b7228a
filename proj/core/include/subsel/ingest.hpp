#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "subsel/types.hpp"

namespace subsel {

// Unit-level observational table: one row per unit.
struct UnitTable {
  std::vector<std::string> unit_ids;
  std::vector<int> treatment;  // 0/1
  Eigen::MatrixXd outcomes;    // n x M
  Eigen::MatrixXd covariates;  // n x d
  std::vector<std::string> outcome_names;
  std::vector<std::string> covariate_names;
  int n_dropped = 0;  // rows discarded for missing/unparseable fields
};

UnitTable load_units(const std::string& path);

struct PropensityFit {
  Eigen::VectorXd coef;       // includes intercept at index 0
  Eigen::VectorXd logits;     // per unit
  Eigen::VectorXd probs;
  int iterations = 0;
  bool ridged = false;        // ridge fallback engaged
};

// Logistic propensity model by IRLS; falls back to a small ridge when the
// Newton system degenerates (collinearity, separation) and fails hard when
// even that cannot converge.
PropensityFit propensity_fit(const Eigen::MatrixXd& covariates, const std::vector<int>& treatment,
                             int max_iter = 100, double tol = 1e-8);

struct MatchConfig {
  int controls_per_set = 1;   // k
  double caliper = 0.4;       // in sd units of the logit propensity
};

struct MatchOutput {
  std::vector<MatchedSet> sets;
  std::vector<int> unmatched_treated;  // row indices dropped for lack of controls
};

// Greedy nearest-neighbor matching without replacement on the logit propensity
// score, treated units visited in descending propensity order. A set forms
// only when k distinct controls lie within the caliper. Set covariates are the
// treated unit's.
MatchOutput nn_match(const UnitTable& table, const PropensityFit& fit, const MatchConfig& cfg);

// Standardized mean differences per covariate: (mean_t - mean_c) / pooled sd.
// Pre uses all units; post uses matched units only (controls weighted equally
// within set).
Eigen::VectorXd smd_pre(const UnitTable& table);
Eigen::VectorXd smd_post(const UnitTable& table, const MatchOutput& match);

}  // namespace subsel
