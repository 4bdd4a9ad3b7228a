#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "subsel/rng.hpp"
#include "subsel/types.hpp"

namespace subsel {

struct SimConfig {
  int n_sets = 1200;       // matched sets per replicate
  int set_size = 2;        // units per set (1 treated + set_size-1 controls)
  int d = 5;               // covariates
  double p_important = 0.3;
  double alpha_u = 0.2;    // shared latent factor loading
  double tau_star = 3.0;   // effect scale
  double gamma = 3.0;      // assignment odds bound used for generation
  int n_outcomes = 1;
  double mask_frac = 0.6;  // fraction of outcomes nulled per set (multi-outcome)
  std::uint64_t seed = 1;
};

// Generated dataset plus the latent truth needed for evaluation. effect holds
// the additive treated-unit shift actually applied per (set, outcome), so
// masking and flipping stay exact post-hoc adjustments.
struct SimData {
  std::vector<MatchedSet> sets;
  std::vector<std::uint8_t> important;  // S_i
  std::vector<double> tau;              // per-set effect size before masking/flip
  Eigen::MatrixXd effect;               // n_sets x n_outcomes, applied shift
  Eigen::MatrixXd beta;                 // d x n_outcomes outcome coefficients
  Eigen::VectorXd eta_coef;             // d, effect-direction coefficients

  bool set_nonnull(int i) const {
    for (int m = 0; m < effect.cols(); ++m)
      if (effect(i, m) != 0.0) return true;
    return false;
  }
};

// One replicate. Coefficients (beta, eta) depend on cfg.seed only; everything
// else varies with rep so an experiment holds its coefficient draw fixed.
SimData gen_dataset(const SimConfig& cfg, std::uint64_t rep = 0);

// Negate the applied effect for ~half the groups (coin per group).
std::vector<std::uint8_t> two_sided_flip(SimData& data, const Partition& partition, RngStream& rng);

// Null out ceil(mask_frac * M) outcomes per set, chosen uniformly.
void mask_outcomes(SimData& data, double mask_frac, RngStream& rng);

// Group is nonnull when any member set keeps a nonzero applied effect.
std::vector<std::uint8_t> group_nonnull(const SimData& data, const Partition& partition);

// Number of sets specified by the scaling rule floor(max(1200, 200 * m)) for
// group size m, doubled for tree-partition experiments.
int scaled_n_sets(int group_size, bool tree);

}  // namespace subsel
