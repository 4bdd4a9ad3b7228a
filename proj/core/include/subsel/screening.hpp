#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "subsel/types.hpp"

namespace subsel {

struct ScreeningConfig {
  double alpha = 0.1;
  double gamma_split = 1.0;  // retention probability for negative labels at t = 0
  int refit_every = 0;       // 0 = auto: max(1, ceil(K / 50))
  std::uint64_t seed = 0;
  enum class Predictor { Adaptive, MagnitudeOnly } predictor = Predictor::Adaptive;
};

// Masked per-group features for the sign predictor.
struct GroupFeatures {
  Eigen::MatrixXd x;  // one row per group
  int w_col = -1;     // column carrying the group magnitude
  int frac_col = -1;  // column carrying the positive fraction of residual signs
};

GroupFeatures build_features(const std::vector<MatchedSet>& sets, const Partition& partition,
                             const std::vector<GroupStats>& groups);

// Ridge logistic model fit on standardized features (IRLS). Returns false and
// leaves the model unusable when the solve degenerates.
struct RidgeLogit {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  bool ok = false;
};

RidgeLogit predictor_fit(const Eigen::MatrixXd& x, const std::vector<int>& rows,
                         const std::vector<int>& labels, double lambda = 1.0);

Eigen::VectorXd predictor_score(const RidgeLogit& model, const Eigen::MatrixXd& x);

struct StepRecord {
  int step = 0;
  int screened_group = -1;  // group removed to reach this state; -1 at step 0
  int n_pos = 0;            // unscreened positive labels
  int n_neg = 0;            // unscreened negative labels
  double fdp_hat = 0.0;
};

enum class StopReason { FdpBelowAlpha, NoPossibleStop, Exhausted };

struct ScreeningTrace {
  std::vector<std::uint8_t> xi;      // per-group split coins
  std::vector<int> initial_screened; // negatives revealed before step 1
  std::vector<StepRecord> steps;
  long tau = -1;  // stopping step; -1 when the rule never fired
  StopReason reason = StopReason::Exhausted;
};

struct ScreenResult {
  std::vector<int> selection;  // ascending group ids
  ScreeningTrace trace;
};

double fdp_estimate(int n_pos, int n_neg, double kappa, double gamma_split);

// Sequential masked screening. Groups are revealed lowest predictor score
// first; the run stops when the estimate drops to alpha. stop_early also halts
// (with an empty selection) once too few positives remain for any future stop,
// which replays use. All randomness comes from cfg.seed substreams.
ScreenResult screen(const std::vector<GroupStats>& groups, const GroupFeatures& features,
                    const ScreeningConfig& cfg, bool stop_early = false);

}  // namespace subsel
