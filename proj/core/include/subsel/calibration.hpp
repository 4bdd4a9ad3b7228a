#pragma once

#include <vector>

#include "subsel/group_agg.hpp"
#include "subsel/screening.hpp"
#include "subsel/types.hpp"

namespace subsel {

struct CalibrationConfig {
  enum class Variant { Light, Full } variant = Variant::Light;
  int full_group_limit = 10;  // groups larger than this fall back to Light
};

struct EarlyStop {
  long t = 0;       // first step where the run stops or turns hopeless
  int n_neg = 0;    // unscreened negatives at that step
  bool via_fdp = false;
};

// First step at which the recorded run either met the stopping rule or could
// no longer possibly meet it (too few positives left).
EarlyStop early_stop_time(const ScreeningTrace& trace, double kappa, double gamma_split,
                          double alpha);

// Monotone evidence score h(sign, residual signs): upper-tail log-probability
// of the implied positive count among the sign-carrying draws.
double evidence_score(int sign, const std::vector<int>& residual_signs, int eta, double pstar);

struct CalibrationResult {
  std::vector<int> selection;      // ascending group ids, superset of the screening selection
  std::vector<std::uint8_t> via_cc;  // parallel to selection: 1 when added by calibration
};

// Conditional augmentation of a screening selection. Light treats the group
// label as the atom and checks the worst-case expected selection-impact at the
// two extreme label probabilities; Full enumerates unit-sign vertices for
// groups up to full_group_limit. unit_stats_by_group is required for Full and
// must align with groups by group id.
CalibrationResult calibrate(const ScreenResult& original, const std::vector<GroupStats>& groups,
                            const GroupFeatures& features, const ScreeningConfig& screen_cfg,
                            const CalibrationConfig& cfg,
                            const std::vector<std::vector<UnitStats>>* unit_stats_by_group = nullptr,
                            double gamma = 1.0, const AggregateOptions* agg_opt = nullptr);

}  // namespace subsel
