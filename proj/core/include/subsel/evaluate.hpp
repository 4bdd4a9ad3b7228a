#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "subsel/calibration.hpp"
#include "subsel/group_agg.hpp"
#include "subsel/pvalues.hpp"
#include "subsel/screening.hpp"
#include "subsel/types.hpp"

namespace subsel {

enum class Method { Np, Max, TopGap, MedSplit, NpCc, Bh, Pscreen };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct SelectOptions {
  Method method = Method::Np;
  double alpha = 0.1;
  double gamma = 1.0;          // sensitivity bound used for inference
  double gamma_split = 1.0;
  int refit_every = 0;
  std::uint64_t seed = 0;
  bool two_sided = false;
  ScreeningConfig::Predictor predictor = ScreeningConfig::Predictor::Adaptive;
  CalibrationConfig calibration;  // applied when cc != Off
  enum class Cc { Off, Light, Full } cc = Cc::Off;
  PscreenConfig pscreen;
  double size_exponent = 0.0;
  int rep_size_override = 0;
};

struct GroupReportRow {
  int group_id = -1;
  int size = 0;
  int selected = 0;
  int via_cc = 0;
  int sign = 0;
  double magnitude = 0.0;
  double kappa = 0.0;
  int eta = 0;
  double p_value = -1.0;  // -1 when the method computes none
};

struct SelectOutcome {
  std::vector<int> selection;          // ascending group ids
  std::vector<std::uint8_t> via_cc;    // parallel to selection
  std::vector<GroupReportRow> report;  // one row per group
  std::optional<ScreeningTrace> trace; // screening methods only
};

// Shared driver behind the CLI and the experiment runner: computes unit and
// group statistics for the requested method and runs its selection rule.
SelectOutcome run_select(const std::vector<MatchedSet>& sets, const Partition& partition,
                         const SelectOptions& opt);

struct FdrPower {
  double fdp = 0.0;
  double power = 0.0;  // selected nonnull / max(1, total nonnull)
};

FdrPower fdr_power(const std::vector<int>& selection, const std::vector<std::uint8_t>& nonnull);

struct ExperimentCell {
  std::string label;
  int group_size = 5;  // sets per group; K follows from the scaling rule
  int set_size = 2;
  double gamma_gen = 3.0;      // generation bound
  double gamma_inf = 3.0;      // inference bound
  double tau_star = 3.0;
  int n_outcomes = 1;
  double mask_frac = 0.6;
  bool two_sided = false;
  bool tree = false;           // tree-grown partition instead of random
  int n_sets_override = 0;     // 0 = scaling rule
};

struct ExperimentResult {
  std::string cell;
  Method method = Method::Np;
  int reps = 0;
  double mean_fdp = 0.0;
  double se_fdp = 0.0;
  double mean_power = 0.0;
  double se_power = 0.0;
  double mean_selected = 0.0;
  double millis = 0.0;
};

struct ExperimentConfig {
  std::vector<ExperimentCell> cells;
  std::vector<Method> methods;
  int reps = 100;
  double alpha = 0.1;
  double gamma_split = 1.0;
  std::uint64_t seed = 1;
  int workers = 1;
};

// Per (cell, rep): one dataset, one partition, every method on the same data.
// Replicate seeds derive from (seed, cell index, rep) so results do not depend
// on scheduling. Rows come back sorted by (cell index, method).
std::vector<ExperimentResult> run_experiment(const ExperimentConfig& cfg);

}  // namespace subsel
