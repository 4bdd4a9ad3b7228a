#include "subsel/calibration.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "subsel/group_agg.hpp"
#include "subsel/rng.hpp"
#include "subsel/screening.hpp"

namespace {

using namespace subsel;

ScreeningTrace make_trace(std::vector<StepRecord> steps) {
  ScreeningTrace t;
  t.steps = std::move(steps);
  return t;
}

StepRecord rec(int step, int g, int np, int nn, double fdp) {
  StepRecord s;
  s.step = step;
  s.screened_group = g;
  s.n_pos = np;
  s.n_neg = nn;
  s.fdp_hat = fdp;
  return s;
}

TEST(EarlyStopTime, FirstPassingStepWins) {
  auto t = make_trace({rec(0, -1, 5, 3, 0.8), rec(1, 2, 5, 2, 0.6), rec(2, 1, 5, 1, 0.4)});
  EarlyStop s = early_stop_time(t, 1.0, 1.0, 0.5);
  EXPECT_EQ(s.t, 2);
  EXPECT_EQ(s.n_neg, 1);
  EXPECT_TRUE(s.via_fdp);
}

TEST(EarlyStopTime, HopelessBeatsLaterPass) {
  // With kappa 2 and alpha 0.1 a stop needs 20 positives, so one positive is
  // hopeless immediately even though a later recorded step passes.
  auto t = make_trace({rec(0, -1, 1, 5, 3.0), rec(1, 4, 1, 4, 0.05)});
  EarlyStop s = early_stop_time(t, 2.0, 1.0, 0.1);
  EXPECT_EQ(s.t, 0);
  EXPECT_EQ(s.n_neg, 5);
  EXPECT_FALSE(s.via_fdp);
}

TEST(EarlyStopTime, FdpCheckedBeforeHopeless) {
  auto t = make_trace({rec(0, -1, 1, 0, 0.05)});
  EarlyStop s = early_stop_time(t, 2.0, 1.0, 0.1);
  EXPECT_TRUE(s.via_fdp);
  EXPECT_EQ(s.t, 0);
}

TEST(EarlyStopTime, FallsBackToLastStep) {
  // fdp stays above alpha while enough positives remain for a future stop
  // (threshold kappa / alpha = 2), so neither rule fires and the run exhausts.
  auto t = make_trace({rec(0, -1, 5, 3, 0.8), rec(1, 3, 4, 3, 1.0)});
  EarlyStop s = early_stop_time(t, 1.0, 1.0, 0.5);
  EXPECT_EQ(s.t, 1);
  EXPECT_EQ(s.n_neg, 3);
  EXPECT_FALSE(s.via_fdp);
  EXPECT_THROW(early_stop_time(ScreeningTrace{}, 1.0, 1.0, 0.1), std::invalid_argument);
}

TEST(EvidenceScore, Anchors) {
  EXPECT_DOUBLE_EQ(evidence_score(-1, {}, 0, 0.75), 0.0);
  EXPECT_DOUBLE_EQ(evidence_score(1, {}, 0, 0.75), -std::log(0.75));
  EXPECT_DOUBLE_EQ(evidence_score(1, {1, -1}, 0, 0.5), -std::log(0.5));
  EXPECT_THROW(evidence_score(0, {}, 0, 0.5), std::invalid_argument);
}

TEST(EvidenceScore, MonotoneInLabelAndResiduals) {
  for (int eta = 0; eta <= 3; ++eta) {
    EXPECT_GT(evidence_score(1, {1, -1, 1}, eta, 0.6), evidence_score(-1, {1, -1, 1}, eta, 0.6));
    EXPECT_GT(evidence_score(1, {1, 1, 1}, eta, 0.6), evidence_score(1, {1, -1, 1}, eta, 0.6));
  }
  // Zeros are excluded from the draw count.
  EXPECT_DOUBLE_EQ(evidence_score(1, {0, 0}, 0, 0.75), evidence_score(1, {}, 0, 0.75));
}

GroupStats unit_group(int id, int sign, double w, double pstar, double kappa, int eta,
                      int rep_nonzero) {
  GroupStats g;
  g.group_id = id;
  g.sign = sign;
  g.magnitude = w;
  g.kappa = kappa;
  g.pstar = pstar;
  g.eta = eta;
  g.rep_nonzero = rep_nonzero;
  g.members = {id};
  g.rep_members = {id};
  return g;
}

GroupFeatures plain_features(const std::vector<GroupStats>& groups) {
  GroupFeatures f;
  f.x.setZero(static_cast<long>(groups.size()), 2);
  f.w_col = 0;
  f.frac_col = 1;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    f.x(static_cast<long>(i), 0) = groups[i].magnitude;
    f.x(static_cast<long>(i), 1) = 0.5;
  }
  return f;
}

TEST(Calibrate, SingleGroupBudgetShortfallIsNotAdded) {
  // One positive group, kappa 1, alpha 0.5: the run is hopeless, the observed
  // impact term is 1 - 0.5 and the flipped term 0, so the worst mixture is
  // +0.25 and the group stays out.
  std::vector<GroupStats> groups{unit_group(0, 1, 3.0, 0.5, 1.0, 0, 1)};
  GroupFeatures f = plain_features(groups);
  ScreeningConfig cfg;
  cfg.alpha = 0.5;
  auto run = screen(groups, f, cfg);
  EXPECT_TRUE(run.selection.empty());
  EXPECT_EQ(run.trace.reason, StopReason::Exhausted);
  CalibrationConfig cal;
  auto res = calibrate(run, groups, f, cfg, cal);
  EXPECT_TRUE(res.selection.empty());
}

TEST(Calibrate, SupersetAndFlagConsistency) {
  RngStream rng = substream(11, "cal-test");
  for (int rep = 0; rep < 40; ++rep) {
    int k = 4 + static_cast<int>(rng.below(12));
    std::vector<GroupStats> groups;
    for (int i = 0; i < k; ++i) {
      double pstar = 0.5 + 0.25 * rng.u01();
      int q = 1 + static_cast<int>(rng.below(4));
      int eta = binomial_eta(q, pstar);
      groups.push_back(unit_group(i, rng.bernoulli(0.55) ? 1 : -1, rng.u01() * 6.0, pstar,
                                  group_kappa(q, pstar), eta, q));
    }
    GroupFeatures f = plain_features(groups);
    ScreeningConfig cfg;
    cfg.alpha = 0.25;
    cfg.seed = static_cast<std::uint64_t>(rep);
    auto run = screen(groups, f, cfg);
    auto res = calibrate(run, groups, f, cfg, CalibrationConfig{});
    EXPECT_TRUE(std::is_sorted(res.selection.begin(), res.selection.end()));
    ASSERT_EQ(res.via_cc.size(), res.selection.size());
    for (int g : run.selection)
      EXPECT_TRUE(std::binary_search(res.selection.begin(), res.selection.end(), g));
    for (std::size_t i = 0; i < res.selection.size(); ++i) {
      bool in_orig = std::binary_search(run.selection.begin(), run.selection.end(),
                                        res.selection[i]);
      EXPECT_EQ(res.via_cc[i] == 0, in_orig);
    }
  }
}

TEST(Calibrate, ReplayMismatchThrows) {
  std::vector<GroupStats> groups{unit_group(0, 1, 3.0, 0.5, 1.0, 0, 1),
                                 unit_group(1, 1, 2.0, 0.5, 1.0, 0, 1)};
  GroupFeatures f = plain_features(groups);
  ScreeningConfig cfg;
  cfg.alpha = 0.5;
  auto run = screen(groups, f, cfg);
  run.selection = {0};  // doctored record no replay can reproduce
  EXPECT_THROW(calibrate(run, groups, f, cfg, CalibrationConfig{}), std::runtime_error);
}

TEST(Calibrate, ZeroSignGroupsNeverAdded) {
  // Worst-case odds include every group, so the inactive group keeps a small
  // kappa to leave the estimate at 1/2 with a single positive.
  std::vector<GroupStats> groups{unit_group(0, 1, 3.0, 1.0 / 3.0, 0.5, 0, 1),
                                 unit_group(1, 0, 9.0, 1.0 / 3.0, 0.5, 0, 0)};
  GroupFeatures f = plain_features(groups);
  ScreeningConfig cfg;
  cfg.alpha = 0.6;
  auto run = screen(groups, f, cfg);
  EXPECT_EQ(run.selection, (std::vector<int>{0}));
  auto res = calibrate(run, groups, f, cfg, CalibrationConfig{});
  EXPECT_EQ(res.selection, (std::vector<int>{0}));
}

struct MiniData {
  std::vector<MatchedSet> sets;
  Partition part;
  std::vector<UnitStats> units;
  std::vector<GroupStats> groups;
  std::vector<std::vector<UnitStats>> by_group;
  GroupFeatures features;
};

MiniData singleton_data(std::uint64_t seed, int k) {
  MiniData d;
  RngStream rng = substream(seed, "mini");
  d.part.n_groups = k;
  AggregateOptions opt;
  opt.variant = Magnitude::Np;
  opt.rep_size = 1;
  for (int i = 0; i < k; ++i) {
    MatchedSet s;
    s.id = i;
    s.covariates = Eigen::VectorXd::Constant(1, rng.u01());
    s.outcomes = Eigen::MatrixXd::Zero(2, 1);
    d.sets.push_back(s);
    d.part.group_of.push_back(i);
    UnitStats u;
    u.set_id = i;
    u.sign = rng.bernoulli(0.6) ? 1 : -1;
    u.magnitude = rng.u01() * 5.0;
    u.rank = u.sign > 0 ? 1 : 2;
    u.masked_rank = 1;
    u.n_units = 2;
    d.units.push_back(u);
  }
  d.groups = aggregate_groups(d.units, d.part, 1.0, Magnitude::Np, 0.0, 1);
  for (int i = 0; i < k; ++i) d.by_group.push_back({d.units[static_cast<std::size_t>(i)]});
  d.features = build_features(d.sets, d.part, d.groups);
  return d;
}

TEST(Calibrate, FullMatchesLightOnSingletonGroups) {
  AggregateOptions opt;
  opt.variant = Magnitude::Np;
  opt.rep_size = 1;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    MiniData d = singleton_data(seed, 8);
    ScreeningConfig cfg;
    cfg.alpha = 0.3;
    cfg.seed = seed + 100;
    auto run = screen(d.groups, d.features, cfg);
    CalibrationConfig light;
    CalibrationConfig full;
    full.variant = CalibrationConfig::Variant::Full;
    auto a = calibrate(run, d.groups, d.features, cfg, light);
    auto b = calibrate(run, d.groups, d.features, cfg, full, &d.by_group, 1.0, &opt);
    EXPECT_EQ(a.selection, b.selection) << "seed " << seed;
  }
}

TEST(Calibrate, FullGateFallsBackToLight) {
  // full_group_limit below the group size forces the label-level path even
  // when unit statistics are supplied.
  MiniData d = singleton_data(3, 6);
  ScreeningConfig cfg;
  cfg.alpha = 0.3;
  auto run = screen(d.groups, d.features, cfg);
  CalibrationConfig gated;
  gated.variant = CalibrationConfig::Variant::Full;
  gated.full_group_limit = 0;
  AggregateOptions opt;
  opt.rep_size = 1;
  auto a = calibrate(run, d.groups, d.features, cfg, gated, &d.by_group, 1.0, &opt);
  auto b = calibrate(run, d.groups, d.features, cfg, CalibrationConfig{});
  EXPECT_EQ(a.selection, b.selection);
}

TEST(Calibrate, FullNeedsAggregateOptions) {
  MiniData d = singleton_data(5, 4);
  ScreeningConfig cfg;
  cfg.alpha = 0.3;
  auto run = screen(d.groups, d.features, cfg);
  CalibrationConfig full;
  full.variant = CalibrationConfig::Variant::Full;
  bool has_candidate = false;
  for (std::size_t i = 0; i < d.groups.size(); ++i)
    if (d.groups[i].sign != 0 &&
        !std::binary_search(run.selection.begin(), run.selection.end(), static_cast<int>(i)))
      has_candidate = true;
  if (!has_candidate) GTEST_SKIP() << "no unselected candidate in this draw";
  EXPECT_THROW(calibrate(run, d.groups, d.features, cfg, full, &d.by_group, 1.0, nullptr),
               std::invalid_argument);
}

TEST(Calibrate, FullRejectsMismatchedUnitStats) {
  MiniData d = singleton_data(7, 4);
  ScreeningConfig cfg;
  cfg.alpha = 0.3;
  auto run = screen(d.groups, d.features, cfg);
  CalibrationConfig full;
  full.variant = CalibrationConfig::Variant::Full;
  AggregateOptions opt;
  opt.rep_size = 1;
  auto broken = d.by_group;
  for (auto& v : broken) v.push_back(v.front());
  bool has_candidate = false;
  for (std::size_t i = 0; i < d.groups.size(); ++i)
    if (d.groups[i].sign != 0 &&
        !std::binary_search(run.selection.begin(), run.selection.end(), static_cast<int>(i)))
      has_candidate = true;
  if (!has_candidate) GTEST_SKIP() << "no unselected candidate in this draw";
  EXPECT_THROW(calibrate(run, d.groups, d.features, cfg, full, &broken, 1.0, &opt),
               std::invalid_argument);
}

}  // namespace
