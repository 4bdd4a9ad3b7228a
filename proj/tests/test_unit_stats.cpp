#include "subsel/unit_stats.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "subsel/types.hpp"

namespace {

using namespace subsel;

TEST(PairStats, SignedDifference) {
  PairStats s = pair_stats(3.0, 1.0, 1, 0);
  EXPECT_EQ(s.sign, 1);
  EXPECT_DOUBLE_EQ(s.magnitude, 2.0);
  s = pair_stats(3.0, 1.0, 0, 1);
  EXPECT_EQ(s.sign, -1);
  EXPECT_DOUBLE_EQ(s.magnitude, 2.0);
  s = pair_stats(2.0, 2.0, 1, 0);
  EXPECT_EQ(s.sign, 0);
  EXPECT_DOUBLE_EQ(s.magnitude, 0.0);
}

TEST(PairStats, RejectsBadTreatment) {
  EXPECT_THROW(pair_stats(1.0, 2.0, 1, 1), std::invalid_argument);
  EXPECT_THROW(pair_stats(1.0, 2.0, 0, 0), std::invalid_argument);
}

TEST(TreatedRank, NoTies) {
  RngStream rng = substream(1, "ranks");
  RankResult r = treated_rank({5.0, 3.0, 2.0, 1.0}, 0, rng);
  EXPECT_EQ(r.rank, 1);
  EXPECT_EQ(r.partner, 4);
  ASSERT_EQ(r.sorted.size(), 4u);
  EXPECT_DOUBLE_EQ(r.sorted[0], 5.0);
  EXPECT_DOUBLE_EQ(r.sorted[3], 1.0);

  RankResult r2 = treated_rank({4.0, 9.0, 2.0, 7.0, 6.0}, 4, rng);
  EXPECT_EQ(r2.rank, 3);  // sorted desc: 9, 7, 6, 4, 2
  EXPECT_EQ(r2.partner, 3);
}

TEST(TreatedRank, TieBreakIsFair) {
  int rank1 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    RngStream rng = substream(static_cast<std::uint64_t>(i), "ranks");
    RankResult r = treated_rank({1.0, 1.0}, 0, rng);
    ASSERT_TRUE(r.rank == 1 || r.rank == 2);
    if (r.rank == 1) ++rank1;
  }
  EXPECT_NEAR(rank1 / static_cast<double>(n), 0.5, 0.015);
}

TEST(TreatedRank, StreamAlignedAcrossTies) {
  // The same number of keys is drawn whether or not ties exist, so downstream
  // draws stay aligned.
  RngStream a = substream(3, "ranks");
  RngStream b = substream(3, "ranks");
  (void)treated_rank({3.0, 2.0, 1.0}, 0, a);
  (void)treated_rank({1.0, 1.0, 1.0}, 0, b);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(SignFromRank, AllCases) {
  EXPECT_EQ(sign_from_rank(2, 5), 1);
  EXPECT_EQ(sign_from_rank(3, 5), 0);
  EXPECT_EQ(sign_from_rank(4, 5), -1);
  EXPECT_EQ(sign_from_rank(3, 4), -1);
  EXPECT_EQ(sign_from_rank(1, 2), 1);
  EXPECT_EQ(sign_from_rank(2, 2), -1);
  EXPECT_THROW(sign_from_rank(0, 4), std::invalid_argument);
  EXPECT_THROW(sign_from_rank(5, 4), std::invalid_argument);
}

TEST(SignFromRank, AntisymmetryAndBalance) {
  for (int n = 2; n <= 9; ++n) {
    int pos = 0, neg = 0;
    for (int r = 1; r <= n; ++r) {
      EXPECT_EQ(sign_from_rank(r, n), -sign_from_rank(n + 1 - r, n));
      int s = sign_from_rank(r, n);
      if (s > 0) ++pos;
      if (s < 0) ++neg;
    }
    EXPECT_EQ(pos, n / 2);
    EXPECT_EQ(neg, n / 2);
  }
}

TEST(MaskedRank, ExamplesAndSymmetry) {
  EXPECT_EQ(masked_rank(4, 5), 2);
  EXPECT_EQ(masked_rank(1, 2), 1);
  EXPECT_EQ(masked_rank(3, 5), 3);
  for (int n = 2; n <= 9; ++n)
    for (int r = 1; r <= n; ++r) EXPECT_EQ(masked_rank(r, n), masked_rank(n + 1 - r, n));
}

TEST(MagnitudeVariants, Anchors) {
  std::vector<double> sorted{5.0, 3.0, 2.0, 1.0};
  EXPECT_DOUBLE_EQ(magnitude_from_ranks(Magnitude::Np, sorted, 1), 4.0);
  EXPECT_DOUBLE_EQ(magnitude_from_ranks(Magnitude::TopGap, sorted, 2), 2.0);
  EXPECT_DOUBLE_EQ(magnitude_from_ranks(Magnitude::Max, sorted, 3), 5.0);

  std::vector<double> five{9.0, 7.0, 6.0, 4.0, 2.0};
  EXPECT_DOUBLE_EQ(magnitude_from_ranks(Magnitude::MedSplit, five, 1), 2.0);  // 9 - 7
  // Middle rank of an odd set: the masked-rank preimage is a singleton.
  EXPECT_DOUBLE_EQ(magnitude_from_ranks(Magnitude::Np, five, 3), 0.0);
  EXPECT_DOUBLE_EQ(magnitude_from_ranks(Magnitude::Np, five, 2), 3.0);  // 7 - 4
}

TEST(MagnitudeVariants, NpMasksTheSign) {
  std::vector<double> sorted{8.0, 6.0, 5.0, 3.0, 2.0, 1.0};
  int n = 6;
  for (int r = 1; r <= n; ++r)
    EXPECT_DOUBLE_EQ(magnitude_from_ranks(Magnitude::Np, sorted, r),
                     magnitude_from_ranks(Magnitude::Np, sorted, n + 1 - r));
  EXPECT_GE(magnitude_from_ranks(Magnitude::Np, sorted, 1), 0.0);
}

TEST(TwoSided, TransformAnchors) {
  PairStats s = two_sided_transform(2.0, 0.0, 1, 0.0);
  EXPECT_EQ(s.sign, 1);
  EXPECT_DOUBLE_EQ(s.magnitude, 4.0);
  s = two_sided_transform(-2.0, 0.0, 1, 0.0);
  EXPECT_EQ(s.sign, 1);
  EXPECT_DOUBLE_EQ(s.magnitude, 4.0);
  s = two_sided_transform(1.0, 1.0, 1, 0.0);
  EXPECT_EQ(s.sign, 0);
  EXPECT_DOUBLE_EQ(s.magnitude, 0.0);
}

TEST(MultiOutcome, MergeKeepsArgmaxMagnitude) {
  PairStats m = multi_outcome_merge({{1, 2.0}, {-1, 5.0}});
  EXPECT_EQ(m.sign, -1);
  EXPECT_DOUBLE_EQ(m.magnitude, 5.0);
  m = multi_outcome_merge({{1, 3.0}});
  EXPECT_EQ(m.sign, 1);
  EXPECT_DOUBLE_EQ(m.magnitude, 3.0);
  m = multi_outcome_merge({{1, 2.0}, {-1, 2.0}});
  EXPECT_EQ(m.sign, 1);  // tie keeps the lowest outcome index
  EXPECT_THROW(multi_outcome_merge({}), std::invalid_argument);
}

MatchedSet make_set(int id, std::vector<double> outcomes, int treated) {
  MatchedSet s;
  s.id = id;
  s.covariates = Eigen::VectorXd::Zero(2);
  s.outcomes.resize(static_cast<long>(outcomes.size()), 1);
  for (std::size_t i = 0; i < outcomes.size(); ++i) s.outcomes(static_cast<long>(i), 0) = outcomes[i];
  s.treated = treated;
  return s;
}

TEST(ComputeUnitStats, PairsMatchPairStats) {
  std::vector<MatchedSet> sets{make_set(0, {3.0, 1.0}, 0), make_set(1, {1.0, 4.0}, 0)};
  UnitStatsOptions opt;
  auto units = compute_unit_stats(sets, opt, 7);
  ASSERT_EQ(units.size(), 2u);
  EXPECT_EQ(units[0].sign, 1);
  EXPECT_DOUBLE_EQ(units[0].magnitude, 2.0);
  EXPECT_EQ(units[1].sign, -1);
  EXPECT_DOUBLE_EQ(units[1].magnitude, 3.0);
  EXPECT_EQ(units[0].n_units, 2);
}

TEST(ComputeUnitStats, OrderInvariance) {
  std::vector<MatchedSet> sets{make_set(0, {3.0, 1.0, 2.0}, 0), make_set(1, {1.0, 4.0, 2.0}, 1),
                               make_set(2, {2.0, 2.0, 2.0}, 2)};
  UnitStatsOptions opt;
  auto a = compute_unit_stats(sets, opt, 7);
  std::vector<MatchedSet> rev{sets[2], sets[0], sets[1]};
  auto b = compute_unit_stats(rev, opt, 7);
  for (const auto& ua : a) {
    bool found = false;
    for (const auto& ub : b)
      if (ub.set_id == ua.set_id) {
        EXPECT_EQ(ub.sign, ua.sign);
        EXPECT_DOUBLE_EQ(ub.magnitude, ua.magnitude);
        EXPECT_EQ(ub.rank, ua.rank);
        found = true;
      }
    EXPECT_TRUE(found);
  }
}

TEST(ComputeUnitStats, MultiOutcomeKeepsWholeArgmaxRecord) {
  MatchedSet s = make_set(0, {0.0, 0.0, 0.0}, 0);
  s.outcomes.resize(3, 2);
  // Outcome 0: treated lowest (rank 3). Outcome 1: treated highest with a much
  // larger NP gap, so the merge must keep outcome 1's sign and rank.
  s.outcomes.col(0) << 1.0, 2.0, 3.0;
  s.outcomes.col(1) << 50.0, 10.0, 0.0;
  UnitStatsOptions opt;
  auto units = compute_unit_stats({s}, opt, 11);
  ASSERT_EQ(units.size(), 1u);
  EXPECT_EQ(units[0].sign, 1);
  EXPECT_DOUBLE_EQ(units[0].magnitude, 50.0);
  EXPECT_EQ(units[0].rank, 1);
  EXPECT_EQ(units[0].masked_rank, 1);
}

TEST(TwoSided, BaselineFitAndPipeline) {
  // Controls follow r = 2 + x exactly; ridge shrinks only slightly.
  std::vector<MatchedSet> sets;
  RngStream rng = substream(5, "mk");
  for (int i = 0; i < 200; ++i) {
    MatchedSet s;
    s.id = i;
    s.covariates = Eigen::VectorXd::Constant(1, rng.normal());
    s.outcomes.resize(2, 1);
    double base = 2.0 + s.covariates(0);
    s.treated = 0;
    s.outcomes(0, 0) = base + 3.0;  // treated shifted up
    s.outcomes(1, 0) = base;
    sets.push_back(s);
  }
  RidgeBaseline b = fit_control_baseline(sets);
  EXPECT_NEAR(b.intercept, 2.0, 0.1);
  EXPECT_NEAR(b.coef(0), 1.0, 0.1);

  UnitStatsOptions opt;
  opt.two_sided = true;
  auto units = compute_unit_stats(sets, opt, 5);
  int pos = 0;
  for (const auto& u : units)
    if (u.sign > 0) ++pos;
  // (r1 - r2)(r1 + r2 - 2 r0) = 3 * (3) > 0 up to ridge shrinkage for all sets.
  EXPECT_GT(pos, 190);
}

TEST(TwoSided, RejectsMultiControl) {
  std::vector<MatchedSet> sets{make_set(0, {1.0, 2.0, 3.0}, 0)};
  UnitStatsOptions opt;
  opt.two_sided = true;
  EXPECT_THROW(compute_unit_stats(sets, opt, 1), std::invalid_argument);
}

}  // namespace
