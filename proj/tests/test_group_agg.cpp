#include "subsel/group_agg.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "subsel/numeric.hpp"

namespace {

using namespace subsel;

TEST(BinomialEta, Anchors) {
  EXPECT_EQ(binomial_eta(1, 0.75), 0);
  EXPECT_EQ(binomial_eta(1, 0.5), 0);
  EXPECT_EQ(binomial_eta(2, 0.5), 1);
  EXPECT_EQ(binomial_eta(4, 0.75), 2);  // P(Bin(4,.75) > 2) = 189/256 <= 3/4
  EXPECT_THROW(binomial_eta(2, 0.0), std::invalid_argument);
  EXPECT_THROW(binomial_eta(2, 1.0), std::invalid_argument);
}

TEST(BinomialEta, DefinitionHolds) {
  for (int q = 1; q <= 30; ++q) {
    for (double pstar : {0.5, 0.6, 2.0 / 3.0, 0.75, 0.9}) {
      int eta = binomial_eta(q, pstar);
      EXPECT_LE(binomial_tail_gt(q, pstar, eta), pstar + 1e-12);
      if (eta > 0) EXPECT_GT(binomial_tail_gt(q, pstar, eta - 1), pstar - 1e-12);
      EXPECT_GE(eta, 0);
      EXPECT_LE(eta, q);
    }
  }
}

TEST(GroupKappa, ExactAnchors) {
  EXPECT_DOUBLE_EQ(group_kappa(1, 0.75), 3.0);
  EXPECT_DOUBLE_EQ(group_kappa(1, 0.5), 1.0);
  // Dyadic pstar keeps the tail exact: 189/256 over 67/256.
  EXPECT_DOUBLE_EQ(group_kappa(4, 0.75), 0.73828125 / 0.26171875);
  // Degenerate group: no sign-carrying representatives.
  EXPECT_DOUBLE_EQ(group_kappa(0, 0.75), 3.0);
}

TEST(GroupKappa, BoundedByOdds) {
  for (int q = 1; q <= 50; ++q) {
    for (double gamma : {1.0, 1.5, 2.0, 3.0, 5.0}) {
      double pstar = gamma / (1.0 + gamma);
      double k = group_kappa(q, pstar);
      EXPECT_LE(k, pstar / (1.0 - pstar) + 1e-9) << "q=" << q << " gamma=" << gamma;
      EXPECT_GT(k, 0.0);
    }
  }
}

TEST(UnitMarginalKappa, Anchors) {
  EXPECT_DOUBLE_EQ(unit_marginal_kappa(2, 3.0), 3.0);
  EXPECT_DOUBLE_EQ(unit_marginal_kappa(3, 3.0), 5.0);
  EXPECT_DOUBLE_EQ(unit_marginal_kappa(5, 3.0), 5.0);
  EXPECT_DOUBLE_EQ(unit_marginal_kappa(4, 3.0), 4.0);
  EXPECT_DOUBLE_EQ(unit_marginal_kappa(6, 3.0), 13.0 / 3.0);
  EXPECT_DOUBLE_EQ(unit_marginal_kappa(2, 1.0), 1.0);
  EXPECT_THROW(unit_marginal_kappa(1, 3.0), std::invalid_argument);
  EXPECT_THROW(unit_marginal_kappa(2, 0.5), std::invalid_argument);
}

UnitStats mk(int id, int sign, double w, int n = 2) {
  UnitStats u;
  u.set_id = id;
  u.sign = sign;
  u.magnitude = w;
  u.n_units = n;
  return u;
}

TEST(RepresentativeSet, TopKWithIdTies) {
  std::vector<UnitStats> units{mk(0, 1, 1.0), mk(1, -1, 5.0), mk(2, 1, 3.0)};
  auto q = representative_set(units, 2);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(units[static_cast<std::size_t>(q[0])].set_id, 1);
  EXPECT_EQ(units[static_cast<std::size_t>(q[1])].set_id, 2);

  std::vector<UnitStats> tied{mk(0, 1, 2.0), mk(1, -1, 2.0), mk(2, 1, 2.0)};
  auto q1 = representative_set(tied, 1);
  ASSERT_EQ(q1.size(), 1u);
  EXPECT_EQ(tied[static_cast<std::size_t>(q1[0])].set_id, 0);

  std::vector<UnitStats> solo{mk(0, 1, 7.0)};
  auto qs = representative_set(solo, 1);
  ASSERT_EQ(qs.size(), 1u);
  EXPECT_EQ(qs[0], 0);
}

TEST(DefaultRepSize, FollowsMinGroupRule) {
  EXPECT_EQ(default_rep_size({{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9, 10}}), 2);  // min 5 -> 2
  EXPECT_EQ(default_rep_size({{0}, {1, 2}}), 1);
  EXPECT_EQ(default_rep_size({{0, 1, 2, 3, 4, 5, 6, 7}, {8, 9, 10, 11, 12, 13, 14, 15}}), 4);
  std::vector<std::vector<int>> big(2, std::vector<int>(30));
  EXPECT_EQ(default_rep_size(big), 4);  // capped at 4
}

TEST(AggregateGroup, SignRule) {
  AggregateOptions opt;
  opt.variant = Magnitude::Np;
  opt.rep_size = 4;
  double gamma = 3.0;
  // eta(4, 0.75) = 2: three positives out of four flips the label positive.
  GroupStats g1 = aggregate_group(0, {mk(0, 1, 9.0), mk(1, 1, 8.0), mk(2, 1, 7.0), mk(3, -1, 6.0)},
                                  gamma, opt);
  EXPECT_EQ(g1.sign, 1);
  EXPECT_EQ(g1.eta, 2);
  EXPECT_EQ(g1.rep_nonzero, 4);
  GroupStats g2 = aggregate_group(0, {mk(0, 1, 9.0), mk(1, 1, 8.0), mk(2, -1, 7.0), mk(3, -1, 6.0)},
                                  gamma, opt);
  EXPECT_EQ(g2.sign, -1);
  GroupStats g3 = aggregate_group(0, {mk(0, 1, 9.0)}, 1.0, AggregateOptions{Magnitude::Np, 1, 0.0});
  EXPECT_EQ(g3.sign, 1);  // eta = 0, one positive beats it
}

TEST(AggregateGroup, ZeroSignsLeaveTheBinomialCount) {
  AggregateOptions opt;
  opt.variant = Magnitude::Max;
  opt.rep_size = 3;
  // Two zero-sign units inside the representative set: only one draw counts.
  GroupStats g = aggregate_group(0, {mk(0, 0, 9.0, 3), mk(1, 0, 8.0, 3), mk(2, 1, 7.0, 3), mk(3, -1, 1.0, 3)},
                                 3.0, opt);
  EXPECT_EQ(g.rep_nonzero, 1);
  double pstar = unit_marginal_kappa(3, 3.0) / (1.0 + unit_marginal_kappa(3, 3.0));
  EXPECT_DOUBLE_EQ(g.pstar, pstar);
  EXPECT_EQ(g.eta, binomial_eta(1, pstar));
  EXPECT_DOUBLE_EQ(g.kappa, group_kappa(1, pstar));
  EXPECT_EQ(g.sign, 1);  // one positive > eta = 0
}

TEST(AggregateGroup, AllZeroRepsGiveNegativeLabel) {
  AggregateOptions opt;
  opt.variant = Magnitude::Max;
  opt.rep_size = 2;
  GroupStats g = aggregate_group(0, {mk(0, 0, 9.0, 3), mk(1, 0, 8.0, 3), mk(2, 1, 1.0, 3)}, 3.0, opt);
  EXPECT_EQ(g.rep_nonzero, 0);
  EXPECT_EQ(g.sign, -1);
  EXPECT_EQ(g.eta, 0);
  EXPECT_DOUBLE_EQ(g.kappa, g.pstar / (1.0 - g.pstar));
}

TEST(AggregateGroup, MagnitudeIsRms) {
  AggregateOptions opt;
  opt.variant = Magnitude::Np;
  opt.rep_size = 1;
  GroupStats g = aggregate_group(0, {mk(0, 1, 3.0), mk(1, -1, 4.0)}, 1.0, opt);
  EXPECT_DOUBLE_EQ(g.magnitude, std::sqrt((9.0 + 16.0) / 2.0));

  opt.size_exponent = 0.5;
  GroupStats gs = aggregate_group(0, {mk(0, 1, 3.0), mk(1, -1, 4.0)}, 1.0, opt);
  EXPECT_DOUBLE_EQ(gs.magnitude, std::sqrt(12.5) * std::sqrt(2.0));
}

TEST(AggregateGroup, ResidualSignsAscendingIds) {
  AggregateOptions opt;
  opt.variant = Magnitude::Np;
  opt.rep_size = 1;
  GroupStats g = aggregate_group(3, {mk(9, -1, 1.0), mk(4, 1, 9.0), mk(7, 0, 2.0)}, 3.0, opt);
  EXPECT_EQ(g.group_id, 3);
  ASSERT_EQ(g.rep_members.size(), 1u);
  EXPECT_EQ(g.rep_members[0], 4);
  ASSERT_EQ(g.residual_signs.size(), 2u);
  EXPECT_EQ(g.residual_signs[0], 0);   // set 7
  EXPECT_EQ(g.residual_signs[1], -1);  // set 9
}

TEST(AggregateGroup, SignBlindMagnitudes) {
  AggregateOptions opt;
  opt.variant = Magnitude::Np;
  opt.rep_size = 2;
  // Both representatives positive: eta(2, 3/4) = 1, so two positives flip the
  // label positive and the mirrored data flips it negative.
  std::vector<UnitStats> units{mk(0, -1, 3.0), mk(1, 1, 4.0), mk(2, 1, 5.0)};
  GroupStats g = aggregate_group(0, units, 3.0, opt);
  for (auto& u : units) u.sign = -u.sign;
  GroupStats flipped = aggregate_group(0, units, 3.0, opt);
  EXPECT_DOUBLE_EQ(g.magnitude, flipped.magnitude);
  EXPECT_EQ(g.eta, flipped.eta);
  EXPECT_EQ(g.rep_members, flipped.rep_members);
  EXPECT_EQ(g.sign, 1);
  EXPECT_EQ(flipped.sign, -1);
}

TEST(AggregateGroup, BoundedSkewnessByEnumeration) {
  // P(L=+1) <= kappa * P(L=-1) for every product law inside the odds bounds.
  for (int q : {1, 2, 3, 4, 5, 6}) {
    for (double gamma : {1.0, 2.0, 3.0}) {
      double pstar = gamma / (1.0 + gamma);
      int eta = binomial_eta(q, pstar);
      double kappa = group_kappa(q, pstar);
      for (double p : {1.0 - pstar, 0.5, pstar}) {
        double p_pos = binomial_tail_gt(q, p, eta);
        EXPECT_LE(p_pos, kappa * (1.0 - p_pos) + 1e-12)
            << "q=" << q << " gamma=" << gamma << " p=" << p;
      }
    }
  }
}

TEST(AggregateGroups, PartitionPlumbing) {
  std::vector<UnitStats> units{mk(0, 1, 1.0), mk(1, -1, 2.0), mk(2, 1, 3.0), mk(3, 1, 4.0)};
  Partition part;
  part.group_of = {0, 1, 0, 1};
  part.n_groups = 2;
  auto groups = aggregate_groups(units, part, 3.0, Magnitude::Np);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].group_id, 0);
  EXPECT_EQ(groups[0].members, (std::vector<int>{0, 2}));
  EXPECT_EQ(groups[1].members, (std::vector<int>{1, 3}));
  // default k = max(1, min(4, 2/2)) = 1
  EXPECT_EQ(groups[0].rep_members.size(), 1u);
  EXPECT_EQ(groups[0].rep_members[0], 2);
  EXPECT_THROW(aggregate_group(0, {}, 3.0, AggregateOptions{}), std::invalid_argument);
}

}  // namespace
