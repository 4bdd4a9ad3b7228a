#include "subsel/unit_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace subsel {

PairStats pair_stats(double r1, double r2, int z1, int z2) {
  if (z1 + z2 != 1 || z1 < 0 || z2 < 0) throw std::invalid_argument("pair needs one treated unit");
  double diff = (r1 - r2) * static_cast<double>(z1 - z2);
  PairStats out;
  out.magnitude = std::abs(r1 - r2);
  out.sign = diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
  return out;
}

RankResult treated_rank(const std::vector<double>& outcomes, int treated, RngStream& rng) {
  int n = static_cast<int>(outcomes.size());
  if (n < 2) throw std::invalid_argument("treated_rank: set size must be >= 2");
  if (treated < 0 || treated >= n) throw std::invalid_argument("treated_rank: index out of range");
  // One key per unit, always drawn, so the stream stays aligned across sets
  // with and without ties.
  std::vector<double> key(outcomes.size());
  for (double& k : key) k = rng.u01();
  std::vector<int> order(outcomes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (outcomes[a] != outcomes[b]) return outcomes[a] > outcomes[b];
    return key[a] < key[b];
  });
  RankResult out;
  out.sorted.resize(outcomes.size());
  for (int i = 0; i < n; ++i) {
    out.sorted[static_cast<std::size_t>(i)] = outcomes[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    if (order[static_cast<std::size_t>(i)] == treated) out.rank = i + 1;
  }
  out.partner = n + 1 - out.rank;
  return out;
}

int sign_from_rank(int rank, int n) {
  if (rank < 1 || rank > n) throw std::invalid_argument("sign_from_rank: rank out of range");
  if (rank <= n / 2) return 1;
  if (rank >= (n + 1) / 2 + 1) return -1;
  return 0;
}

int masked_rank(int rank, int n) {
  if (rank < 1 || rank > n) throw std::invalid_argument("masked_rank: rank out of range");
  return std::min(rank, n + 1 - rank);
}

double magnitude_from_ranks(Magnitude variant, const std::vector<double>& sorted_desc, int rank) {
  int n = static_cast<int>(sorted_desc.size());
  if (rank < 1 || rank > n) throw std::invalid_argument("magnitude: rank out of range");
  auto at = [&](int pos) { return sorted_desc[static_cast<std::size_t>(pos - 1)]; };
  switch (variant) {
    case Magnitude::Max:
      return at(1);
    case Magnitude::TopGap:
      return n >= 2 ? at(1) - at(2) : 0.0;
    case Magnitude::MedSplit:
      return n >= 2 ? at(1) - at(std::max(1, n / 2)) : 0.0;
    case Magnitude::Np: {
      int a = std::min(rank, n + 1 - rank);
      int b = std::max(rank, n + 1 - rank);
      return at(a) - at(b);  // 0 when the masked rank pins a single position
    }
  }
  return 0.0;
}

PairStats two_sided_transform(double r1, double r2, int z1, double r0) {
  if (z1 != 0 && z1 != 1) throw std::invalid_argument("two_sided_transform: z1 must be 0/1");
  double y = (r1 - r2) * (r1 + r2 - 2.0 * r0) * static_cast<double>(2 * z1 - 1);
  PairStats out;
  out.magnitude = std::abs(y);
  out.sign = y > 0.0 ? 1 : (y < 0.0 ? -1 : 0);
  return out;
}

RidgeBaseline fit_control_baseline(const std::vector<MatchedSet>& sets, int outcome,
                                   double lambda) {
  long n = 0;
  long d = sets.empty() ? 0 : sets.front().covariates.size();
  for (const auto& s : sets) n += s.n_units() - 1;
  if (n < 1 || d < 1) throw std::invalid_argument("baseline needs controls and covariates");
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  long r = 0;
  for (const auto& s : sets) {
    for (int j = 0; j < s.n_units(); ++j) {
      if (j == s.treated) continue;
      x.row(r) = s.covariates.transpose();
      y(r) = s.outcomes(j, outcome);
      ++r;
    }
  }
  Eigen::RowVectorXd xm = x.colwise().mean();
  double ym = y.mean();
  Eigen::MatrixXd xc = x.rowwise() - xm;
  Eigen::VectorXd yc = y.array() - ym;
  Eigen::MatrixXd a = xc.transpose() * xc;
  a.diagonal().array() += lambda;
  RidgeBaseline out;
  out.coef = a.ldlt().solve(xc.transpose() * yc);
  out.intercept = ym - xm * out.coef;
  return out;
}

PairStats multi_outcome_merge(const std::vector<PairStats>& per_outcome) {
  if (per_outcome.empty()) throw std::invalid_argument("multi_outcome_merge: empty input");
  std::size_t best = 0;
  for (std::size_t m = 1; m < per_outcome.size(); ++m)
    if (per_outcome[m].magnitude > per_outcome[best].magnitude) best = m;
  return per_outcome[best];
}

UnitStats unit_stats_for_set(const MatchedSet& set, int outcome, const UnitStatsOptions& opt,
                             const RidgeBaseline* baseline, RngStream& rng) {
  validate_set(set);
  UnitStats out;
  out.set_id = set.id;
  out.n_units = set.n_units();
  if (opt.two_sided) {
    if (set.n_units() != 2) throw std::invalid_argument("two-sided transform needs pairs");
    if (baseline == nullptr) throw std::invalid_argument("two-sided transform needs a baseline");
    double r0 = baseline->predict(set.covariates);
    int z1 = set.treated == 0 ? 1 : 0;
    PairStats ps = two_sided_transform(set.outcomes(0, outcome), set.outcomes(1, outcome), z1, r0);
    out.sign = ps.sign;
    out.magnitude = ps.magnitude;
    out.rank = 0;
    out.masked_rank = 1;
    return out;
  }
  std::vector<double> y(static_cast<std::size_t>(set.n_units()));
  for (int j = 0; j < set.n_units(); ++j) y[static_cast<std::size_t>(j)] = set.outcomes(j, outcome);
  RankResult rr = treated_rank(y, set.treated, rng);
  out.rank = rr.rank;
  out.masked_rank = masked_rank(rr.rank, set.n_units());
  out.sign = sign_from_rank(rr.rank, set.n_units());
  out.magnitude = magnitude_from_ranks(opt.variant, rr.sorted, rr.rank);
  return out;
}

std::vector<UnitStats> compute_unit_stats(const std::vector<MatchedSet>& sets,
                                          const UnitStatsOptions& opt, std::uint64_t seed) {
  std::vector<RidgeBaseline> baselines;
  if (opt.two_sided && !sets.empty())
    for (int m = 0; m < sets.front().n_outcomes(); ++m)
      baselines.push_back(fit_control_baseline(sets, m));
  std::vector<UnitStats> out;
  out.reserve(sets.size());
  for (const auto& s : sets) {
    RngStream rng = substream(seed, "ranks", static_cast<std::uint64_t>(s.id));
    // Keep the full stats of the largest-magnitude outcome, ties toward the
    // lowest index (same rule as multi_outcome_merge).
    std::vector<UnitStats> per;
    per.reserve(static_cast<std::size_t>(s.n_outcomes()));
    for (int m = 0; m < s.n_outcomes(); ++m)
      per.push_back(unit_stats_for_set(s, m, opt,
                                       opt.two_sided ? &baselines[static_cast<std::size_t>(m)] : nullptr,
                                       rng));
    std::size_t best = 0;
    for (std::size_t m = 1; m < per.size(); ++m)
      if (per[m].magnitude > per[best].magnitude) best = m;
    out.push_back(per[best]);
  }
  return out;
}

}  // namespace subsel
