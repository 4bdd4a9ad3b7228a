#include "subsel/group_agg.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "subsel/numeric.hpp"

namespace subsel {

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

// P(Bin(q, p) > t) in exact rational arithmetic. The threshold definition
// compares this tail against p itself, and the two are exactly equal in
// boundary cases (q = 1 at t = 0, odd q at p = 1/2), so floating accumulation
// cannot decide the comparison reliably.
cpp_rational exact_tail_gt(int q, const cpp_rational& p, int t) {
  cpp_rational comp = 1 - p;
  cpp_rational term = 1;
  for (int i = 0; i < q; ++i) term *= p;  // pmf at k = q
  cpp_rational tail = 0;
  cpp_int coef = 1;
  for (int k = q; k > t; --k) {
    tail += cpp_rational(coef) * term;
    term *= comp;
    term /= p;
    coef *= k;
    coef /= q - k + 1;
  }
  return tail;
}

}  // namespace

int binomial_eta(int q, double pstar) {
  if (q < 0) throw std::invalid_argument("binomial_eta: q < 0");
  if (!(pstar > 0.0 && pstar < 1.0)) throw std::invalid_argument("binomial_eta: pstar outside (0,1)");
  cpp_rational p(pstar);
  for (int t = 0; t <= q; ++t)
    if (exact_tail_gt(q, p, t) <= p) return t;
  return q;
}

double group_kappa(int q, double pstar) {
  if (!(pstar > 0.0 && pstar < 1.0)) throw std::invalid_argument("group_kappa: pstar outside (0,1)");
  if (q <= 0) return pstar / (1.0 - pstar);
  cpp_rational p(pstar);
  int eta = binomial_eta(q, pstar);
  cpp_rational tail = exact_tail_gt(q, p, eta);
  return (tail / (1 - tail)).convert_to<double>();
}

double unit_marginal_kappa(int n, double gamma) {
  validate_gamma(gamma);
  if (n < 2) throw std::invalid_argument("unit_marginal_kappa: set size must be >= 2");
  double half = static_cast<double>(n / 2);
  return (static_cast<double>(n - 1) * (gamma - 1.0) + half) / half;
}

std::vector<int> representative_set(const std::vector<UnitStats>& units, int k) {
  std::vector<int> idx(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const auto& ua = units[static_cast<std::size_t>(a)];
    const auto& ub = units[static_cast<std::size_t>(b)];
    if (ua.magnitude != ub.magnitude) return ua.magnitude > ub.magnitude;
    return ua.set_id < ub.set_id;
  });
  k = std::min<int>(k, static_cast<int>(units.size()));
  if (k < 0) throw std::invalid_argument("representative_set: k < 0");
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

int default_rep_size(const std::vector<std::vector<int>>& groups) {
  if (groups.empty()) throw std::invalid_argument("default_rep_size: no groups");
  std::size_t min_size = groups.front().size();
  for (const auto& g : groups) min_size = std::min(min_size, g.size());
  int k = std::min<int>(4, static_cast<int>(min_size / 2));
  return std::max(1, k);
}

GroupStats aggregate_group(int group_id, const std::vector<UnitStats>& units, double gamma,
                           const AggregateOptions& opt) {
  validate_gamma(gamma);
  if (units.empty()) throw std::invalid_argument("aggregate_group: empty group");
  GroupStats g;
  g.group_id = group_id;

  std::vector<UnitStats> sorted = units;
  std::sort(sorted.begin(), sorted.end(),
            [](const UnitStats& a, const UnitStats& b) { return a.set_id < b.set_id; });
  for (const auto& u : sorted) g.members.push_back(u.set_id);

  int max_n = 2;
  for (const auto& u : sorted) max_n = std::max(max_n, u.n_units);
  double unit_odds = opt.variant == Magnitude::Np ? gamma : unit_marginal_kappa(max_n, gamma);
  g.pstar = unit_odds / (1.0 + unit_odds);

  std::vector<int> rep = representative_set(sorted, opt.rep_size);
  std::vector<char> in_rep(sorted.size(), 0);
  for (int i : rep) in_rep[static_cast<std::size_t>(i)] = 1;
  int n_pos = 0;
  for (int i : rep) {
    const auto& u = sorted[static_cast<std::size_t>(i)];
    g.rep_members.push_back(u.set_id);
    if (u.sign != 0) ++g.rep_nonzero;
    if (u.sign > 0) ++n_pos;
  }
  std::sort(g.rep_members.begin(), g.rep_members.end());

  g.eta = g.rep_nonzero > 0 ? binomial_eta(g.rep_nonzero, g.pstar) : 0;
  g.sign = n_pos > g.eta ? 1 : -1;
  g.kappa = group_kappa(g.rep_nonzero, g.pstar);

  double sum_sq = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!in_rep[i]) g.residual_signs.push_back(sorted[i].sign);
    sum_sq += sorted[i].magnitude * sorted[i].magnitude;
  }
  g.magnitude = std::sqrt(sum_sq / static_cast<double>(sorted.size()));
  if (opt.size_exponent != 0.0)
    g.magnitude *= std::pow(static_cast<double>(sorted.size()), opt.size_exponent);
  return g;
}

std::vector<GroupStats> aggregate_groups(const std::vector<UnitStats>& units,
                                         const Partition& partition, double gamma,
                                         Magnitude variant, double size_exponent,
                                         int rep_size_override) {
  validate_partition(partition, static_cast<int>(units.size()));
  auto groups = partition.groups();
  AggregateOptions opt;
  opt.variant = variant;
  opt.size_exponent = size_exponent;
  opt.rep_size = rep_size_override > 0 ? rep_size_override : default_rep_size(groups);
  std::vector<GroupStats> out;
  out.reserve(groups.size());
  for (int gid = 0; gid < partition.n_groups; ++gid) {
    std::vector<UnitStats> members;
    for (int i : groups[static_cast<std::size_t>(gid)]) members.push_back(units[static_cast<std::size_t>(i)]);
    out.push_back(aggregate_group(gid, members, gamma, opt));
  }
  return out;
}

}  // namespace subsel
