#include "subsel/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "subsel/numeric.hpp"

namespace subsel {

SimData gen_dataset(const SimConfig& cfg, std::uint64_t rep) {
  if (cfg.n_sets < 2) throw std::invalid_argument("gen_dataset: need >= 2 sets");
  if (cfg.set_size < 2) throw std::invalid_argument("gen_dataset: need >= 2 units per set");
  if (cfg.d < 2) throw std::invalid_argument("gen_dataset: need >= 2 covariates");
  if (!(cfg.p_important > 0.0 && cfg.p_important < 1.0))
    throw std::invalid_argument("gen_dataset: p_important outside (0,1)");
  if (cfg.n_outcomes < 1) throw std::invalid_argument("gen_dataset: need >= 1 outcome");
  validate_gamma(cfg.gamma);

  int n_sets = cfg.n_sets, n = cfg.set_size, d = cfg.d, m_out = cfg.n_outcomes;
  SimData data;

  // Coefficients fixed per experiment seed, fresh everything else per rep.
  RngStream coef = substream(cfg.seed, "coef");
  data.beta.resize(d, m_out);
  for (int m = 0; m < m_out; ++m)
    for (int j = 0; j < d; ++j) data.beta(j, m) = coef.u01();
  data.eta_coef.resize(d);
  for (int j = 0; j < d; ++j) data.eta_coef(j) = coef.u01();

  RngStream rs = substream(cfg.seed, "rep", rep);
  Eigen::MatrixXd x(n_sets, d);
  for (int i = 0; i < n_sets; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rs.normal();

  std::vector<double> score(static_cast<std::size_t>(n_sets));
  for (int i = 0; i < n_sets; ++i) score[static_cast<std::size_t>(i)] = x(i, 0) + 0.5 * x(i, 1);
  std::vector<double> sorted_score = score;
  std::sort(sorted_score.begin(), sorted_score.end());
  std::size_t cut = static_cast<std::size_t>(
      std::floor((1.0 - cfg.p_important) * static_cast<double>(n_sets)));
  cut = std::min(cut, static_cast<std::size_t>(n_sets - 1));
  double threshold = sorted_score[cut];
  data.important.resize(static_cast<std::size_t>(n_sets));
  for (int i = 0; i < n_sets; ++i)
    data.important[static_cast<std::size_t>(i)] = score[static_cast<std::size_t>(i)] >= threshold ? 1 : 0;

  Eigen::VectorXd z = x * data.eta_coef;
  z.array() -= 1.0;
  double zm = z.mean();
  double zs = std::sqrt((z.array() - zm).square().sum() / std::max(1, n_sets - 1));
  if (zs <= 0.0) zs = 1.0;
  data.tau.resize(static_cast<std::size_t>(n_sets));
  for (int i = 0; i < n_sets; ++i)
    data.tau[static_cast<std::size_t>(i)] = cfg.tau_star * normal_cdf((z(i) - zm) / zs);

  data.effect.setZero(n_sets, m_out);
  data.sets.resize(static_cast<std::size_t>(n_sets));
  for (int i = 0; i < n_sets; ++i) {
    MatchedSet& s = data.sets[static_cast<std::size_t>(i)];
    s.id = i;
    s.covariates = x.row(i).transpose();
    s.outcomes.resize(n, m_out);
    std::vector<double> u(static_cast<std::size_t>(n));
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      u[static_cast<std::size_t>(j)] = rs.u01();
      w[static_cast<std::size_t>(j)] = std::pow(cfg.gamma, u[static_cast<std::size_t>(j)]);
    }
    s.treated = rs.categorical(w);
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < m_out; ++m)
        s.outcomes(j, m) = data.beta.col(m).dot(s.covariates) +
                           cfg.alpha_u * u[static_cast<std::size_t>(j)] + rs.normal();
    if (data.important[static_cast<std::size_t>(i)]) {
      for (int m = 0; m < m_out; ++m) {
        data.effect(i, m) = data.tau[static_cast<std::size_t>(i)];
        s.outcomes(s.treated, m) += data.effect(i, m);
      }
    }
  }
  return data;
}

std::vector<std::uint8_t> two_sided_flip(SimData& data, const Partition& partition,
                                         RngStream& rng) {
  validate_partition(partition, static_cast<int>(data.sets.size()));
  std::vector<std::uint8_t> flipped(static_cast<std::size_t>(partition.n_groups), 0);
  for (int g = 0; g < partition.n_groups; ++g)
    flipped[static_cast<std::size_t>(g)] = rng.bernoulli(0.5) ? 1 : 0;
  for (std::size_t i = 0; i < data.sets.size(); ++i) {
    if (!flipped[static_cast<std::size_t>(partition.group_of[i])]) continue;
    MatchedSet& s = data.sets[i];
    for (int m = 0; m < data.effect.cols(); ++m) {
      s.outcomes(s.treated, m) -= 2.0 * data.effect(static_cast<long>(i), m);
      data.effect(static_cast<long>(i), m) = -data.effect(static_cast<long>(i), m);
    }
  }
  return flipped;
}

void mask_outcomes(SimData& data, double mask_frac, RngStream& rng) {
  if (!(mask_frac >= 0.0 && mask_frac < 1.0))
    throw std::invalid_argument("mask_outcomes: mask_frac outside [0,1)");
  int m_out = static_cast<int>(data.effect.cols());
  if (m_out < 2) throw std::invalid_argument("mask_outcomes: needs >= 2 outcomes");
  int n_mask = static_cast<int>(std::ceil(mask_frac * static_cast<double>(m_out)));
  n_mask = std::min(n_mask, m_out);
  if (n_mask == 0) return;
  std::vector<int> idx(static_cast<std::size_t>(m_out));
  for (std::size_t i = 0; i < data.sets.size(); ++i) {
    for (int m = 0; m < m_out; ++m) idx[static_cast<std::size_t>(m)] = m;
    // Partial Fisher-Yates: the first n_mask entries form a uniform subset.
    for (int t = 0; t < n_mask; ++t) {
      int j = t + static_cast<int>(rng.below(static_cast<std::uint64_t>(m_out - t)));
      std::swap(idx[static_cast<std::size_t>(t)], idx[static_cast<std::size_t>(j)]);
    }
    MatchedSet& s = data.sets[i];
    for (int t = 0; t < n_mask; ++t) {
      int m = idx[static_cast<std::size_t>(t)];
      s.outcomes(s.treated, m) -= data.effect(static_cast<long>(i), m);
      data.effect(static_cast<long>(i), m) = 0.0;
    }
  }
}

std::vector<std::uint8_t> group_nonnull(const SimData& data, const Partition& partition) {
  validate_partition(partition, static_cast<int>(data.sets.size()));
  std::vector<std::uint8_t> out(static_cast<std::size_t>(partition.n_groups), 0);
  for (std::size_t i = 0; i < data.sets.size(); ++i)
    if (data.set_nonnull(static_cast<int>(i))) out[static_cast<std::size_t>(partition.group_of[i])] = 1;
  return out;
}

int scaled_n_sets(int group_size, bool tree) {
  int base = static_cast<int>(std::floor(std::max(1200.0, 200.0 * static_cast<double>(group_size))));
  return tree ? 2 * base : base;
}

}  // namespace subsel
