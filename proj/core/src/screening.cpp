#include "subsel/screening.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "subsel/numeric.hpp"
#include "subsel/rng.hpp"

namespace subsel {

GroupFeatures build_features(const std::vector<MatchedSet>& sets, const Partition& partition,
                             const std::vector<GroupStats>& groups) {
  validate_partition(partition, static_cast<int>(sets.size()));
  if (static_cast<int>(groups.size()) != partition.n_groups)
    throw std::invalid_argument("build_features: groups do not match partition");
  long d = sets.empty() ? 0 : sets.front().covariates.size();
  GroupFeatures f;
  f.x.setZero(partition.n_groups, d + 4);
  f.w_col = static_cast<int>(d);
  f.frac_col = static_cast<int>(d) + 3;
  auto members = partition.groups();
  for (int gid = 0; gid < partition.n_groups; ++gid) {
    const auto& g = groups[static_cast<std::size_t>(gid)];
    const auto& m = members[static_cast<std::size_t>(gid)];
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (int i : m) mean += sets[static_cast<std::size_t>(i)].covariates;
    mean /= static_cast<double>(m.size());
    f.x.row(gid).head(d) = mean.transpose();
    f.x(gid, d) = g.magnitude;
    f.x(gid, d + 1) = static_cast<double>(m.size());
    f.x(gid, d + 2) = static_cast<double>(g.rep_members.size());
    int n_pos = 0;
    for (int s : g.residual_signs)
      if (s > 0) ++n_pos;
    double frac;
    if (!g.residual_signs.empty())
      frac = static_cast<double>(n_pos) / static_cast<double>(g.residual_signs.size());
    else
      frac = g.rep_members.empty() ? 0.0 : 0.5;  // nothing hidden: neutral value
    f.x(gid, f.frac_col) = frac;
  }
  return f;
}

namespace {

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;  // 1 for constant columns

  explicit Standardizer(const Eigen::MatrixXd& x) {
    mean = x.colwise().mean();
    Eigen::MatrixXd c = x.rowwise() - mean;
    scale = (c.array().square().colwise().sum() / std::max<double>(1.0, static_cast<double>(x.rows() - 1)))
                .sqrt();
    for (long j = 0; j < scale.size(); ++j)
      if (scale(j) <= 0.0) scale(j) = 1.0;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
};

// z-score of one column; zero for constant columns.
Eigen::VectorXd zscore(const Eigen::VectorXd& v) {
  double m = v.mean();
  double ss = (v.array() - m).square().sum();
  double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  if (sd <= 0.0) return Eigen::VectorXd::Zero(v.size());
  return (v.array() - m) / sd;
}

}  // namespace

RidgeLogit predictor_fit(const Eigen::MatrixXd& x, const std::vector<int>& rows,
                         const std::vector<int>& labels, double lambda) {
  RidgeLogit model;
  if (rows.size() != labels.size() || rows.empty()) return model;
  Standardizer std_all(x);
  Eigen::MatrixXd z(rows.size(), x.cols());
  Eigen::VectorXd y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    z.row(static_cast<long>(i)) = x.row(rows[i]);
    y(static_cast<long>(i)) = labels[i] > 0 ? 1.0 : 0.0;
  }
  z = std_all.apply(z);
  long p = z.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double b0 = 0.0;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd eta = (z * beta).array() + b0;
    Eigen::VectorXd prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).max(1e-10).matrix();
    Eigen::VectorXd resid = y - prob;
    Eigen::MatrixXd h(p + 1, p + 1);
    h(0, 0) = w.sum();
    h.block(0, 1, 1, p) = (w.asDiagonal() * z).colwise().sum();
    h.block(1, 0, p, 1) = h.block(0, 1, 1, p).transpose();
    h.block(1, 1, p, p) = z.transpose() * w.asDiagonal() * z;
    h.block(1, 1, p, p).diagonal().array() += lambda;
    Eigen::VectorXd g(p + 1);
    g(0) = resid.sum();
    g.tail(p) = z.transpose() * resid - lambda * beta;
    Eigen::VectorXd step = h.ldlt().solve(g);
    if (!step.allFinite()) return model;
    b0 += step(0);
    beta += step.tail(p);
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  if (!beta.allFinite() || !std::isfinite(b0)) return model;
  model.coef = (beta.array() / std_all.scale.transpose().array()).matrix();
  model.intercept = b0 - std_all.mean * model.coef;
  model.ok = true;
  return model;
}

Eigen::VectorXd predictor_score(const RidgeLogit& model, const Eigen::MatrixXd& x) {
  if (!model.ok) throw std::logic_error("predictor_score: model not fitted");
  return (x * model.coef).array() + model.intercept;
}

double fdp_estimate(int n_pos, int n_neg, double kappa, double gamma_split) {
  if (!(kappa > 0.0)) throw std::invalid_argument("fdp_estimate: kappa must be positive");
  if (!(gamma_split > 0.0 && gamma_split <= 1.0))
    throw std::invalid_argument("fdp_estimate: gamma_split outside (0,1]");
  return (kappa / gamma_split) * (1.0 + static_cast<double>(n_neg)) /
         std::max(1.0, static_cast<double>(n_pos));
}

ScreenResult screen(const std::vector<GroupStats>& groups, const GroupFeatures& features,
                    const ScreeningConfig& cfg, bool stop_early) {
  int k_groups = static_cast<int>(groups.size());
  if (k_groups == 0) throw std::invalid_argument("screen: no groups");
  if (features.x.rows() != k_groups) throw std::invalid_argument("screen: feature rows != groups");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("screen: alpha outside (0,1)");
  if (!(cfg.gamma_split > 0.0 && cfg.gamma_split <= 1.0))
    throw std::invalid_argument("screen: gamma_split outside (0,1]");

  double kappa = 0.0;
  for (const auto& g : groups) kappa = std::max(kappa, g.kappa);
  int refit_every = cfg.refit_every > 0 ? cfg.refit_every : std::max(1, (k_groups + 49) / 50);

  ScreenResult res;
  res.trace.xi.assign(static_cast<std::size_t>(k_groups), 0);
  RngStream split = substream(cfg.seed, "split");
  for (int g = 0; g < k_groups; ++g)
    res.trace.xi[static_cast<std::size_t>(g)] = split.bernoulli(cfg.gamma_split) ? 1 : 0;

  // Zero-sign groups take no part in counting, ordering, selection or training.
  std::vector<char> active(static_cast<std::size_t>(k_groups), 1);
  for (int g = 0; g < k_groups; ++g)
    if (groups[static_cast<std::size_t>(g)].sign == 0) active[static_cast<std::size_t>(g)] = 0;

  std::vector<char> screened(static_cast<std::size_t>(k_groups), 0);
  std::vector<int> revealed_rows;
  std::vector<int> revealed_labels;
  for (int g = 0; g < k_groups; ++g) {
    if (!active[static_cast<std::size_t>(g)]) continue;
    if (groups[static_cast<std::size_t>(g)].sign < 0 && res.trace.xi[static_cast<std::size_t>(g)] == 0) {
      screened[static_cast<std::size_t>(g)] = 1;
      revealed_rows.push_back(g);
      revealed_labels.push_back(-1);
      res.trace.initial_screened.push_back(g);
    }
  }

  Eigen::VectorXd scores;
  if (cfg.predictor == ScreeningConfig::Predictor::MagnitudeOnly) {
    if (features.w_col < 0) throw std::invalid_argument("screen: magnitude column missing");
    scores = features.x.col(features.w_col);
  } else {
    scores = zscore(features.x.col(features.w_col)) + zscore(features.x.col(features.frac_col));
  }

  auto both_classes = [&]() {
    bool pos = false, neg = false;
    for (int l : revealed_labels) (l > 0 ? pos : neg) = true;
    return pos && neg;
  };

  int last_removed = -1;
  int since_fit = 0;
  for (int t = 0;; ++t) {
    int n_pos = 0, n_neg = 0;
    for (int g = 0; g < k_groups; ++g) {
      if (!active[static_cast<std::size_t>(g)] || screened[static_cast<std::size_t>(g)]) continue;
      (groups[static_cast<std::size_t>(g)].sign > 0 ? n_pos : n_neg)++;
    }
    double fdp = fdp_estimate(n_pos, n_neg, kappa, cfg.gamma_split);
    res.trace.steps.push_back({t, last_removed, n_pos, n_neg, fdp});

    if (approx_leq(fdp, cfg.alpha)) {
      res.trace.tau = t;
      res.trace.reason = StopReason::FdpBelowAlpha;
      for (int g = 0; g < k_groups; ++g)
        if (active[static_cast<std::size_t>(g)] && !screened[static_cast<std::size_t>(g)] &&
            groups[static_cast<std::size_t>(g)].sign > 0)
          res.selection.push_back(g);
      break;
    }
    if (stop_early &&
        approx_lt(static_cast<double>(n_pos), kappa / (cfg.gamma_split * cfg.alpha))) {
      res.trace.reason = StopReason::NoPossibleStop;
      break;
    }
    if (n_pos + n_neg == 0) {
      res.trace.reason = StopReason::Exhausted;
      break;
    }

    int pick = -1;
    double best = 0.0;
    for (int g = 0; g < k_groups; ++g) {
      if (!active[static_cast<std::size_t>(g)] || screened[static_cast<std::size_t>(g)]) continue;
      double s = scores(g);
      if (pick < 0 || s < best) {
        pick = g;
        best = s;
      }
    }
    screened[static_cast<std::size_t>(pick)] = 1;
    revealed_rows.push_back(pick);
    revealed_labels.push_back(groups[static_cast<std::size_t>(pick)].sign);
    last_removed = pick;
    ++since_fit;

    if (cfg.predictor == ScreeningConfig::Predictor::Adaptive && since_fit >= refit_every &&
        both_classes()) {
      RidgeLogit model = predictor_fit(features.x, revealed_rows, revealed_labels);
      if (model.ok) scores = predictor_score(model, features.x);
      since_fit = 0;
    }
  }
  return res;
}

}  // namespace subsel
