#include "subsel/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "subsel/io.hpp"

namespace subsel {

UnitTable load_units(const std::string& path) {
  std::vector<std::vector<std::string>> raw = read_csv(path);
  if (raw.size() < 2) throw std::runtime_error("load_units: empty table in " + path);
  const auto& header = raw.front();
  int id_col = -1, treat_col = -1;
  std::vector<int> y_cols, x_cols;
  UnitTable t;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    const std::string& h = header[static_cast<std::size_t>(j)];
    if (h == "unit_id") {
      id_col = j;
    } else if (h == "treatment") {
      treat_col = j;
    } else if (h.rfind("y_", 0) == 0) {
      y_cols.push_back(j);
      t.outcome_names.push_back(h);
    } else if (h.rfind("x_", 0) == 0) {
      x_cols.push_back(j);
      t.covariate_names.push_back(h);
    }
  }
  if (id_col < 0 || treat_col < 0 || y_cols.empty() || x_cols.empty())
    throw std::runtime_error("load_units: header must carry unit_id, treatment, y_*, x_*");

  std::vector<std::vector<double>> ys, xs;
  for (std::size_t r = 1; r < raw.size(); ++r) {
    const auto& row = raw[r];
    bool ok = row.size() == header.size();
    int treat = 0;
    std::vector<double> y(y_cols.size()), x(x_cols.size());
    if (ok) {
      try {
        std::size_t used = 0;
        treat = std::stoi(row[static_cast<std::size_t>(treat_col)], &used);
        ok = used == row[static_cast<std::size_t>(treat_col)].size() && (treat == 0 || treat == 1);
        for (std::size_t j = 0; ok && j < y_cols.size(); ++j) {
          y[j] = std::stod(row[static_cast<std::size_t>(y_cols[j])], &used);
          ok = used == row[static_cast<std::size_t>(y_cols[j])].size() && std::isfinite(y[j]);
        }
        for (std::size_t j = 0; ok && j < x_cols.size(); ++j) {
          x[j] = std::stod(row[static_cast<std::size_t>(x_cols[j])], &used);
          ok = used == row[static_cast<std::size_t>(x_cols[j])].size() && std::isfinite(x[j]);
        }
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      ++t.n_dropped;
      continue;
    }
    t.unit_ids.push_back(row[static_cast<std::size_t>(id_col)]);
    t.treatment.push_back(treat);
    ys.push_back(std::move(y));
    xs.push_back(std::move(x));
  }
  if (t.unit_ids.empty()) throw std::runtime_error("load_units: no usable rows in " + path);
  t.outcomes.resize(static_cast<long>(ys.size()), static_cast<long>(y_cols.size()));
  t.covariates.resize(static_cast<long>(xs.size()), static_cast<long>(x_cols.size()));
  for (std::size_t i = 0; i < ys.size(); ++i) {
    for (std::size_t j = 0; j < y_cols.size(); ++j) t.outcomes(static_cast<long>(i), static_cast<long>(j)) = ys[i][j];
    for (std::size_t j = 0; j < x_cols.size(); ++j) t.covariates(static_cast<long>(i), static_cast<long>(j)) = xs[i][j];
  }
  return t;
}

PropensityFit propensity_fit(const Eigen::MatrixXd& covariates, const std::vector<int>& treatment,
                             int max_iter, double tol) {
  long n = covariates.rows(), d = covariates.cols();
  if (n != static_cast<long>(treatment.size()) || n < 2)
    throw std::invalid_argument("propensity_fit: bad input");
  bool has_t = false, has_c = false;
  for (int z : treatment) (z ? has_t : has_c) = true;
  if (!has_t || !has_c) throw std::invalid_argument("propensity_fit: need both classes");

  Eigen::MatrixXd x(n, d + 1);
  x.col(0).setOnes();
  x.rightCols(d) = covariates;
  Eigen::VectorXd y(n);
  for (long i = 0; i < n; ++i) y(i) = treatment[static_cast<std::size_t>(i)];

  auto run = [&](double ridge, PropensityFit& fit) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
    for (int it = 1; it <= max_iter; ++it) {
      Eigen::VectorXd eta = x * beta;
      Eigen::VectorXd p = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
      Eigen::VectorXd w = (p.array() * (1.0 - p.array())).max(1e-12).matrix();
      Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
      h.diagonal().array() += ridge;
      Eigen::VectorXd g = x.transpose() * (y - p);
      if (ridge > 0.0) g -= ridge * beta;
      Eigen::VectorXd step = h.ldlt().solve(g);
      if (!step.allFinite()) return false;
      beta += step;
      if (!beta.allFinite() || beta.lpNorm<Eigen::Infinity>() > 1e6) return false;
      if (step.lpNorm<Eigen::Infinity>() < tol) {
        fit.coef = beta;
        fit.iterations = it;
        return true;
      }
    }
    return false;
  };

  PropensityFit fit;
  if (!run(0.0, fit)) {
    fit.ridged = true;
    if (!run(1e-6, fit))
      throw std::runtime_error("propensity_fit: no convergence after ridge fallback");
  }
  fit.logits = x * fit.coef;
  fit.probs = (1.0 / (1.0 + (-fit.logits.array()).exp())).matrix();
  return fit;
}

MatchOutput nn_match(const UnitTable& table, const PropensityFit& fit, const MatchConfig& cfg) {
  if (cfg.controls_per_set < 1) throw std::invalid_argument("nn_match: k must be >= 1");
  long n = table.covariates.rows();
  if (fit.logits.size() != n) throw std::invalid_argument("nn_match: fit does not match table");

  double mean = fit.logits.mean();
  double sd = std::sqrt((fit.logits.array() - mean).square().sum() / std::max<long>(1, n - 1));
  double radius = cfg.caliper * sd;

  std::vector<int> treated, controls;
  for (long i = 0; i < n; ++i)
    (table.treatment[static_cast<std::size_t>(i)] ? treated : controls).push_back(static_cast<int>(i));
  std::sort(treated.begin(), treated.end(), [&](int a, int b) {
    if (fit.logits(a) != fit.logits(b)) return fit.logits(a) > fit.logits(b);
    return a < b;
  });

  std::vector<char> used(static_cast<std::size_t>(n), 0);
  MatchOutput out;
  int set_id = 0;
  for (int t : treated) {
    // k nearest unused controls by logit distance, ties toward the lower index.
    std::vector<std::pair<double, int>> cand;
    for (int c : controls) {
      if (used[static_cast<std::size_t>(c)]) continue;
      double dist = std::abs(fit.logits(c) - fit.logits(t));
      if (dist <= radius) cand.emplace_back(dist, c);
    }
    if (static_cast<int>(cand.size()) < cfg.controls_per_set) {
      out.unmatched_treated.push_back(t);
      continue;
    }
    std::sort(cand.begin(), cand.end());
    MatchedSet s;
    s.id = set_id++;
    s.treated = 0;
    s.covariates = table.covariates.row(t).transpose();
    s.outcomes.resize(cfg.controls_per_set + 1, table.outcomes.cols());
    s.outcomes.row(0) = table.outcomes.row(t);
    s.unit_ids.push_back(table.unit_ids[static_cast<std::size_t>(t)]);
    for (int j = 0; j < cfg.controls_per_set; ++j) {
      int c = cand[static_cast<std::size_t>(j)].second;
      used[static_cast<std::size_t>(c)] = 1;
      s.outcomes.row(j + 1) = table.outcomes.row(c);
      s.unit_ids.push_back(table.unit_ids[static_cast<std::size_t>(c)]);
    }
    out.sets.push_back(std::move(s));
  }
  if (out.sets.empty()) throw std::runtime_error("nn_match: no matchable treated units");
  return out;
}

namespace {

Eigen::VectorXd smd(const Eigen::MatrixXd& xt, const Eigen::MatrixXd& xc) {
  Eigen::RowVectorXd mt = xt.colwise().mean();
  Eigen::RowVectorXd mc = xc.colwise().mean();
  Eigen::RowVectorXd vt =
      (xt.rowwise() - mt).array().square().colwise().sum() / std::max<double>(1.0, static_cast<double>(xt.rows() - 1));
  Eigen::RowVectorXd vc =
      (xc.rowwise() - mc).array().square().colwise().sum() / std::max<double>(1.0, static_cast<double>(xc.rows() - 1));
  Eigen::VectorXd out(xt.cols());
  for (long j = 0; j < xt.cols(); ++j) {
    double pooled = std::sqrt(0.5 * (vt(j) + vc(j)));
    out(j) = pooled > 0.0 ? std::abs(mt(j) - mc(j)) / pooled : 0.0;
  }
  return out;
}

}  // namespace

Eigen::VectorXd smd_pre(const UnitTable& table) {
  std::vector<int> t, c;
  for (std::size_t i = 0; i < table.treatment.size(); ++i)
    (table.treatment[i] ? t : c).push_back(static_cast<int>(i));
  Eigen::MatrixXd xt(t.size(), table.covariates.cols()), xc(c.size(), table.covariates.cols());
  for (std::size_t i = 0; i < t.size(); ++i) xt.row(static_cast<long>(i)) = table.covariates.row(t[i]);
  for (std::size_t i = 0; i < c.size(); ++i) xc.row(static_cast<long>(i)) = table.covariates.row(c[i]);
  return smd(xt, xc);
}

Eigen::VectorXd smd_post(const UnitTable& table, const MatchOutput& match) {
  // Covariates come from the original table rows via stored unit ids.
  auto find_row = [&](const std::string& id) {
    for (std::size_t i = 0; i < table.unit_ids.size(); ++i)
      if (table.unit_ids[i] == id) return static_cast<int>(i);
    throw std::invalid_argument("smd_post: unknown unit id " + id);
  };
  std::vector<int> t, c;
  for (const auto& s : match.sets) {
    for (std::size_t j = 0; j < s.unit_ids.size(); ++j) {
      int row = find_row(s.unit_ids[j]);
      (static_cast<int>(j) == s.treated ? t : c).push_back(row);
    }
  }
  Eigen::MatrixXd xt(t.size(), table.covariates.cols()), xc(c.size(), table.covariates.cols());
  for (std::size_t i = 0; i < t.size(); ++i) xt.row(static_cast<long>(i)) = table.covariates.row(t[i]);
  for (std::size_t i = 0; i < c.size(); ++i) xc.row(static_cast<long>(i)) = table.covariates.row(c[i]);
  return smd(xt, xc);
}

}  // namespace subsel
