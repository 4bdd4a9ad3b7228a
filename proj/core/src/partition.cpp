#include "subsel/partition.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace subsel {

Partition random_partition(const std::vector<std::uint8_t>& important, int n_groups,
                           double p_important, RngStream& rng) {
  int n = static_cast<int>(important.size());
  if (n_groups < 1 || n_groups > n) throw std::invalid_argument("random_partition: bad group count");
  if (!(p_important >= 0.0 && p_important <= 1.0))
    throw std::invalid_argument("random_partition: p_important outside [0,1]");
  std::vector<int> imp, unimp;
  for (int i = 0; i < n; ++i) (important[static_cast<std::size_t>(i)] ? imp : unimp).push_back(i);
  int k1 = static_cast<int>(std::floor(static_cast<double>(n_groups) * p_important));
  int k0 = n_groups - k1;
  if ((k1 == 0) != imp.empty() || k1 > static_cast<int>(imp.size()))
    throw std::invalid_argument("random_partition: important stratum cannot fill its groups");
  if ((k0 == 0) != unimp.empty() || k0 > static_cast<int>(unimp.size()))
    throw std::invalid_argument("random_partition: unimportant stratum cannot fill its groups");

  Partition p;
  p.group_of.assign(static_cast<std::size_t>(n), -1);
  p.n_groups = n_groups;
  rng.shuffle(imp);
  rng.shuffle(unimp);
  for (std::size_t i = 0; i < imp.size(); ++i)
    p.group_of[static_cast<std::size_t>(imp[i])] = static_cast<int>(i % static_cast<std::size_t>(k1));
  for (std::size_t i = 0; i < unimp.size(); ++i)
    p.group_of[static_cast<std::size_t>(unimp[i])] =
        k1 + static_cast<int>(i % static_cast<std::size_t>(k0));
  return p;
}

namespace {

struct TreeNode {
  std::vector<int> rows;
  int depth = 0;
};

double node_sse(const Eigen::VectorXd& y, const std::vector<int>& rows) {
  double mean = 0.0;
  for (int r : rows) mean += y(r);
  mean /= static_cast<double>(rows.size());
  double sse = 0.0;
  for (int r : rows) sse += (y(r) - mean) * (y(r) - mean);
  return sse;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double rel_gain = 0.0;
  bool found = false;
};

SplitChoice best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const std::vector<int>& rows, const TreeConfig& cfg, double sse_parent) {
  SplitChoice best;
  int n = static_cast<int>(rows.size());
  for (int j = 0; j < x.cols(); ++j) {
    std::vector<std::pair<double, double>> fv(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      fv[static_cast<std::size_t>(i)] = {x(rows[static_cast<std::size_t>(i)], j), y(rows[static_cast<std::size_t>(i)])};
    std::sort(fv.begin(), fv.end());

    std::vector<double> cand;
    if (cfg.median_only) {
      double med = fv[static_cast<std::size_t>((n - 1) / 2)].first;
      cand.push_back(med);
    } else {
      std::vector<double> uniq;
      for (const auto& [v, yy] : fv)
        if (uniq.empty() || v != uniq.back()) uniq.push_back(v);
      if (uniq.size() < 2) continue;
      std::vector<double> mids;
      for (std::size_t u = 0; u + 1 < uniq.size(); ++u) mids.push_back(0.5 * (uniq[u] + uniq[u + 1]));
      if (static_cast<int>(mids.size()) <= cfg.max_thresholds) {
        cand = mids;
      } else {
        for (int t = 0; t < cfg.max_thresholds; ++t) {
          std::size_t pos = static_cast<std::size_t>(
              (static_cast<double>(t) + 0.5) / cfg.max_thresholds * static_cast<double>(mids.size()));
          cand.push_back(mids[std::min(pos, mids.size() - 1)]);
        }
      }
    }

    // Prefix sums over the sorted order give O(1) SSE per candidate.
    std::vector<double> cum_y(static_cast<std::size_t>(n) + 1, 0.0), cum_y2(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i) {
      cum_y[static_cast<std::size_t>(i) + 1] = cum_y[static_cast<std::size_t>(i)] + fv[static_cast<std::size_t>(i)].second;
      cum_y2[static_cast<std::size_t>(i) + 1] =
          cum_y2[static_cast<std::size_t>(i)] + fv[static_cast<std::size_t>(i)].second * fv[static_cast<std::size_t>(i)].second;
    }
    for (double thr : cand) {
      int nl = static_cast<int>(std::upper_bound(fv.begin(), fv.end(), thr,
                                                 [](double t, const std::pair<double, double>& e) {
                                                   return t < e.first;
                                                 }) -
                                fv.begin());
      int nr = n - nl;
      if (nl < cfg.minbucket || nr < cfg.minbucket) continue;
      double sl = cum_y[static_cast<std::size_t>(nl)];
      double sl2 = cum_y2[static_cast<std::size_t>(nl)];
      double sr = cum_y[static_cast<std::size_t>(n)] - sl;
      double sr2 = cum_y2[static_cast<std::size_t>(n)] - sl2;
      double sse_l = sl2 - sl * sl / nl;
      double sse_r = sr2 - sr * sr / nr;
      double rel = (sse_parent - sse_l - sse_r) / sse_parent;
      if (rel >= cfg.gain_threshold && (!best.found || rel > best.rel_gain + 1e-15))
        best = {j, thr, rel, true};
    }
  }
  return best;
}

void grow(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeConfig& cfg, TreeNode node,
          std::vector<int>& leaf_of, int& next_leaf, std::ostringstream& text) {
  std::string indent(static_cast<std::size_t>(node.depth) * 2, ' ');
  double sse = node_sse(y, node.rows);
  bool leaf = static_cast<int>(node.rows.size()) < cfg.minsplit || node.depth >= cfg.maxdepth ||
              sse <= 0.0;
  SplitChoice split;
  if (!leaf) {
    split = best_split(x, y, node.rows, cfg, sse);
    leaf = !split.found;
  }
  if (leaf) {
    for (int r : node.rows) leaf_of[static_cast<std::size_t>(r)] = next_leaf;
    text << indent << "leaf group=" << next_leaf << " n=" << node.rows.size() << "\n";
    ++next_leaf;
    return;
  }
  text << indent << "split x" << split.feature + 1 << " <= " << split.threshold
       << " n=" << node.rows.size() << " gain=" << split.rel_gain << "\n";
  TreeNode left{{}, node.depth + 1}, right{{}, node.depth + 1};
  for (int r : node.rows)
    (x(r, split.feature) <= split.threshold ? left.rows : right.rows).push_back(r);
  grow(x, y, cfg, std::move(left), leaf_of, next_leaf, text);
  grow(x, y, cfg, std::move(right), leaf_of, next_leaf, text);
}

}  // namespace

Partition tree_partition(const Eigen::MatrixXd& covariates, const Eigen::VectorXd& response,
                         const TreeConfig& cfg) {
  if (covariates.rows() != response.size())
    throw std::invalid_argument("tree_partition: rows mismatch");
  if (covariates.rows() < 1) throw std::invalid_argument("tree_partition: empty input");
  if (cfg.minbucket < 1 || cfg.minsplit < 2 || cfg.maxdepth < 0 || cfg.gain_threshold < 0.0)
    throw std::invalid_argument("tree_partition: bad config");
  int n = static_cast<int>(covariates.rows());
  std::vector<int> leaf_of(static_cast<std::size_t>(n), -1);
  int next_leaf = 0;
  std::ostringstream text;
  TreeNode root;
  root.rows.resize(static_cast<std::size_t>(n));
  std::iota(root.rows.begin(), root.rows.end(), 0);
  grow(covariates, response, cfg, std::move(root), leaf_of, next_leaf, text);
  Partition p;
  p.group_of = leaf_of;
  p.n_groups = next_leaf;
  p.tree_text = text.str();
  return p;
}

std::vector<int> covariate_screen(const Eigen::MatrixXd& covariates,
                                  const Eigen::VectorXd& response, int keep) {
  int n = static_cast<int>(covariates.rows());
  int d = static_cast<int>(covariates.cols());
  if (n != response.size() || n < 3) throw std::invalid_argument("covariate_screen: bad input");
  if (keep < 1 || keep > d) throw std::invalid_argument("covariate_screen: keep outside [1,d]");

  // Joint fit with an intercept. Collinear columns are dropped (ranked last)
  // so the coefficient covariance stays well defined.
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = covariates;
  Eigen::MatrixXd basis(n, d + 1);
  basis.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<int> kept;  // covariate indices in the fit, in column order
  std::vector<char> dropped(static_cast<std::size_t>(d), 0);
  int r = 1;
  for (int j = 1; j <= d; ++j) {
    Eigen::VectorXd v = design.col(j);
    double norm0 = std::max(1.0, v.norm());
    v -= basis.leftCols(r) * (basis.leftCols(r).transpose() * v);
    v -= basis.leftCols(r) * (basis.leftCols(r).transpose() * v);
    if (v.norm() <= 1e-9 * norm0) {
      dropped[static_cast<std::size_t>(j - 1)] = 1;
      continue;
    }
    basis.col(r) = v / v.norm();
    kept.push_back(j - 1);
    ++r;
  }
  for (int j = 0; j < d; ++j)
    if (dropped[static_cast<std::size_t>(j)])
      std::cerr << "covariate_screen: dropping collinear column " << j << "\n";
  int dof = n - r;
  if (dof < 1) throw std::invalid_argument("covariate_screen: more columns than rows allow");

  Eigen::MatrixXd xk(n, r);
  xk.col(0).setOnes();
  for (std::size_t i = 0; i < kept.size(); ++i) xk.col(static_cast<long>(i) + 1) = covariates.col(kept[i]);
  Eigen::MatrixXd xtx = xk.transpose() * xk;
  Eigen::VectorXd beta = xtx.ldlt().solve(xk.transpose() * response);
  double rss = (response - xk * beta).squaredNorm();
  double sigma2 = rss / static_cast<double>(dof);
  Eigen::MatrixXd cov = sigma2 * xtx.inverse();

  std::vector<std::pair<double, int>> ranked;
  boost::math::students_t dist(static_cast<double>(dof));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    double var = cov(static_cast<long>(i) + 1, static_cast<long>(i) + 1);
    double pval = 0.0;
    if (var > 0.0) {
      double t = std::abs(beta(static_cast<long>(i) + 1)) / std::sqrt(var);
      pval = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    }
    ranked.emplace_back(pval, kept[i]);
  }
  for (int j = 0; j < d; ++j)
    if (dropped[static_cast<std::size_t>(j)]) ranked.emplace_back(1.0, j);
  std::sort(ranked.begin(), ranked.end());
  std::vector<int> out;
  for (int j = 0; j < keep; ++j) out.push_back(ranked[static_cast<std::size_t>(j)].second);
  return out;
}

}  // namespace subsel
