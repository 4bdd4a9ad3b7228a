#include "subsel/pvalues.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "subsel/numeric.hpp"
#include "subsel/types.hpp"

namespace subsel {

namespace {

// Integer grid scale that makes every weight integral, or 0 when none works.
int integral_scale(const std::vector<double>& weights) {
  for (int scale : {1, 2}) {
    bool ok = true;
    for (double w : weights) {
      double s = w * scale;
      if (std::abs(s - std::round(s)) > 1e-9 * std::max(1.0, std::abs(s))) {
        ok = false;
        break;
      }
    }
    if (ok) return scale;
  }
  return 0;
}

}  // namespace

SumDist weighted_sign_sum_dist(const std::vector<double>& probs,
                               const std::vector<double>& weights) {
  if (probs.size() != weights.size()) throw std::invalid_argument("sum dist: size mismatch");
  for (double w : weights)
    if (w < 0.0) throw std::invalid_argument("sum dist: negative weight");
  std::size_t m = weights.size();
  int scale = integral_scale(weights);
  SumDist out;
  if (scale > 0) {
    long total = 0;
    for (double w : weights) total += static_cast<long>(std::llround(w * scale));
    std::vector<double> dp(static_cast<std::size_t>(total) + 1, 0.0);
    dp[0] = 1.0;
    long used = 0;
    for (std::size_t i = 0; i < m; ++i) {
      long wi = static_cast<long>(std::llround(weights[i] * scale));
      used += wi;
      for (long s = used; s >= 0; --s) {
        double stay = dp[static_cast<std::size_t>(s)] * (1.0 - probs[i]);
        double move = s >= wi ? dp[static_cast<std::size_t>(s - wi)] * probs[i] : 0.0;
        dp[static_cast<std::size_t>(s)] = stay + move;
      }
    }
    for (long s = 0; s <= total; ++s) {
      if (dp[static_cast<std::size_t>(s)] <= 0.0) continue;
      out.support.push_back(static_cast<double>(s) / scale);
      out.prob.push_back(dp[static_cast<std::size_t>(s)]);
    }
    return out;
  }
  if (m > 25) throw std::invalid_argument("sum dist: too many non-grid weights");
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(std::size_t{1} << m);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    double s = 0.0, p = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if ((mask >> i) & 1) {
        s += weights[i];
        p *= probs[i];
      } else {
        p *= 1.0 - probs[i];
      }
    }
    atoms.emplace_back(s, p);
  }
  std::sort(atoms.begin(), atoms.end());
  for (const auto& [s, p] : atoms) {
    if (!out.support.empty() && std::abs(s - out.support.back()) <= 1e-9 * std::max(1.0, std::abs(s)))
      out.prob.back() += p;
    else {
      out.support.push_back(s);
      out.prob.push_back(p);
    }
  }
  return out;
}

PValue signed_rank_sensitivity_pvalue(const std::vector<int>& signs,
                                      const std::vector<double>& weights, double gamma,
                                      bool randomized, RngStream* rng, int exact_limit) {
  validate_gamma(gamma);
  if (signs.size() != weights.size()) throw std::invalid_argument("pvalue: size mismatch");
  if (randomized && rng == nullptr) throw std::invalid_argument("pvalue: randomized needs rng");
  std::vector<double> w;
  double s_obs = 0.0;
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] == 0) continue;
    if (weights[i] < 0.0) throw std::invalid_argument("pvalue: negative weight");
    w.push_back(weights[i]);
    if (signs[i] > 0) s_obs += weights[i];
  }
  double pstar = gamma / (1.0 + gamma);
  PValue out;
  out.randomized = randomized;
  std::size_t m = w.size();
  double u = randomized ? rng->u01() : 0.0;
  if (m == 0) {
    out.value = randomized ? u : 1.0;
    return out;
  }
  if (static_cast<int>(m) <= exact_limit) {
    out.mode = PValueMode::Exact;
    std::vector<double> probs(m, pstar);
    SumDist dist = weighted_sign_sum_dist(probs, w);
    double tol = 1e-9 * std::max(1.0, std::abs(s_obs));
    double p_gt = 0.0, p_eq = 0.0;
    for (std::size_t k = 0; k < dist.support.size(); ++k) {
      if (dist.support[k] > s_obs + tol)
        p_gt += dist.prob[k];
      else if (dist.support[k] >= s_obs - tol)
        p_eq += dist.prob[k];
    }
    out.value = randomized ? p_gt + u * p_eq : p_gt + p_eq;
  } else {
    out.mode = PValueMode::NormalApprox;
    double sum_w = std::accumulate(w.begin(), w.end(), 0.0);
    double sum_w2 = 0.0;
    double sum_w3 = 0.0;
    double w_min = w.front();
    for (double x : w) {
      sum_w2 += x * x;
      sum_w3 += x * x * x;
      w_min = std::min(w_min, x);
    }
    double mu = pstar * sum_w;
    double sigma = std::sqrt(pstar * (1.0 - pstar) * sum_w2);
    if (sigma <= 0.0) {
      out.value = 1.0;
      return out;
    }
    // Skewed when pstar != 1/2; one Edgeworth term keeps the tail honest.
    double skew = pstar * (1.0 - pstar) * (1.0 - 2.0 * pstar) * sum_w3 / (sigma * sigma * sigma);
    auto upper = [&](double z) {
      double phi = std::exp(-0.5 * z * z) / 2.5066282746310002;
      return 1.0 - normal_cdf(z) + phi * (skew / 6.0) * (z * z - 1.0);
    };
    double cc = 0.5 * std::max(w_min, 1e-12);
    double hi = upper((s_obs + cc - mu) / sigma);  // ~ P(S > s_obs)
    double lo = upper((s_obs - cc - mu) / sigma);  // ~ P(S >= s_obs)
    out.value = randomized ? hi + u * std::max(0.0, lo - hi) : lo;
  }
  out.value = std::min(1.0, std::max(0.0, out.value));
  return out;
}

std::vector<double> midranks(const std::vector<double>& values) {
  std::size_t n = values.size();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(values[static_cast<std::size_t>(a)]) < std::abs(values[static_cast<std::size_t>(b)]);
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    double v = std::abs(values[static_cast<std::size_t>(idx[i])]);
    while (j + 1 < n && std::abs(values[static_cast<std::size_t>(idx[j + 1])]) == v) ++j;
    double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[static_cast<std::size_t>(idx[k])] = mid;
    i = j + 1;
  }
  return ranks;
}

std::vector<int> bh_select(const std::vector<double>& pvalues, double alpha) {
  std::size_t n = pvalues.size();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return pvalues[static_cast<std::size_t>(a)] < pvalues[static_cast<std::size_t>(b)]; });
  double cutoff = -1.0;
  for (std::size_t k = n; k >= 1; --k) {
    double p = pvalues[static_cast<std::size_t>(idx[k - 1])];
    if (p <= alpha * static_cast<double>(k) / static_cast<double>(n)) {
      cutoff = p;
      break;
    }
  }
  std::vector<int> out;
  if (cutoff < 0.0) return out;
  for (std::size_t i = 0; i < n; ++i)
    if (pvalues[i] <= cutoff) out.push_back(static_cast<int>(i));
  return out;
}

PscreenStats pscreen_mask(double p, const PscreenConfig& cfg) {
  if (!(cfg.alpha_bar > 0.0 && cfg.alpha_bar <= cfg.lambda && cfg.lambda < cfg.nu && cfg.nu <= 1.0))
    throw std::invalid_argument("pscreen: need 0 < alpha_bar <= lambda < nu <= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("pscreen: p outside [0,1]");
  PscreenStats out;
  if (p < cfg.alpha_bar) {
    out.sign = 1;
    out.magnitude = 1.0 / (cfg.eps + p);
  } else if (p >= cfg.lambda && p <= cfg.nu) {
    out.sign = -1;
    double pseudo = cfg.alpha_bar * (cfg.nu - p) / (cfg.nu - cfg.lambda);
    out.magnitude = 1.0 / (cfg.eps + pseudo);
  } else {
    out.sign = 0;
    out.magnitude = 1.0 / (cfg.eps + p);
  }
  return out;
}

double pscreen_kappa(const PscreenConfig& cfg) { return (cfg.nu - cfg.lambda) / cfg.alpha_bar; }

double combine_pvalues(const std::vector<double>& pvalues, Combine method) {
  if (pvalues.empty()) throw std::invalid_argument("combine: empty input");
  if (method == Combine::Bonferroni) {
    double mn = *std::min_element(pvalues.begin(), pvalues.end());
    return std::min(1.0, mn * static_cast<double>(pvalues.size()));
  }
  double stat = 0.0;
  for (double p : pvalues) stat += -2.0 * std::log(std::max(p, 1e-300));
  boost::math::chi_squared chi(2.0 * static_cast<double>(pvalues.size()));
  return boost::math::cdf(boost::math::complement(chi, stat));
}

std::vector<MirrorRow> mirror_symmetry_check(const std::vector<double>& probs,
                                             const std::vector<double>& weights, double gamma,
                                             bool randomized) {
  validate_gamma(gamma);
  for (double p : probs)
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("mirror: probs must be in (0,1)");
  double pstar = gamma / (1.0 + gamma);
  std::vector<double> null_probs(probs.size(), pstar);
  SumDist null_dist = weighted_sign_sum_dist(null_probs, weights);
  SumDist obs_dist = weighted_sign_sum_dist(probs, weights);
  if (null_dist.support.size() != obs_dist.support.size())
    throw std::logic_error("mirror: support mismatch");
  std::size_t n = null_dist.support.size();

  // Right tails under the reference law, per support atom.
  std::vector<double> tail_gt(n, 0.0), tail_geq(n, 0.0);
  double acc = 0.0;
  for (std::size_t k = n; k >= 1; --k) {
    tail_gt[k - 1] = acc;
    acc += null_dist.prob[k - 1];
    tail_geq[k - 1] = acc;
  }

  std::vector<MirrorRow> rows;
  if (!randomized) {
    // Atoms of the deterministic p-value; conditional mass below/above 1/2
    // given v = min(p, 1-p).
    struct Acc {
      double v;
      double below = 0.0;
      double above = 0.0;
    };
    std::vector<Acc> accs;
    for (std::size_t k = 0; k < n; ++k) {
      if (obs_dist.prob[k] <= 0.0) continue;
      double p = tail_geq[k];
      double v = std::min(p, 1.0 - p);
      auto it = std::find_if(accs.begin(), accs.end(),
                             [&](const Acc& a) { return std::abs(a.v - v) <= 1e-12; });
      if (it == accs.end()) {
        accs.push_back({v});
        it = std::prev(accs.end());
      }
      (p < 0.5 ? it->below : it->above) += obs_dist.prob[k];
    }
    std::sort(accs.begin(), accs.end(), [](const Acc& a, const Acc& b) { return a.v < b.v; });
    for (const auto& a : accs) {
      double total = a.below + a.above;
      rows.push_back({a.v, a.v, a.below / total, a.above / total});
    }
    return rows;
  }

  // Randomized p-value density: constant D_k / m_k on (tail_gt_k, tail_geq_k).
  auto density = [&](double x) {
    for (std::size_t k = 0; k < n; ++k)
      if (x > tail_gt[k] && x <= tail_geq[k])
        return null_dist.prob[k] > 0.0 ? obs_dist.prob[k] / null_dist.prob[k] : 0.0;
    return 0.0;
  };
  std::vector<double> cuts{0.0, 0.5};
  for (std::size_t k = 0; k < n; ++k) {
    for (double b : {tail_gt[k], tail_geq[k]}) {
      double v = std::min(b, 1.0 - b);
      if (v > 0.0 && v < 0.5) cuts.push_back(v);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
             cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i], hi = cuts[i + 1];
    double mid = 0.5 * (lo + hi);
    rows.push_back({lo, hi, density(mid), density(1.0 - mid)});
  }
  return rows;
}

}  // namespace subsel
