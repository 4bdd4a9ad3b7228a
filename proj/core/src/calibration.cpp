#include "subsel/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "subsel/numeric.hpp"

namespace subsel {

EarlyStop early_stop_time(const ScreeningTrace& trace, double kappa, double gamma_split,
                          double alpha) {
  // Scan in run order; the stopping rule is checked before the hopeless rule
  // at each step, matching the live loop.
  for (const auto& s : trace.steps) {
    if (approx_leq(s.fdp_hat, alpha)) return {s.step, s.n_neg, true};
    if (approx_lt(static_cast<double>(s.n_pos), kappa / (gamma_split * alpha)))
      return {s.step, s.n_neg, false};
  }
  if (trace.steps.empty()) throw std::invalid_argument("early_stop_time: empty trace");
  const auto& last = trace.steps.back();
  return {last.step, last.n_neg, false};
}

double evidence_score(int sign, const std::vector<int>& residual_signs, int eta, double pstar) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("evidence_score: sign must be +-1");
  int nnz = 0, n_pos = 0;
  for (int s : residual_signs) {
    if (s != 0) ++nnz;
    if (s > 0) ++n_pos;
  }
  int n_draws = nnz + eta + 1;
  int count = n_pos + (sign > 0 ? eta + 1 : 0);
  double tail = binomial_tail_geq(n_draws, pstar, count);
  return -std::log(std::max(tail, 1e-300));
}

namespace {

bool removed_by(const ScreeningTrace& trace, int g, long t) {
  for (int x : trace.initial_screened)
    if (x == g) return true;
  for (const auto& s : trace.steps)
    if (s.step >= 1 && s.step <= t && s.screened_group == g) return true;
  return false;
}

struct ReplayView {
  const std::vector<int>* selection = nullptr;
  const ScreeningTrace* trace = nullptr;
};

// One term of the selection-impact function for candidate g under label
// `sign`, computed from the (re)run that used that label.
double zeta_term(int g, int sign, double h_of_sign, double a_obs, const ReplayView& view,
                 double kappa, double gamma_split, double alpha) {
  EarlyStop stop = early_stop_time(*view.trace, kappa, gamma_split, alpha);
  bool in_sel = std::binary_search(view.selection->begin(), view.selection->end(), g);
  bool strong = !approx_lt(h_of_sign, a_obs);  // h >= a at shared tolerance
  double value = 0.0;
  if (in_sel || strong) {
    double denom = static_cast<double>(view.selection->size()) + (in_sel ? 0.0 : 1.0);
    value = 1.0 / denom;
  }
  double budget = 0.0;
  if (sign > 0 && !removed_by(*view.trace, g, stop.t))
    budget = (gamma_split * alpha / kappa) / (1.0 + static_cast<double>(stop.n_neg));
  return value - budget;
}

}  // namespace

CalibrationResult calibrate(const ScreenResult& original, const std::vector<GroupStats>& groups,
                            const GroupFeatures& features, const ScreeningConfig& screen_cfg,
                            const CalibrationConfig& cfg,
                            const std::vector<std::vector<UnitStats>>* unit_stats_by_group,
                            double gamma, const AggregateOptions* agg_opt) {
  int k_groups = static_cast<int>(groups.size());
  double kappa = 0.0;
  for (const auto& g : groups) kappa = std::max(kappa, g.kappa);

  // A replay with every observed value must reproduce the recorded run.
  {
    ScreenResult re = screen(groups, features, screen_cfg, true);
    if (re.selection != original.selection)
      throw std::runtime_error("calibrate: replay does not reproduce the recorded selection");
  }

  std::vector<int> added;
  for (int g = 0; g < k_groups; ++g) {
    const GroupStats& gs = groups[static_cast<std::size_t>(g)];
    if (gs.sign == 0) continue;
    if (std::binary_search(original.selection.begin(), original.selection.end(), g)) continue;

    double a_obs = evidence_score(gs.sign, gs.residual_signs, gs.eta, gs.pstar);

    bool full = cfg.variant == CalibrationConfig::Variant::Full && unit_stats_by_group != nullptr &&
                static_cast<int>(gs.members.size()) <= cfg.full_group_limit;

    if (!full) {
      // Label-level check at the two extreme label probabilities.
      ReplayView obs_view{&original.selection, &original.trace};
      double zeta_obs = zeta_term(g, gs.sign, a_obs, a_obs, obs_view, kappa,
                                  screen_cfg.gamma_split, screen_cfg.alpha);

      std::vector<GroupStats> mod = groups;
      mod[static_cast<std::size_t>(g)].sign = -gs.sign;
      ScreenResult flip = screen(mod, features, screen_cfg, true);
      double h_flip =
          evidence_score(-gs.sign, gs.residual_signs, gs.eta, gs.pstar);
      ReplayView flip_view{&flip.selection, &flip.trace};
      double zeta_flip = zeta_term(g, -gs.sign, h_flip, a_obs, flip_view, kappa,
                                   screen_cfg.gamma_split, screen_cfg.alpha);

      double zeta_pos = gs.sign > 0 ? zeta_obs : zeta_flip;
      double zeta_neg = gs.sign > 0 ? zeta_flip : zeta_obs;
      int q = gs.rep_nonzero;
      double lo = binomial_tail_gt(q, 1.0 - gs.pstar, gs.eta);
      double hi = binomial_tail_gt(q, gs.pstar, gs.eta);
      double worst = std::max(lo * zeta_pos + (1.0 - lo) * zeta_neg,
                              hi * zeta_pos + (1.0 - hi) * zeta_neg);
      if (approx_leq(worst, 0.0)) added.push_back(g);
      continue;
    }

    if (agg_opt == nullptr) throw std::invalid_argument("calibrate: Full needs aggregate options");
    const std::vector<UnitStats>& units = (*unit_stats_by_group)[static_cast<std::size_t>(g)];
    if (static_cast<int>(units.size()) != static_cast<int>(gs.members.size()))
      throw std::invalid_argument("calibrate: unit stats do not match group");

    std::vector<int> flip_idx;  // units whose sign the enumeration varies
    for (std::size_t i = 0; i < units.size(); ++i)
      if (units[i].sign != 0) flip_idx.push_back(static_cast<int>(i));
    int nf = static_cast<int>(flip_idx.size());
    long n_vertices = 1L << nf;

    std::vector<double> zeta(static_cast<std::size_t>(n_vertices), 0.0);
    std::vector<UnitStats> mod_units = units;
    for (long v = 0; v < n_vertices; ++v) {
      for (int b = 0; b < nf; ++b)
        mod_units[static_cast<std::size_t>(flip_idx[static_cast<std::size_t>(b)])].sign =
            (v >> b) & 1 ? 1 : -1;
      GroupStats re_g = aggregate_group(gs.group_id, mod_units, gamma, *agg_opt);

      double h_v = evidence_score(re_g.sign, re_g.residual_signs, re_g.eta, re_g.pstar);
      bool observed = true;
      for (std::size_t i = 0; i < units.size(); ++i)
        if (mod_units[i].sign != units[i].sign) observed = false;

      if (observed) {
        ReplayView view{&original.selection, &original.trace};
        zeta[static_cast<std::size_t>(v)] = zeta_term(g, re_g.sign, h_v, a_obs, view, kappa,
                                                      screen_cfg.gamma_split, screen_cfg.alpha);
        continue;
      }
      std::vector<GroupStats> mod = groups;
      mod[static_cast<std::size_t>(g)] = re_g;
      GroupFeatures mod_f = features;
      int n_pos_res = 0;
      for (int s : re_g.residual_signs)
        if (s > 0) ++n_pos_res;
      if (!re_g.residual_signs.empty())
        mod_f.x(g, mod_f.frac_col) =
            static_cast<double>(n_pos_res) / static_cast<double>(re_g.residual_signs.size());
      ScreenResult rr = screen(mod, mod_f, screen_cfg, true);
      ReplayView view{&rr.selection, &rr.trace};
      zeta[static_cast<std::size_t>(v)] = zeta_term(g, re_g.sign, h_v, a_obs, view, kappa,
                                                    screen_cfg.gamma_split, screen_cfg.alpha);
    }

    // Worst case over independent per-unit sign probabilities, each at either
    // end of [1 - pstar, pstar]; the expectation is multilinear so the sup
    // sits at a vertex.
    double worst = -1e300;
    long n_pvert = 1L << nf;
    for (long pv = 0; pv < n_pvert; ++pv) {
      double total = 0.0;
      for (long v = 0; v < n_vertices; ++v) {
        double w = 1.0;
        for (int b = 0; b < nf; ++b) {
          double p_up = (pv >> b) & 1 ? gs.pstar : 1.0 - gs.pstar;
          w *= (v >> b) & 1 ? p_up : 1.0 - p_up;
        }
        total += w * zeta[static_cast<std::size_t>(v)];
      }
      worst = std::max(worst, total);
    }
    if (approx_leq(worst, 0.0)) added.push_back(g);
  }

  CalibrationResult out;
  out.selection = original.selection;
  out.selection.insert(out.selection.end(), added.begin(), added.end());
  std::sort(out.selection.begin(), out.selection.end());
  out.via_cc.assign(out.selection.size(), 0);
  for (std::size_t i = 0; i < out.selection.size(); ++i)
    if (std::binary_search(added.begin(), added.end(), out.selection[i])) out.via_cc[i] = 1;
  return out;
}

}  // namespace subsel
