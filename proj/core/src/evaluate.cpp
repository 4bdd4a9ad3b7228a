#include "subsel/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "subsel/numeric.hpp"
#include "subsel/partition.hpp"
#include "subsel/simulate.hpp"
#include "subsel/unit_stats.hpp"

namespace subsel {

const char* method_name(Method m) {
  switch (m) {
    case Method::Np: return "np";
    case Method::Max: return "max";
    case Method::TopGap: return "topgap";
    case Method::MedSplit: return "medsplit";
    case Method::NpCc: return "np-cc";
    case Method::Bh: return "bh";
    case Method::Pscreen: return "pscreen";
  }
  return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
  for (Method m : {Method::Np, Method::Max, Method::TopGap, Method::MedSplit, Method::NpCc,
                   Method::Bh, Method::Pscreen})
    if (name == method_name(m)) return m;
  return std::nullopt;
}

namespace {

Magnitude variant_for(Method m) {
  switch (m) {
    case Method::Max: return Magnitude::Max;
    case Method::TopGap: return Magnitude::TopGap;
    case Method::MedSplit: return Magnitude::MedSplit;
    default: return Magnitude::Np;
  }
}

// Deterministic subgroup p-value: signed-rank statistic of the group's unit
// signs, weighted by within-group magnitude midranks, under the worst-case
// marginal sign odds for the group's largest set.
std::vector<double> group_pvalues(const std::vector<UnitStats>& units, const Partition& partition,
                                  double gamma) {
  auto members = partition.groups();
  std::vector<double> out(static_cast<std::size_t>(partition.n_groups), 1.0);
  for (int g = 0; g < partition.n_groups; ++g) {
    const auto& rows = members[static_cast<std::size_t>(g)];
    std::vector<int> signs;
    std::vector<double> mags;
    int max_n = 2;
    for (int i : rows) {
      signs.push_back(units[static_cast<std::size_t>(i)].sign);
      mags.push_back(units[static_cast<std::size_t>(i)].magnitude);
      max_n = std::max(max_n, units[static_cast<std::size_t>(i)].n_units);
    }
    double odds = unit_marginal_kappa(max_n, gamma);
    PValue p = signed_rank_sensitivity_pvalue(signs, midranks(mags), odds, false, nullptr);
    out[static_cast<std::size_t>(g)] = p.value;
  }
  return out;
}

std::vector<GroupReportRow> base_report(const std::vector<GroupStats>& groups,
                                        const Partition& partition) {
  auto members = partition.groups();
  std::vector<GroupReportRow> rows;
  for (const auto& g : groups) {
    GroupReportRow r;
    r.group_id = g.group_id;
    r.size = static_cast<int>(members[static_cast<std::size_t>(g.group_id)].size());
    r.sign = g.sign;
    r.magnitude = g.magnitude;
    r.kappa = g.kappa;
    r.eta = g.eta;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

SelectOutcome run_select(const std::vector<MatchedSet>& sets, const Partition& partition,
                         const SelectOptions& opt) {
  validate_partition(partition, static_cast<int>(sets.size()));
  validate_gamma(opt.gamma);
  SelectOutcome out;

  UnitStatsOptions uo;
  uo.two_sided = opt.two_sided;
  uo.variant = variant_for(opt.method);
  std::vector<UnitStats> units = compute_unit_stats(sets, uo, opt.seed);

  if (opt.method == Method::Bh) {
    std::vector<double> pvals = group_pvalues(units, partition, opt.gamma);
    out.selection = bh_select(pvals, opt.alpha);
    std::vector<GroupStats> groups = aggregate_groups(units, partition, opt.gamma, uo.variant,
                                                      opt.size_exponent, opt.rep_size_override);
    out.report = base_report(groups, partition);
    for (std::size_t g = 0; g < out.report.size(); ++g)
      out.report[g].p_value = pvals[g];
    for (int g : out.selection) out.report[static_cast<std::size_t>(g)].selected = 1;
    out.via_cc.assign(out.selection.size(), 0);
    return out;
  }

  if (opt.method == Method::Pscreen) {
    std::vector<double> pvals = group_pvalues(units, partition, opt.gamma);
    auto members = partition.groups();
    std::vector<GroupStats> groups(static_cast<std::size_t>(partition.n_groups));
    for (int g = 0; g < partition.n_groups; ++g) {
      PscreenStats ps = pscreen_mask(pvals[static_cast<std::size_t>(g)], opt.pscreen);
      GroupStats& gs = groups[static_cast<std::size_t>(g)];
      gs.group_id = g;
      gs.members = members[static_cast<std::size_t>(g)];
      gs.sign = ps.sign;
      gs.magnitude = ps.magnitude;
      gs.kappa = pscreen_kappa(opt.pscreen);
      gs.pstar = gs.kappa / (1.0 + gs.kappa);
    }
    GroupFeatures features = build_features(sets, partition, groups);
    ScreeningConfig sc{opt.alpha, opt.gamma_split, opt.refit_every, opt.seed, opt.predictor};
    ScreenResult res = screen(groups, features, sc);
    out.selection = res.selection;
    out.via_cc.assign(out.selection.size(), 0);
    out.trace = res.trace;
    out.report = base_report(groups, partition);
    for (std::size_t g = 0; g < out.report.size(); ++g)
      out.report[g].p_value = pvals[g];
    for (int g : out.selection) out.report[static_cast<std::size_t>(g)].selected = 1;
    return out;
  }

  std::vector<GroupStats> groups = aggregate_groups(units, partition, opt.gamma, uo.variant,
                                                    opt.size_exponent, opt.rep_size_override);
  GroupFeatures features = build_features(sets, partition, groups);
  ScreeningConfig sc{opt.alpha, opt.gamma_split, opt.refit_every, opt.seed, opt.predictor};
  ScreenResult res = screen(groups, features, sc);
  out.trace = res.trace;

  bool want_cc = opt.method == Method::NpCc || opt.cc != SelectOptions::Cc::Off;
  if (want_cc) {
    CalibrationConfig cc = opt.calibration;
    cc.variant = opt.cc == SelectOptions::Cc::Full ? CalibrationConfig::Variant::Full
                                                   : CalibrationConfig::Variant::Light;
    std::vector<std::vector<UnitStats>> by_group;
    const std::vector<std::vector<UnitStats>>* by_group_ptr = nullptr;
    AggregateOptions agg;
    agg.variant = uo.variant;
    agg.size_exponent = opt.size_exponent;
    agg.rep_size = opt.rep_size_override > 0 ? opt.rep_size_override
                                             : default_rep_size(partition.groups());
    if (cc.variant == CalibrationConfig::Variant::Full) {
      auto members = partition.groups();
      by_group.resize(static_cast<std::size_t>(partition.n_groups));
      for (int g = 0; g < partition.n_groups; ++g)
        for (int i : members[static_cast<std::size_t>(g)])
          by_group[static_cast<std::size_t>(g)].push_back(units[static_cast<std::size_t>(i)]);
      by_group_ptr = &by_group;
    }
    CalibrationResult cal = calibrate(res, groups, features, sc, cc, by_group_ptr, opt.gamma, &agg);
    out.selection = cal.selection;
    out.via_cc = cal.via_cc;
  } else {
    out.selection = res.selection;
    out.via_cc.assign(out.selection.size(), 0);
  }

  out.report = base_report(groups, partition);
  for (std::size_t i = 0; i < out.selection.size(); ++i) {
    GroupReportRow& r = out.report[static_cast<std::size_t>(out.selection[i])];
    r.selected = 1;
    r.via_cc = out.via_cc[i];
  }
  return out;
}

FdrPower fdr_power(const std::vector<int>& selection, const std::vector<std::uint8_t>& nonnull) {
  int k = static_cast<int>(nonnull.size());
  int false_sel = 0, true_sel = 0, total_nonnull = 0;
  for (int g : selection) {
    if (g < 0 || g >= k) throw std::invalid_argument("fdr_power: unknown group id");
    (nonnull[static_cast<std::size_t>(g)] ? true_sel : false_sel)++;
  }
  for (std::uint8_t b : nonnull) total_nonnull += b;
  FdrPower out;
  out.fdp = static_cast<double>(false_sel) / std::max<double>(1.0, static_cast<double>(selection.size()));
  out.power = static_cast<double>(true_sel) / std::max(1.0, static_cast<double>(total_nonnull));
  return out;
}

namespace {

struct RepOutcome {
  double fdp = 0.0;
  double power = 0.0;
  double selected = 0.0;
  double millis = 0.0;
  bool ok = false;
};

RepOutcome one_rep(const ExperimentCell& cell, Method method, const ExperimentConfig& cfg,
                   std::size_t cell_idx, int rep) {
  SimConfig sim;
  sim.n_sets = cell.n_sets_override > 0 ? cell.n_sets_override
                                        : scaled_n_sets(cell.group_size, cell.tree);
  sim.set_size = cell.set_size;
  sim.tau_star = cell.tau_star;
  sim.gamma = cell.gamma_gen;
  sim.n_outcomes = cell.n_outcomes;
  sim.seed = mix64(cfg.seed + 0x100 * (cell_idx + 1));
  SimData data = gen_dataset(sim, static_cast<std::uint64_t>(rep));
  std::uint64_t rep_seed = mix64(sim.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(rep) + 1)));

  Partition part;
  if (cell.tree) {
    Eigen::MatrixXd x(data.sets.size(), data.sets.front().covariates.size());
    Eigen::VectorXd resp(data.sets.size());
    for (std::size_t i = 0; i < data.sets.size(); ++i) {
      const MatchedSet& s = data.sets[i];
      x.row(static_cast<long>(i)) = s.covariates.transpose();
      double treated = 0.0, control = 0.0;
      for (int m = 0; m < s.n_outcomes(); ++m) treated += s.outcomes(s.treated, m);
      for (int j = 0; j < s.n_units(); ++j) {
        if (j == s.treated) continue;
        for (int m = 0; m < s.n_outcomes(); ++m) control += s.outcomes(j, m);
      }
      treated /= s.n_outcomes();
      control /= static_cast<double>((s.n_units() - 1) * s.n_outcomes());
      resp(static_cast<long>(i)) = treated - control;
    }
    TreeConfig tc;
    part = tree_partition(x, resp, tc);
  } else {
    int k_total = std::max(2, static_cast<int>(std::lround(static_cast<double>(sim.n_sets) /
                                                           static_cast<double>(cell.group_size))));
    RngStream prng = substream(rep_seed, "partition");
    part = random_partition(data.important, k_total, sim.p_important, prng);
  }

  if (cell.two_sided) {
    RngStream flip = substream(rep_seed, "flip");
    two_sided_flip(data, part, flip);
  }
  if (cell.n_outcomes > 1) {
    RngStream mask = substream(rep_seed, "mask");
    mask_outcomes(data, cell.mask_frac, mask);
  }

  SelectOptions opt;
  opt.method = method;
  opt.alpha = cfg.alpha;
  opt.gamma = cell.gamma_inf;
  opt.gamma_split = cfg.gamma_split;
  opt.seed = rep_seed;
  opt.two_sided = cell.two_sided;

  RepOutcome out;
  auto t0 = std::chrono::steady_clock::now();
  try {
    SelectOutcome sel = run_select(data.sets, part, opt);
    std::vector<std::uint8_t> nonnull = group_nonnull(data, part);
    FdrPower fp = fdr_power(sel.selection, nonnull);
    out.fdp = fp.fdp;
    out.power = fp.power;
    out.selected = static_cast<double>(sel.selection.size());
    out.ok = true;
  } catch (const std::exception&) {
    out.ok = false;
  }
  out.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

std::vector<ExperimentResult> run_experiment(const ExperimentConfig& cfg) {
  if (cfg.cells.empty() || cfg.methods.empty() || cfg.reps < 1)
    throw std::invalid_argument("run_experiment: empty grid");
  struct Task {
    std::size_t cell;
    std::size_t method;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c)
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
      for (int r = 0; r < cfg.reps; ++r) tasks.push_back({c, m, r});

  std::vector<RepOutcome> slots(tasks.size());
  int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t)
      slots[t] = one_rep(cfg.cells[tasks[t].cell], cfg.methods[tasks[t].method], cfg,
                         tasks[t].cell, tasks[t].rep);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&]() {
      for (;;) {
        std::size_t t;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= tasks.size()) return;
          t = next++;
        }
        slots[t] = one_rep(cfg.cells[tasks[t].cell], cfg.methods[tasks[t].method], cfg,
                           tasks[t].cell, tasks[t].rep);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ExperimentResult> rows;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      std::vector<double> fdp, power;
      double selected = 0.0, millis = 0.0;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].cell != c || tasks[t].method != m) continue;
        millis += slots[t].millis;
        if (!slots[t].ok) continue;
        fdp.push_back(slots[t].fdp);
        power.push_back(slots[t].power);
        selected += slots[t].selected;
      }
      ExperimentResult row;
      row.cell = cfg.cells[c].label;
      row.method = cfg.methods[m];
      row.reps = static_cast<int>(fdp.size());
      MeanSd f = mean_sd(fdp), p = mean_sd(power);
      row.mean_fdp = f.mean;
      row.se_fdp = fdp.size() > 1 ? f.sd / std::sqrt(static_cast<double>(fdp.size())) : 0.0;
      row.mean_power = p.mean;
      row.se_power = power.size() > 1 ? p.sd / std::sqrt(static_cast<double>(power.size())) : 0.0;
      row.mean_selected = fdp.empty() ? 0.0 : selected / static_cast<double>(fdp.size());
      row.millis = millis;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace subsel
