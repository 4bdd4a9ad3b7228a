// subsel: finite-sample FDR-controlled subgroup selection for matched
// observational studies under a bounded assignment-odds sensitivity model.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "subsel/calibration.hpp"
#include "subsel/evaluate.hpp"
#include "subsel/ingest.hpp"
#include "subsel/io.hpp"
#include "subsel/partition.hpp"
#include "subsel/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("config parse error: ") + e.what());
    }
  }
  // Flat key = value lines, # comments.
  json out = json::object();
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw DataError("config line " + std::to_string(lineno) + ": expected key=value");
      continue;
    }
    auto trim = [](std::string s) {
      std::size_t a = s.find_first_not_of(" \t\r");
      std::size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw DataError("config line " + std::to_string(lineno) + ": empty key");
    if (val == "true" || val == "false") {
      out[key] = val == "true";
    } else {
      try {
        std::size_t used = 0;
        double d = std::stod(val, &used);
        if (used == val.size())
          out[key] = d;
        else
          out[key] = val;
      } catch (const std::exception&) {
        out[key] = val;
      }
    }
  }
  return out;
}

subsel::SimConfig sim_config_from_json(const json& j) {
  subsel::SimConfig cfg;
  std::vector<std::string> unknown;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "sets" || k == "I") cfg.n_sets = it.value().get<int>();
    else if (k == "set_size" || k == "n") cfg.set_size = it.value().get<int>();
    else if (k == "d") cfg.d = it.value().get<int>();
    else if (k == "p_imp" || k == "p_important") cfg.p_important = it.value().get<double>();
    else if (k == "alpha_u") cfg.alpha_u = it.value().get<double>();
    else if (k == "tau_star") cfg.tau_star = it.value().get<double>();
    else if (k == "gamma") cfg.gamma = it.value().get<double>();
    else if (k == "outcomes" || k == "M") cfg.n_outcomes = it.value().get<int>();
    else if (k == "mask_frac" || k == "q") cfg.mask_frac = it.value().get<double>();
    else if (k == "seed") cfg.seed = it.value().get<std::uint64_t>();
    else if (k == "two_sided") continue;  // consumed by the caller
    else unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw DataError(msg);
  }
  return cfg;
}

int run_simulate(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
                 bool seed_given) {
  json j = parse_config_file(config_path);
  subsel::SimConfig cfg = sim_config_from_json(j);
  bool two_sided = j.value("two_sided", false);
  if (seed_given) cfg.seed = seed;
  fs::create_directories(out_dir);
  subsel::SimData data = subsel::gen_dataset(cfg);
  if (two_sided) {
    // A per-set flip partition keeps the flipped truth in the outputs.
    subsel::Partition each;
    each.group_of.resize(data.sets.size());
    for (std::size_t i = 0; i < data.sets.size(); ++i) each.group_of[i] = static_cast<int>(i);
    each.n_groups = static_cast<int>(data.sets.size());
    subsel::RngStream flip = subsel::substream(cfg.seed, "flip");
    subsel::two_sided_flip(data, each, flip);
  }
  if (cfg.n_outcomes > 1) {
    subsel::RngStream mask = subsel::substream(cfg.seed, "mask");
    subsel::mask_outcomes(data, cfg.mask_frac, mask);
  }
  subsel::write_sets_csv(out_dir + "/dataset.csv", data.sets);
  subsel::write_truth_csv(out_dir + "/truth.csv", data);
  json echo = {{"sets", cfg.n_sets},       {"set_size", cfg.set_size}, {"d", cfg.d},
               {"p_imp", cfg.p_important}, {"alpha_u", cfg.alpha_u},   {"tau_star", cfg.tau_star},
               {"gamma", cfg.gamma},       {"outcomes", cfg.n_outcomes},
               {"mask_frac", cfg.mask_frac}, {"two_sided", two_sided}, {"seed", cfg.seed}};
  std::ofstream echo_out(out_dir + "/config_echo.json");
  echo_out << echo.dump(2) << "\n";
  std::cout << "simulate: wrote " << data.sets.size() << " sets to " << out_dir << "\n"
            << echo.dump() << "\n";
  return 0;
}

int run_select_cmd(const std::string& data_path, const std::string& partition_path,
                   const std::string& method_name, double gamma, double alpha,
                   const std::string& cc, bool two_sided, std::uint64_t seed, double gamma_split,
                   int refit_every, const std::string& out_dir) {
  auto method = subsel::method_from_name(method_name);
  if (!method) throw DataError("unknown method " + method_name);
  std::vector<subsel::MatchedSet> sets = subsel::read_sets_csv(data_path);
  subsel::Partition part = subsel::read_partition_csv(partition_path, static_cast<int>(sets.size()));

  subsel::SelectOptions opt;
  opt.method = *method;
  opt.alpha = alpha;
  opt.gamma = gamma;
  opt.gamma_split = gamma_split;
  opt.refit_every = refit_every;
  opt.seed = seed;
  opt.two_sided = two_sided;
  if (cc == "light") opt.cc = subsel::SelectOptions::Cc::Light;
  else if (cc == "full") opt.cc = subsel::SelectOptions::Cc::Full;
  else if (cc != "off") throw DataError("unknown cc mode " + cc);
  if (opt.cc != subsel::SelectOptions::Cc::Off &&
      (*method == subsel::Method::Bh || *method == subsel::Method::Pscreen))
    throw DataError("calibration applies to screening methods only");

  subsel::SelectOutcome out = subsel::run_select(sets, part, opt);
  fs::create_directories(out_dir);
  subsel::write_report_csv(out_dir + "/report.csv", out.report);
  if (out.trace) subsel::write_trace_csv(out_dir + "/trace.csv", *out.trace);
  json echo = {{"method", method_name}, {"gamma", gamma},           {"alpha", alpha},
               {"cc", cc},              {"two_sided", two_sided},   {"seed", seed},
               {"gamma_split", gamma_split}, {"refit_every", refit_every},
               {"selected", out.selection.size()}};
  std::cout << "select: " << out.selection.size() << " group(s) selected\n" << echo.dump() << "\n";
  return 0;
}

int run_partition_cmd(const std::string& data_path, const std::string& mode,
                      const std::string& truth_path, int k, double p_imp, std::uint64_t seed,
                      const subsel::TreeConfig& tc, const std::string& out_dir) {
  std::vector<subsel::MatchedSet> sets = subsel::read_sets_csv(data_path);
  subsel::Partition part;
  if (mode == "random") {
    if (truth_path.empty()) throw DataError("random mode needs --truth");
    subsel::TruthTable truth = subsel::read_truth_csv(truth_path);
    if (truth.important.size() != sets.size()) throw DataError("truth does not match dataset");
    subsel::RngStream rng = subsel::substream(seed, "partition");
    part = subsel::random_partition(truth.important, k, p_imp, rng);
  } else if (mode == "tree") {
    Eigen::MatrixXd x(sets.size(), sets.front().covariates.size());
    Eigen::VectorXd resp(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const subsel::MatchedSet& s = sets[i];
      x.row(static_cast<long>(i)) = s.covariates.transpose();
      double treated = 0.0, control = 0.0;
      for (int m = 0; m < s.n_outcomes(); ++m) treated += s.outcomes(s.treated, m);
      for (int u = 0; u < s.n_units(); ++u) {
        if (u == s.treated) continue;
        for (int m = 0; m < s.n_outcomes(); ++m) control += s.outcomes(u, m);
      }
      treated /= s.n_outcomes();
      control /= static_cast<double>((s.n_units() - 1) * s.n_outcomes());
      resp(static_cast<long>(i)) = treated - control;
    }
    part = subsel::tree_partition(x, resp, tc);
  } else {
    throw DataError("unknown partition mode " + mode);
  }
  fs::create_directories(out_dir);
  subsel::write_partition_csv(out_dir + "/partition.csv", part);
  if (!part.tree_text.empty()) {
    std::ofstream tree_out(out_dir + "/tree.txt");
    tree_out << part.tree_text;
  }
  std::cout << "partition: " << part.n_groups << " group(s)\n";
  return 0;
}

int run_match_cmd(const std::string& data_path, int k, double caliper, const std::string& out_dir) {
  subsel::UnitTable table = subsel::load_units(data_path);
  subsel::PropensityFit fit =
      subsel::propensity_fit(table.covariates, table.treatment);
  subsel::MatchConfig mc;
  mc.controls_per_set = k;
  mc.caliper = caliper;
  subsel::MatchOutput matched = subsel::nn_match(table, fit, mc);
  fs::create_directories(out_dir);
  subsel::write_sets_csv(out_dir + "/matched.csv", matched.sets);
  Eigen::VectorXd pre = subsel::smd_pre(table);
  Eigen::VectorXd post = subsel::smd_post(table, matched);
  std::vector<std::vector<std::string>> rows;
  for (long j = 0; j < pre.size(); ++j)
    rows.push_back({table.covariate_names[static_cast<std::size_t>(j)],
                    subsel::format_double(pre(j)), subsel::format_double(post(j))});
  subsel::write_csv(out_dir + "/balance.csv", {"covariate", "smd_pre", "smd_post"}, rows);
  std::cout << "match: " << matched.sets.size() << " sets, " << matched.unmatched_treated.size()
            << " treated dropped, " << table.n_dropped << " rows dropped on load\n";
  if (fit.ridged) std::cout << "match: propensity fit used ridge fallback\n";
  return 0;
}

std::vector<subsel::ExperimentCell> figure_cells(const std::string& figure) {
  using Cell = subsel::ExperimentCell;
  std::vector<Cell> cells;
  auto sized = [&](bool tree, bool two_sided, int set_size, int outcomes, double tau) {
    for (int m : {5, 10, 15, 20}) {
      Cell c;
      c.label = figure + "-m" + std::to_string(m);
      c.group_size = m;
      c.set_size = set_size;
      c.tau_star = tau;
      c.tree = tree;
      c.two_sided = two_sided;
      c.n_outcomes = outcomes;
      cells.push_back(c);
    }
  };
  auto controls = [&](int m) {
    for (int ctrl : {1, 2, 3, 4, 5}) {
      Cell c;
      c.label = figure + "-c" + std::to_string(ctrl);
      c.group_size = m;
      c.set_size = ctrl + 1;
      cells.push_back(c);
    }
  };
  if (figure == "2a") sized(false, false, 4, 1, 3.0);
  else if (figure == "2b") sized(false, true, 2, 1, 3.0);
  else if (figure == "3a") controls(6);
  else if (figure == "3b") controls(18);
  else if (figure == "4a") sized(true, false, 4, 1, 4.0);
  else if (figure == "4b") sized(true, true, 2, 1, 4.0);
  else if (figure == "5a") sized(false, false, 4, 5, 3.0);
  else if (figure == "5b") sized(false, true, 2, 5, 3.0);
  else throw DataError("unknown figure " + figure);
  return cells;
}

int run_evaluate_cmd(const std::string& figure, int reps, double alpha, double gamma_split,
                     std::uint64_t seed, int workers, const std::string& methods_csv,
                     const std::string& out_path) {
  subsel::ExperimentConfig cfg;
  cfg.cells = figure_cells(figure);
  cfg.reps = reps;
  cfg.alpha = alpha;
  cfg.gamma_split = gamma_split;
  cfg.seed = seed;
  cfg.workers = workers;
  bool two_sided = cfg.cells.front().two_sided;
  if (methods_csv.empty()) {
    if (two_sided)
      cfg.methods = {subsel::Method::Np, subsel::Method::NpCc, subsel::Method::Bh,
                     subsel::Method::Pscreen};
    else
      cfg.methods = {subsel::Method::Np,     subsel::Method::Max,  subsel::Method::TopGap,
                     subsel::Method::MedSplit, subsel::Method::NpCc, subsel::Method::Bh,
                     subsel::Method::Pscreen};
  } else {
    std::istringstream ss(methods_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      auto m = subsel::method_from_name(tok);
      if (!m) throw DataError("unknown method " + tok);
      cfg.methods.push_back(*m);
    }
  }
  std::vector<subsel::ExperimentResult> rows = subsel::run_experiment(cfg);
  subsel::write_results_csv(out_path, rows);
  std::cout << "evaluate: " << rows.size() << " rows -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked subgroup selection with finite-sample FDR control"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic matched dataset");
  std::string sim_config, sim_out = "sim_out";
  std::uint64_t sim_seed = 0;
  sim->add_option("--config", sim_config, "Config file (key=value or JSON)")->required();
  sim->add_option("--out", sim_out, "Output directory");
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Seed override");

  auto* sel = app.add_subcommand("select", "Run subgroup selection on a dataset + partition");
  std::string sel_data, sel_part, sel_method = "np", sel_cc = "off", sel_out = "select_out";
  double sel_gamma = 1.0, sel_alpha = 0.1, sel_gamma_split = 1.0;
  bool sel_two_sided = false;
  std::uint64_t sel_seed = 0;
  int sel_refit = 0;
  sel->add_option("--data", sel_data, "Matched-set CSV")->required();
  sel->add_option("--partition", sel_part, "Partition CSV")->required();
  sel->add_option("--method", sel_method, "np|max|topgap|medsplit|bh|pscreen");
  sel->add_option("--gamma", sel_gamma, "Assignment-odds bound");
  sel->add_option("--alpha", sel_alpha, "FDR level");
  sel->add_option("--cc", sel_cc, "off|light|full");
  sel->add_flag("--two-sided", sel_two_sided, "Two-sided effects (pairs only)");
  sel->add_option("--seed", sel_seed, "Seed");
  sel->add_option("--gamma-split", sel_gamma_split, "Negative-label retention probability");
  sel->add_option("--refit-every", sel_refit, "Predictor refit period (0 = auto)");
  sel->add_option("--out", sel_out, "Output directory");

  auto* part = app.add_subcommand("partition", "Build a group partition for a dataset");
  std::string part_data, part_mode = "random", part_truth, part_out = "partition_out";
  int part_k = 10;
  double part_pimp = 0.3;
  std::uint64_t part_seed = 0;
  subsel::TreeConfig tree_cfg;
  part->add_option("--data", part_data, "Matched-set CSV")->required();
  part->add_option("--mode", part_mode, "random|tree");
  part->add_option("--truth", part_truth, "Truth CSV (random mode)");
  part->add_option("--k", part_k, "Group count (random mode)");
  part->add_option("--p-imp", part_pimp, "Important-group fraction (random mode)");
  part->add_option("--seed", part_seed, "Seed");
  part->add_option("--minsplit", tree_cfg.minsplit, "Smallest splittable node");
  part->add_option("--minbucket", tree_cfg.minbucket, "Smallest child");
  part->add_option("--maxdepth", tree_cfg.maxdepth, "Depth cap");
  part->add_flag("--median-only", tree_cfg.median_only, "Median thresholds only");
  part->add_option("--gain-threshold", tree_cfg.gain_threshold, "Relative variance-gain floor");
  part->add_option("--out", part_out, "Output directory");

  auto* match = app.add_subcommand("match", "Propensity matching on a unit-level CSV");
  std::string match_data, match_out = "match_out";
  int match_k = 1;
  double match_caliper = 0.4;
  match->add_option("--data", match_data, "Unit CSV")->required();
  match->add_option("--k", match_k, "Controls per treated unit");
  match->add_option("--caliper", match_caliper, "Caliper in logit sd units");
  match->add_option("--out", match_out, "Output directory");

  auto* eval = app.add_subcommand("evaluate", "Run a method-comparison grid");
  std::string eval_figure = "2a", eval_methods, eval_out = "results.csv";
  int eval_reps = 100, eval_workers = 0;
  double eval_alpha = 0.1, eval_gamma_split = 1.0;
  std::uint64_t eval_seed = 1;
  eval->add_option("--figure", eval_figure, "2a|2b|3a|3b|4a|4b|5a|5b");
  eval->add_option("--reps", eval_reps, "Replicates per cell");
  eval->add_option("--alpha", eval_alpha, "FDR level");
  eval->add_option("--gamma-split", eval_gamma_split, "Negative-label retention probability");
  eval->add_option("--seed", eval_seed, "Seed");
  eval->add_option("--workers", eval_workers, "Worker threads (0 = env or 1)");
  eval->add_option("--methods", eval_methods, "Comma-separated method filter");
  eval->add_option("--out", eval_out, "Results CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) return run_simulate(sim_config, sim_out, sim_seed, sim_seed_opt->count() > 0);
    if (*sel)
      return run_select_cmd(sel_data, sel_part, sel_method, sel_gamma, sel_alpha, sel_cc,
                            sel_two_sided, sel_seed, sel_gamma_split, sel_refit, sel_out);
    if (*part)
      return run_partition_cmd(part_data, part_mode, part_truth, part_k, part_pimp, part_seed,
                               tree_cfg, part_out);
    if (*match) return run_match_cmd(match_data, match_k, match_caliper, match_out);
    if (*eval) {
      int workers = eval_workers;
      if (workers <= 0) {
        const char* env = std::getenv("SUBSEL_WORKERS");
        workers = env != nullptr ? std::max(1, std::atoi(env)) : 1;
      }
      return run_evaluate_cmd(eval_figure, eval_reps, eval_alpha, eval_gamma_split, eval_seed,
                              workers, eval_methods, eval_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
