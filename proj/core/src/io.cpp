#include "subsel/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace subsel {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::size_t start = 0;
    for (;;) {
      std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        row.push_back(line.substr(start));
        break;
      }
      row.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_sets_csv(const std::string& path, const std::vector<MatchedSet>& sets) {
  if (sets.empty()) throw std::invalid_argument("write_sets_csv: no sets");
  int m = sets.front().n_outcomes();
  long d = sets.front().covariates.size();
  std::vector<std::string> header{"set_id", "unit_id", "role"};
  for (int j = 0; j < m; ++j) header.push_back("y_" + std::to_string(j + 1));
  for (long j = 0; j < d; ++j) header.push_back("x_" + std::to_string(j + 1));
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : sets) {
    for (int u = 0; u < s.n_units(); ++u) {
      std::vector<std::string> row;
      row.push_back(std::to_string(s.id));
      row.push_back(s.unit_ids.empty() ? "s" + std::to_string(s.id) + "u" + std::to_string(u)
                                       : s.unit_ids[static_cast<std::size_t>(u)]);
      row.push_back(u == s.treated ? "treated" : "control");
      for (int j = 0; j < m; ++j) row.push_back(format_double(s.outcomes(u, j)));
      for (long j = 0; j < d; ++j) row.push_back(format_double(s.covariates(j)));
      rows.push_back(std::move(row));
    }
  }
  write_csv(path, header, rows);
}

std::vector<MatchedSet> read_sets_csv(const std::string& path) {
  auto raw = read_csv(path);
  if (raw.size() < 2) throw std::runtime_error("read_sets_csv: empty table in " + path);
  const auto& header = raw.front();
  int set_col = -1, id_col = -1, role_col = -1;
  std::vector<int> y_cols, x_cols;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    const std::string& h = header[static_cast<std::size_t>(j)];
    if (h == "set_id") set_col = j;
    else if (h == "unit_id") id_col = j;
    else if (h == "role") role_col = j;
    else if (h.rfind("y_", 0) == 0) y_cols.push_back(j);
    else if (h.rfind("x_", 0) == 0) x_cols.push_back(j);
  }
  if (set_col < 0 || id_col < 0 || role_col < 0 || y_cols.empty() || x_cols.empty())
    throw std::runtime_error("read_sets_csv: header must carry set_id, unit_id, role, y_*, x_*");

  std::map<int, std::vector<std::vector<std::string>>> by_set;
  std::vector<int> order;
  for (std::size_t r = 1; r < raw.size(); ++r) {
    if (raw[r].size() != header.size())
      throw std::runtime_error("read_sets_csv: ragged row " + std::to_string(r + 1));
    int sid = std::stoi(raw[r][static_cast<std::size_t>(set_col)]);
    if (by_set.find(sid) == by_set.end()) order.push_back(sid);
    by_set[sid].push_back(raw[r]);
  }
  std::sort(order.begin(), order.end());
  std::vector<MatchedSet> sets;
  for (int sid : order) {
    const auto& rows = by_set[sid];
    MatchedSet s;
    s.id = sid;
    s.treated = -1;
    s.outcomes.resize(static_cast<long>(rows.size()), static_cast<long>(y_cols.size()));
    for (std::size_t u = 0; u < rows.size(); ++u) {
      s.unit_ids.push_back(rows[u][static_cast<std::size_t>(id_col)]);
      const std::string& role = rows[u][static_cast<std::size_t>(role_col)];
      if (role == "treated") {
        if (s.treated >= 0) throw std::runtime_error("read_sets_csv: two treated in set " + std::to_string(sid));
        s.treated = static_cast<int>(u);
      } else if (role != "control") {
        throw std::runtime_error("read_sets_csv: bad role " + role);
      }
      for (std::size_t j = 0; j < y_cols.size(); ++j)
        s.outcomes(static_cast<long>(u), static_cast<long>(j)) =
            std::stod(rows[u][static_cast<std::size_t>(y_cols[j])]);
    }
    if (s.treated < 0) throw std::runtime_error("read_sets_csv: no treated in set " + std::to_string(sid));
    s.covariates.resize(static_cast<long>(x_cols.size()));
    for (std::size_t j = 0; j < x_cols.size(); ++j)
      s.covariates(static_cast<long>(j)) =
          std::stod(rows[static_cast<std::size_t>(s.treated)][static_cast<std::size_t>(x_cols[j])]);
    validate_set(s);
    sets.push_back(std::move(s));
  }
  return sets;
}

void write_units_csv(const std::string& path, const std::vector<MatchedSet>& sets) {
  if (sets.empty()) throw std::invalid_argument("write_units_csv: no sets");
  int m = sets.front().n_outcomes();
  long d = sets.front().covariates.size();
  std::vector<std::string> header{"unit_id", "treatment"};
  for (int j = 0; j < m; ++j) header.push_back("y_" + std::to_string(j + 1));
  for (long j = 0; j < d; ++j) header.push_back("x_" + std::to_string(j + 1));
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : sets) {
    for (int u = 0; u < s.n_units(); ++u) {
      std::vector<std::string> row;
      row.push_back(s.unit_ids.empty() ? "s" + std::to_string(s.id) + "u" + std::to_string(u)
                                       : s.unit_ids[static_cast<std::size_t>(u)]);
      row.push_back(u == s.treated ? "1" : "0");
      for (int j = 0; j < m; ++j) row.push_back(format_double(s.outcomes(u, j)));
      for (long j = 0; j < d; ++j) row.push_back(format_double(s.covariates(j)));
      rows.push_back(std::move(row));
    }
  }
  write_csv(path, header, rows);
}

void write_truth_csv(const std::string& path, const SimData& data) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < data.sets.size(); ++i)
    rows.push_back({std::to_string(data.sets[i].id), std::to_string(static_cast<int>(data.important[i])),
                    std::to_string(data.set_nonnull(static_cast<int>(i)) ? 1 : 0)});
  write_csv(path, {"set_id", "important", "nonnull"}, rows);
}

TruthTable read_truth_csv(const std::string& path) {
  auto raw = read_csv(path);
  if (raw.size() < 2) throw std::runtime_error("read_truth_csv: empty table in " + path);
  TruthTable t;
  for (std::size_t r = 1; r < raw.size(); ++r) {
    if (raw[r].size() < 3) throw std::runtime_error("read_truth_csv: ragged row");
    t.important.push_back(static_cast<std::uint8_t>(std::stoi(raw[r][1])));
    t.nonnull.push_back(static_cast<std::uint8_t>(std::stoi(raw[r][2])));
  }
  return t;
}

void write_partition_csv(const std::string& path, const Partition& partition) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < partition.group_of.size(); ++i)
    rows.push_back({std::to_string(i), std::to_string(partition.group_of[i])});
  write_csv(path, {"set_id", "group_id"}, rows);
}

Partition read_partition_csv(const std::string& path, int n_sets) {
  auto raw = read_csv(path);
  if (raw.size() < 2) throw std::runtime_error("read_partition_csv: empty table in " + path);
  std::map<int, int> of;
  int max_g = -1;
  for (std::size_t r = 1; r < raw.size(); ++r) {
    if (raw[r].size() < 2) throw std::runtime_error("read_partition_csv: ragged row");
    int sid = std::stoi(raw[r][0]);
    int gid = std::stoi(raw[r][1]);
    of[sid] = gid;
    max_g = std::max(max_g, gid);
  }
  Partition p;
  p.n_groups = max_g + 1;
  p.group_of.resize(static_cast<std::size_t>(n_sets), -1);
  for (int i = 0; i < n_sets; ++i) {
    auto it = of.find(i);
    if (it == of.end()) throw std::runtime_error("read_partition_csv: set " + std::to_string(i) + " missing");
    p.group_of[static_cast<std::size_t>(i)] = it->second;
  }
  validate_partition(p, n_sets);
  return p;
}

void write_report_csv(const std::string& path, const std::vector<GroupReportRow>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows)
    out.push_back({std::to_string(r.group_id), std::to_string(r.size), std::to_string(r.selected),
                   std::to_string(r.via_cc), std::to_string(r.sign), format_double(r.magnitude),
                   format_double(r.kappa), std::to_string(r.eta),
                   r.p_value < 0.0 ? "" : format_double(r.p_value)});
  write_csv(path, {"group_id", "size", "selected", "via_cc", "L", "W", "kappa", "eta", "p_value"},
            out);
}

void write_trace_csv(const std::string& path, const ScreeningTrace& trace) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : trace.steps)
    rows.push_back({std::to_string(s.step), std::to_string(s.screened_group), std::to_string(s.n_pos),
                    std::to_string(s.n_neg), format_double(s.fdp_hat)});
  write_csv(path, {"step", "screened_group", "P", "N", "fdp_hat"}, rows);
}

void write_results_csv(const std::string& path, const std::vector<ExperimentResult>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows)
    out.push_back({r.cell, method_name(r.method), std::to_string(r.reps), format_double(r.mean_fdp),
                   format_double(r.se_fdp), format_double(r.mean_power), format_double(r.se_power),
                   format_double(r.mean_selected), format_double(r.millis)});
  write_csv(path, {"cell", "method", "reps", "mean_fdp", "se_fdp", "mean_power", "se_power",
                   "mean_selected", "millis"},
            out);
}

}  // namespace subsel
