#pragma once

#include <string>
#include <vector>

#include "subsel/evaluate.hpp"
#include "subsel/screening.hpp"
#include "subsel/simulate.hpp"
#include "subsel/types.hpp"

namespace subsel {

// Minimal CSV layer: comma separated, first row header, no quoting (values
// never contain commas here).
std::vector<std::vector<std::string>> read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

// Matched-set table: set_id, unit_id, role, y_1.., x_1..
void write_sets_csv(const std::string& path, const std::vector<MatchedSet>& sets);
std::vector<MatchedSet> read_sets_csv(const std::string& path);

// Unit-level table compatible with load_units: unit_id, treatment, y_1.., x_1..
void write_units_csv(const std::string& path, const std::vector<MatchedSet>& sets);

// Truth table: set_id, important, nonnull.
void write_truth_csv(const std::string& path, const SimData& data);
struct TruthTable {
  std::vector<std::uint8_t> important;
  std::vector<std::uint8_t> nonnull;
};
TruthTable read_truth_csv(const std::string& path);

// Partition table: set_id, group_id.
void write_partition_csv(const std::string& path, const Partition& partition);
Partition read_partition_csv(const std::string& path, int n_sets);

// Per-group selection report.
void write_report_csv(const std::string& path, const std::vector<GroupReportRow>& rows);

// Screening trace: step, screened_group, P, N, fdp_hat.
void write_trace_csv(const std::string& path, const ScreeningTrace& trace);

// Experiment results table.
void write_results_csv(const std::string& path, const std::vector<ExperimentResult>& rows);

}  // namespace subsel
