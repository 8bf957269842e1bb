#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "safetl/experiment.hpp"

namespace safetl {

/// Shortest round-trip-safe text for a double (up to 17 significant digits).
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

/// Header `iter,query_index,x1..xD,y,z1..zJ,safe_truth,safe_set_size,rmse,
/// tp_rate,fp_rate,region_label,fit_seconds,status`. Every row carries
/// status "ok" except the last, which carries the trace's terminal status.
void write_trace_csv(std::ostream& out, const ExperimentTrace& trace, std::size_t dim, std::size_t num_safety);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(std::istream& in);

/// Dataset rows `x1..xD,y,z1..zJ,task`.
void write_dataset_csv(std::ostream& out, const std::vector<std::pair<std::string, const LabeledDataset*>>& parts);
/// Rows grouped by task name, in first-seen order.
std::vector<std::pair<std::string, LabeledDataset>> read_dataset_csv(std::istream& in);

/// Per-method mean +- standard error of the summary metrics, with the number
/// of runs stated on every line.
void write_report(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace safetl
