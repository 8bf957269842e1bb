#include "safetl/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "safetl/metrics.hpp"

namespace safetl {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

namespace {

double parse_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw InputError(what + ": not a number '" + s + "'");
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const ExperimentTrace& trace, std::size_t dim, std::size_t num_safety) {
  out << "iter,query_index";
  for (std::size_t d = 1; d <= dim; ++d) out << ",x" << d;
  out << ",y";
  for (std::size_t j = 1; j <= num_safety; ++j) out << ",z" << j;
  out << ",safe_truth,safe_set_size,rmse,tp_rate,fp_rate,region_label,fit_seconds,status\n";
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const IterationRecord& r = trace.records[i];
    out << r.iteration << ',' << r.query_index;
    for (Eigen::Index d = 0; d < r.x.size(); ++d) out << ',' << format_double(r.x[d]);
    out << ',' << format_double(r.y);
    for (Eigen::Index j = 0; j < r.z.size(); ++j) out << ',' << format_double(r.z[j]);
    out << ',' << (r.was_safe ? 1 : 0) << ',' << r.safe_set_size << ',' << format_double(r.rmse) << ','
        << format_double(r.tp_area) << ',' << format_double(r.fp_area) << ',';
    if (r.region_label) out << *r.region_label;
    out << ',' << format_double(r.fit_seconds) << ','
        << (i + 1 == trace.records.size() ? to_string(trace.status) : std::string("ok")) << '\n';
  }
}

namespace {
const char* kSummaryHeader =
    "seed,method,status,queries,safe_query_ratio,final_rmse,final_tp,final_fp,explored_regions,last_fit_seconds";
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const SummaryRow& r : rows) {
    out << r.seed << ',' << r.method << ',' << r.status << ',' << r.queries << ',' << format_double(r.safe_query_ratio)
        << ',' << format_double(r.final_rmse) << ',' << format_double(r.final_tp) << ','
        << format_double(r.final_fp) << ',' << r.explored_regions << ',' << format_double(r.last_fit_seconds)
        << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("summary: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSummaryHeader) throw InputError("summary: unexpected header '" + line + "'");
  std::vector<SummaryRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = "summary line " + std::to_string(line_no);
    if (cells.size() != 10) throw InputError(where + ": expected 10 columns");
    SummaryRow r;
    r.seed = static_cast<std::uint64_t>(parse_number(cells[0], where));
    r.method = cells[1];
    r.status = cells[2];
    r.queries = static_cast<std::size_t>(parse_number(cells[3], where));
    r.safe_query_ratio = parse_number(cells[4], where);
    r.final_rmse = parse_number(cells[5], where);
    r.final_tp = parse_number(cells[6], where);
    r.final_fp = parse_number(cells[7], where);
    r.explored_regions = static_cast<int>(parse_number(cells[8], where));
    r.last_fit_seconds = parse_number(cells[9], where);
    rows.push_back(r);
  }
  return rows;
}

void write_dataset_csv(std::ostream& out, const std::vector<std::pair<std::string, const LabeledDataset*>>& parts) {
  if (parts.empty()) throw InputError("write_dataset_csv: nothing to write");
  const std::size_t dim = parts.front().second->dim();
  const std::size_t j = parts.front().second->num_safety();
  for (std::size_t d = 1; d <= dim; ++d) out << 'x' << d << ',';
  out << 'y';
  for (std::size_t c = 1; c <= j; ++c) out << ",z" << c;
  out << ",task\n";
  for (const auto& [name, data] : parts) {
    if (data->dim() != dim || data->num_safety() != j) throw InputError("write_dataset_csv: layouts differ");
    for (Eigen::Index i = 0; i < data->X.rows(); ++i) {
      for (Eigen::Index d = 0; d < data->X.cols(); ++d) out << format_double(data->X(i, d)) << ',';
      out << format_double(data->y[i]);
      for (Eigen::Index c = 0; c < data->Z.cols(); ++c) out << ',' << format_double(data->Z(i, c));
      out << ',' << name << '\n';
    }
  }
}

std::vector<std::pair<std::string, LabeledDataset>> read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("dataset: empty file");
  const auto header = split_csv_line(line);
  std::size_t dim = 0;
  std::size_t j = 0;
  while (dim < header.size() && header[dim] == "x" + std::to_string(dim + 1)) ++dim;
  if (dim == 0 || dim >= header.size() || header[dim] != "y") throw InputError("dataset: header must start x1..xD,y");
  while (dim + 1 + j < header.size() && header[dim + 1 + j] == "z" + std::to_string(j + 1)) ++j;
  if (j == 0 || dim + 1 + j + 1 != header.size() || header.back() != "task") {
    throw InputError("dataset: header must be x1..xD,y,z1..zJ,task");
  }

  std::vector<std::pair<std::string, LabeledDataset>> out;
  std::map<std::string, std::size_t> index;
  Vector x(static_cast<Eigen::Index>(dim));
  Vector z(static_cast<Eigen::Index>(j));
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = "dataset line " + std::to_string(line_no);
    if (cells.size() != header.size()) throw InputError(where + ": expected " + std::to_string(header.size()) + " columns");
    for (std::size_t d = 0; d < dim; ++d) x[static_cast<Eigen::Index>(d)] = parse_number(cells[d], where);
    const double y = parse_number(cells[dim], where);
    for (std::size_t c = 0; c < j; ++c) z[static_cast<Eigen::Index>(c)] = parse_number(cells[dim + 1 + c], where);
    const std::string& task = cells.back();
    auto it = index.find(task);
    if (it == index.end()) {
      it = index.emplace(task, out.size()).first;
      out.emplace_back(task, LabeledDataset::empty(dim, j));
    }
    out[it->second].second.append(x, y, z);
  }
  return out;
}

void write_report(std::ostream& out, const std::vector<SummaryRow>& rows) {
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  out << std::left << std::setw(10) << "method" << std::setw(4) << "n" << std::setw(24) << "safe_query_ratio"
      << std::setw(24) << "final_rmse" << std::setw(24) << "final_tp" << std::setw(24) << "final_fp"
      << std::setw(24) << "explored_regions" << "last_fit_seconds\n";
  auto cell = [](const std::vector<double>& v) {
    if (v.empty()) return std::string("n/a");
    const MeanSe m = mean_standard_error(v);
    std::ostringstream s;
    s << std::setprecision(4) << m.mean << " +- " << m.se;
    return s.str();
  };
  for (const auto& m : methods) {
    std::vector<double> sqr, rm, tp, fp, reg, fit;
    for (const auto& r : rows) {
      if (r.method != m || r.queries == 0) continue;
      sqr.push_back(r.safe_query_ratio);
      rm.push_back(r.final_rmse);
      tp.push_back(r.final_tp);
      fp.push_back(r.final_fp);
      if (r.explored_regions >= 0) reg.push_back(r.explored_regions);
      fit.push_back(r.last_fit_seconds);
    }
    out << std::left << std::setw(10) << m << std::setw(4) << sqr.size() << std::setw(24) << cell(sqr)
        << std::setw(24) << cell(rm) << std::setw(24) << cell(tp) << std::setw(24) << cell(fp) << std::setw(24)
        << cell(reg) << cell(fit) << '\n';
  }
  out << "mean +- standard error over n runs per method; runs without queries are excluded\n";
}

}  // namespace safetl
