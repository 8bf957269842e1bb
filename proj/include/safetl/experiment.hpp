#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "safetl/datasets.hpp"
#include "safetl/safe_loop.hpp"

namespace safetl {

struct ExperimentConfig {
  BenchmarkKind benchmark = BenchmarkKind::Branin;
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;
  BenchmarkSizes sizes;
  std::size_t n_test = 1000;
  std::size_t num_sources = 1;
  double beta = 4.0;
  bool noisy_safe_set = true;
  std::size_t refit_every = 1;
  Vector thresholds;                 // empty keeps the benchmark's thresholds
  KernelFamily kernel = KernelFamily::Matern52;
  int initial_restarts = 5;
  int refit_restarts = 1;
  std::size_t lmc_latents = 0;
  bool timing = true;
  std::size_t workers = 1;
  std::filesystem::path output_dir = "results";
  std::filesystem::path data_dir;    // custom-csv input directory

  void validate() const;
};

/// Reads flat `key = value` text; `#` starts a comment. Unknown keys, bad
/// values and unsupported combinations throw ConfigError naming the line.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name = "config");
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Data, pool, test set and target oracle for one seed, shared by every
/// method so that methods are compared on identical inputs.
struct PreparedRun {
  std::uint64_t seed = 0;
  Benchmark benchmark;
  LoopData data;
  std::uint64_t oracle_seed = 0;
  std::uint64_t loop_seed = 0;
};

PreparedRun prepare_run(const ExperimentConfig& config, std::uint64_t seed);

LoopConfig loop_config(const ExperimentConfig& config, const PreparedRun& run);

ExperimentTrace run_prepared(const PreparedRun& run, Method method, const ExperimentConfig& config);

struct SummaryRow {
  std::uint64_t seed = 0;
  std::string method;
  std::string status;
  std::size_t queries = 0;
  double safe_query_ratio = 0.0;
  double final_rmse = 0.0;
  double final_tp = 0.0;
  double final_fp = 0.0;
  int explored_regions = -1;     // -1 when the benchmark has no region labels
  double last_fit_seconds = 0.0;
};

SummaryRow summarize(const ExperimentTrace& trace, std::uint64_t seed);

/// Number of distinct safe regions hit by the queries of a trace.
int explored_regions(const ExperimentTrace& trace);

/// Runs every seed x method, writing one iteration CSV per run plus
/// summary.csv. Returns the summary rows in seed-major order.
std::vector<SummaryRow> run_experiments(const ExperimentConfig& config, bool keep_going);

/// Writes source.csv, initial.csv, grid.csv and metadata.json for one seed.
void generate_data(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& out_dir);

/// Benchmark rebuilt from files written by generate_data.
struct LoadedBenchmark {
  Benchmark benchmark;
  LabeledDataset initial;
  std::vector<LabeledDataset> sources;
};
LoadedBenchmark load_custom_benchmark(const std::filesystem::path& dir);

}  // namespace safetl
