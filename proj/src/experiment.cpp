#include "safetl/experiment.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"

#include "safetl/csv_io.hpp"

namespace safetl {

namespace {

// Stream tags; every random quantity of a run derives from the run seed.
enum SeedTag : std::uint64_t {
  kBenchmark = 1,
  kPool = 2,
  kInitialSampling = 3,
  kInitialNoise = 4,
  kTestSampling = 7,
  kTestNoise = 8,
  kLoopOracle = 9,
  kLoopFitting = 10,
  kSourceSampling = 100,
  kSourceNoise = 200,
};

std::uint64_t tagged(std::uint64_t seed, std::uint64_t tag) { return Rng(seed).derive(tag).next(); }

void apply_thresholds(Benchmark& bench, const Vector& thresholds) {
  if (thresholds.size() == 0) return;
  if (thresholds.size() != static_cast<Eigen::Index>(bench.target.num_safety())) {
    throw ConfigError("thresholds: expected " + std::to_string(bench.target.num_safety()) + " values");
  }
  bench.target.thresholds = thresholds;
  for (Task& s : bench.sources) s.thresholds = thresholds;
  if (bench.lattice) {
    bench.target_safe_cells.clear();
    for (std::size_t i = 0; i < bench.lattice->size(); ++i) {
      bench.target_safe_cells.push_back(bench.target.safe(bench.lattice->point(i)));
    }
    bench.target_regions = ccl_label(bench.target_safe_cells, bench.lattice->counts);
  }
}

struct GeneratedData {
  Benchmark bench;
  LabeledDataset initial;
  std::vector<LabeledDataset> sources;
};

GeneratedData generate(const ExperimentConfig& cfg, std::uint64_t seed) {
  GeneratedData g;
  if (cfg.benchmark == BenchmarkKind::CustomCsv) {
    LoadedBenchmark lb = load_custom_benchmark(cfg.data_dir);
    if (lb.sources.size() < cfg.num_sources) {
      throw ConfigError("custom-csv data provide " + std::to_string(lb.sources.size()) + " source tasks, " +
                        std::to_string(cfg.num_sources) + " requested");
    }
    lb.sources.resize(cfg.num_sources);
    lb.benchmark.sources.resize(cfg.num_sources);
    g.bench = std::move(lb.benchmark);
    g.initial = std::move(lb.initial);
    g.sources = std::move(lb.sources);
    apply_thresholds(g.bench, cfg.thresholds);
    return g;
  }
  g.bench = make_benchmark(cfg.benchmark, tagged(seed, kBenchmark), cfg.num_sources);
  apply_thresholds(g.bench, cfg.thresholds);
  Oracle init_oracle(g.bench.target, g.bench.domain, g.bench.noise_std, tagged(seed, kInitialNoise));
  g.initial = make_initial_target_data(init_oracle, g.bench.initial_region, cfg.sizes.n_init,
                                       tagged(seed, kInitialSampling));
  for (std::size_t p = 0; p < g.bench.sources.size(); ++p) {
    Oracle src(g.bench.sources[p], g.bench.domain, g.bench.noise_std, tagged(seed, kSourceNoise + p));
    g.sources.push_back(make_source_data(src, cfg.sizes.n_source, g.bench.source_from_safe_region,
                                         tagged(seed, kSourceSampling + p)));
  }
  return g;
}

std::string task_name(std::size_t p, std::size_t num_sources) {
  return p < num_sources ? "source" + std::to_string(p + 1) : "target";
}

}  // namespace

PreparedRun prepare_run(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  GeneratedData g = generate(config, seed);
  PreparedRun run;
  run.seed = seed;
  run.benchmark = std::move(g.bench);
  const Benchmark& b = run.benchmark;
  run.data.initial = std::move(g.initial);
  run.data.sources = std::move(g.sources);
  run.data.pool = make_pool(b.domain, config.sizes.n_pool, tagged(seed, kPool));
  run.data.pool_safe.resize(static_cast<std::size_t>(run.data.pool.rows()));
  for (Eigen::Index i = 0; i < run.data.pool.rows(); ++i) {
    run.data.pool_safe[static_cast<std::size_t>(i)] = b.target.safe(run.data.pool.row(i).transpose());
  }
  Oracle test_oracle(b.target, b.domain, b.noise_std, tagged(seed, kTestNoise));
  run.data.test = make_safe_test_set(test_oracle, config.n_test, tagged(seed, kTestSampling));
  if (b.lattice && b.lattice->dim() <= 2) {
    run.data.lattice = b.lattice;
    run.data.regions = b.target_regions;
  }
  run.oracle_seed = tagged(seed, kLoopOracle);
  run.loop_seed = tagged(seed, kLoopFitting);
  return run;
}

LoopConfig loop_config(const ExperimentConfig& config, const PreparedRun& run) {
  LoopConfig lc;
  lc.n_query = config.sizes.n_query;
  lc.beta = config.beta;
  lc.noisy = config.noisy_safe_set;
  lc.refit_every = config.refit_every;
  lc.family = config.kernel;
  lc.initial_restarts = config.initial_restarts;
  lc.refit_restarts = config.refit_restarts;
  lc.seed = run.loop_seed;
  lc.timing = config.timing;
  lc.lmc_latents = config.lmc_latents;
  return lc;
}

ExperimentTrace run_prepared(const PreparedRun& run, Method method, const ExperimentConfig& config) {
  const Benchmark& b = run.benchmark;
  Oracle oracle(b.target, b.domain, b.noise_std, run.oracle_seed);
  return run_method(method, std::move(oracle), run.data, loop_config(config, run));
}

int explored_regions(const ExperimentTrace& trace) {
  std::set<int> hit;
  bool labelled = false;
  for (const auto& r : trace.records) {
    if (!r.region_label) continue;
    labelled = true;
    if (*r.region_label > 0) hit.insert(*r.region_label);
  }
  if (!labelled && !trace.records.empty()) return -1;
  return static_cast<int>(hit.size());
}

SummaryRow summarize(const ExperimentTrace& trace, std::uint64_t seed) {
  SummaryRow row;
  row.seed = seed;
  row.method = to_string(trace.method);
  row.status = to_string(trace.status);
  row.queries = trace.records.size();
  if (!trace.records.empty()) {
    const auto& last = trace.records.back();
    row.safe_query_ratio = safe_query_ratio(trace);
    row.final_rmse = last.rmse;
    row.final_tp = last.tp_area;
    row.final_fp = last.fp_area;
    row.last_fit_seconds = last.fit_seconds;
  }
  row.explored_regions = explored_regions(trace);
  return row;
}

std::vector<SummaryRow> run_experiments(const ExperimentConfig& config, bool keep_going) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  const std::size_t n_seeds = config.seeds.size();
  std::vector<std::vector<SummaryRow>> per_seed(n_seeds);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t s = next.fetch_add(1);
      if (s >= n_seeds || stop.load()) return;
      try {
        const std::uint64_t seed = config.seeds[s];
        const PreparedRun run = prepare_run(config, seed);
        for (Method m : config.methods) {
          if (stop.load()) return;
          const ExperimentTrace trace = run_prepared(run, m, config);
          const auto path = config.output_dir / (to_string(config.benchmark) + "_" + to_string(m) + "_seed" +
                                                 std::to_string(seed) + ".csv");
          std::ofstream out(path);
          if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
          write_trace_csv(out, trace, run.benchmark.domain.dim(), run.benchmark.target.num_safety());
          per_seed[s].push_back(summarize(trace, seed));
          if (trace.status == TraceStatus::FitFailed && !keep_going) stop = true;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
        return;
      }
    }
  };
  const std::size_t n_workers = std::min(config.workers, n_seeds);
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < n_workers; ++w) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::vector<SummaryRow> rows;
  for (auto& v : per_seed) rows.insert(rows.end(), v.begin(), v.end());
  std::ofstream summary(config.output_dir / "summary.csv");
  write_summary_csv(summary, rows);
  if (error) std::rethrow_exception(error);
  return rows;
}

// ---------------------------------------------------------------------------

void generate_data(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (config.benchmark == BenchmarkKind::CustomCsv) throw ConfigError("gen-data needs a synthetic benchmark");
  config.validate();
  const GeneratedData g = generate(config, seed);
  const Benchmark& b = g.bench;
  std::filesystem::create_directories(out_dir);
  const std::size_t p = b.sources.size();

  {
    std::ofstream out(out_dir / "source.csv");
    std::vector<std::pair<std::string, const LabeledDataset*>> parts;
    for (std::size_t i = 0; i < p; ++i) parts.emplace_back(task_name(i, p), &g.sources[i]);
    write_dataset_csv(out, parts);
  }
  {
    std::ofstream out(out_dir / "initial.csv");
    write_dataset_csv(out, {{"target", &g.initial}});
  }

  const Lattice lattice = b.lattice ? *b.lattice : Lattice::uniform(b.domain.lower, b.domain.upper, 22);
  const std::size_t j = b.target.num_safety();
  {
    std::vector<LabeledDataset> grids;
    for (std::size_t t = 0; t <= p; ++t) {
      const Task& task = t < p ? b.sources[t] : b.target;
      LabeledDataset d = LabeledDataset::empty(b.domain.dim(), j);
      Vector z(static_cast<Eigen::Index>(j));
      for (std::size_t i = 0; i < lattice.size(); ++i) {
        const Vector x = lattice.point(i);
        for (std::size_t c = 0; c < j; ++c) z[static_cast<Eigen::Index>(c)] = task.safety_value(c, x);
        d.append(x, task.f(x), z);
      }
      grids.push_back(std::move(d));
    }
    std::vector<std::pair<std::string, const LabeledDataset*>> parts;
    for (std::size_t t = 0; t <= p; ++t) parts.emplace_back(task_name(t, p), &grids[t]);
    std::ofstream out(out_dir / "grid.csv");
    write_dataset_csv(out, parts);
  }

  nlohmann::ordered_json meta;
  meta["benchmark"] = to_string(b.kind);
  meta["seed"] = seed;
  meta["dim"] = b.domain.dim();
  meta["num_safety"] = j;
  meta["num_sources"] = p;
  meta["safety_is_main"] = b.target.safety_is_main();
  meta["noise_std"] = b.noise_std;
  meta["source_from_safe_region"] = b.source_from_safe_region;
  meta["thresholds"] = std::vector<double>(b.target.thresholds.data(), b.target.thresholds.data() + j);
  meta["lattice"]["lower"] = std::vector<double>(lattice.lower.data(), lattice.lower.data() + lattice.lower.size());
  meta["lattice"]["upper"] = std::vector<double>(lattice.upper.data(), lattice.upper.data() + lattice.upper.size());
  meta["lattice"]["counts"] = lattice.counts;
  for (const auto& [key, value] : b.metadata) meta["constants"][key] = value;
  std::ofstream out(out_dir / "metadata.json");
  out << meta.dump(2) << "\n";
}

LoadedBenchmark load_custom_benchmark(const std::filesystem::path& dir) {
  auto open = [&](const char* name) {
    std::ifstream in(dir / name);
    if (!in) throw InputError("custom-csv: cannot open '" + (dir / name).string() + "'");
    return in;
  };
  nlohmann::json meta;
  try {
    auto in = open("metadata.json");
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("custom-csv: malformed metadata.json: ") + e.what());
  }

  LoadedBenchmark lb;
  Benchmark& b = lb.benchmark;
  b.kind = BenchmarkKind::CustomCsv;
  try {
    Lattice lattice;
    const auto lower = meta.at("lattice").at("lower").get<std::vector<double>>();
    const auto upper = meta.at("lattice").at("upper").get<std::vector<double>>();
    lattice.lower = Eigen::Map<const Vector>(lower.data(), static_cast<Eigen::Index>(lower.size()));
    lattice.upper = Eigen::Map<const Vector>(upper.data(), static_cast<Eigen::Index>(upper.size()));
    lattice.counts = meta.at("lattice").at("counts").get<std::vector<std::size_t>>();
    b.lattice = lattice;
    b.domain = Domain{lattice.lower, lattice.upper};
    b.noise_std = meta.at("noise_std").get<double>();
    b.source_from_safe_region = meta.value("source_from_safe_region", false);
    const auto thr = meta.at("thresholds").get<std::vector<double>>();
    const bool safety_is_main = meta.value("safety_is_main", false);

    auto grid_in = open("grid.csv");
    const auto grids = read_dataset_csv(grid_in);
    for (const auto& [name, d] : grids) {
      if (d.size() != lattice.size()) {
        throw InputError("custom-csv: grid for '" + name + "' has " + std::to_string(d.size()) + " rows, lattice has " +
                         std::to_string(lattice.size()));
      }
      Task t;
      t.f = GridFunction{lattice, d.y};
      if (!safety_is_main) {
        for (std::size_t c = 0; c < d.num_safety(); ++c) t.q.push_back(GridFunction{lattice, d.Z.col(static_cast<Eigen::Index>(c))});
      }
      t.thresholds = Eigen::Map<const Vector>(thr.data(), static_cast<Eigen::Index>(thr.size()));
      if (t.thresholds.size() != static_cast<Eigen::Index>(t.num_safety())) {
        throw InputError("custom-csv: threshold count differs from the safety outputs");
      }
      if (name == "target") {
        b.target = std::move(t);
      } else {
        b.sources.push_back(std::move(t));
      }
    }
    if (!b.target.f) throw InputError("custom-csv: grid.csv has no target rows");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("custom-csv: metadata.json: ") + e.what());
  }
  b.domain.validate();

  if (b.lattice->dim() <= 2) {
    for (std::size_t i = 0; i < b.lattice->size(); ++i) b.target_safe_cells.push_back(b.target.safe(b.lattice->point(i)));
    b.target_regions = ccl_label(b.target_safe_cells, b.lattice->counts);
  } else {
    b.lattice.reset();
  }

  {
    auto in = open("initial.csv");
    auto parts = read_dataset_csv(in);
    if (parts.size() != 1 || parts.front().first != "target") {
      throw InputError("custom-csv: initial.csv must hold target rows only");
    }
    lb.initial = std::move(parts.front().second);
  }
  {
    auto in = open("source.csv");
    for (auto& [name, d] : read_dataset_csv(in)) {
      if (name == "target") throw InputError("custom-csv: source.csv must not contain target rows");
      lb.sources.push_back(std::move(d));
    }
  }
  if (lb.sources.size() != b.sources.size()) {
    throw InputError("custom-csv: source.csv and grid.csv disagree on the number of source tasks");
  }
  return lb;
}

}  // namespace safetl
