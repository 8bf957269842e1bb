#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "safetl/csv_io.hpp"
#include "safetl/experiment.hpp"
#include "safetl/normal.hpp"
#include "safetl/theory.hpp"

using namespace safetl;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out,
            bool keep_going) {
  ExperimentConfig cfg = parse_config(config_path);
  if (seed) cfg.seeds = {*seed};
  if (!out.empty()) cfg.output_dir = out;
  const auto rows = run_experiments(cfg, keep_going);
  bool failed = false;
  for (const auto& r : rows) {
    std::cout << "seed " << r.seed << " " << r.method << ": " << r.status << ", " << r.queries
              << " queries, safe ratio " << r.safe_query_ratio << "\n";
    failed = failed || r.status == "fit_failed";
  }
  std::cout << "results written to " << cfg.output_dir.string() << "\n";
  return failed && !keep_going ? kRuntime : kOk;
}

int cmd_gen_data(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  ExperimentConfig cfg = parse_config(config_path);
  const std::uint64_t s = seed ? *seed : cfg.seeds.front();
  const std::filesystem::path dir = out.empty() ? cfg.output_dir / ("data_seed" + std::to_string(s)) : std::filesystem::path(out);
  generate_data(cfg, s, dir);
  std::cout << "dataset written to " << dir.string() << "\n";
  return kOk;
}

struct BoundFlags {
  std::size_t n = 10;
  double sigma = 0.1;
  double k_scale = 1.0;
  double threshold = 0.0;
  double beta = 4.0;
  std::string kernel = "matern52";
  std::vector<double> lengthscale{0.1256};
  bool csv = false;
};

int cmd_theory_bound(const BoundFlags& f) {
  if (f.n == 0 || !(f.sigma > 0.0) || !(f.k_scale > 0.0) || !(f.beta >= 0.0)) {
    throw InputError("theory-bound: need N >= 1, sigma > 0, k_scale > 0, beta >= 0");
  }
  const KernelFamily family = parse_kernel_family(f.kernel);
  const Vector ls = Eigen::Map<const Vector>(f.lengthscale.data(), static_cast<Eigen::Index>(f.lengthscale.size()));
  const ExplorationBound b = exploration_radius(family, ls, f.beta, f.threshold, f.n, f.sigma, f.k_scale);
  if (!b.delta) {
    if (f.csv) {
      std::cout << "delta,radius,bound,condition\n,,," << describe(b.condition) << "\n";
    } else {
      std::cout << "no bound (trivially-safe prior regime): " << describe(b.condition) << "\n";
    }
    return kOk;
  }
  char line[256];
  if (f.csv) {
    std::snprintf(line, sizeof line, "delta,radius,bound,condition\n%.10g,%.10g,%.10g,%s\n", *b.delta, *b.radius,
                  b.bound, describe(b.condition).c_str());
  } else {
    std::snprintf(line, sizeof line, "delta*   %.6g\nradius r %.6g\nbound    %.6g  (target Phi(beta^1/2) = %.6g)\n",
                  *b.delta, *b.radius, b.bound, normal_cdf(std::sqrt(f.beta)));
  }
  std::cout << line;
  return kOk;
}

int cmd_report(const std::string& out) {
  const std::filesystem::path path = std::filesystem::is_directory(out) ? std::filesystem::path(out) / "summary.csv"
                                                                       : std::filesystem::path(out);
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  write_report(std::cout, read_summary_csv(in));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe active learning with transfer from source tasks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool keep_going = false;
  BoundFlags bound;

  auto* run = app.add_subcommand("run", "Run the configured methods over all seeds");
  run->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Run this seed only");
  run->add_option("--out", out, "Output directory (overrides output_dir)");
  run->add_flag("--keep-going", keep_going, "Exit 0 even when a fit fails");

  auto* gen = app.add_subcommand("gen-data", "Write a benchmark instance as CSV plus metadata.json");
  gen->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Seed (default: first configured seed)");
  gen->add_option("--out", out, "Output directory");

  auto* theory = app.add_subcommand("theory-bound", "Exploration radius and safety-probability bound");
  theory->add_option("-N,--n", bound.n, "Number of observations")->capture_default_str();
  theory->add_option("--sigma", bound.sigma, "Observation noise standard deviation")->capture_default_str();
  theory->add_option("--k-scale", bound.k_scale, "Kernel variance")->capture_default_str();
  theory->add_option("-T,--threshold", bound.threshold, "Safety threshold")->capture_default_str();
  theory->add_option("--beta", bound.beta, "Confidence parameter")->capture_default_str();
  theory->add_option("--kernel", bound.kernel, "rbf, matern12, matern32 or matern52")->capture_default_str();
  theory->add_option("--lengthscale", bound.lengthscale, "Lengthscale(s); the largest sets the radius")
      ->delimiter(',')
      ->capture_default_str();
  theory->add_flag("--csv", bound.csv, "Machine-readable output");

  auto* report = app.add_subcommand("report", "Mean +- standard error per method from summary.csv");
  report->add_option("--out", out, "Results directory or summary.csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return cmd_run(config_path, seed, out, keep_going);
    if (*gen) return cmd_gen_data(config_path, seed, out);
    if (*theory) return cmd_theory_bound(bound);
    if (*report) return cmd_report(out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
