#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "safetl/gp.hpp"
#include "safetl/metrics.hpp"
#include "safetl/random.hpp"

namespace safetl {

struct Domain {
  Vector lower;
  Vector upper;

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  void validate() const;
  bool contains(const Eigen::Ref<const Vector>& x, double tolerance = 1e-9) const;
  Matrix sample(std::size_t n, Rng& rng) const;
};

using ScalarFunction = std::function<double(const Vector&)>;

/// Noise-free functions of one task. When `q` is empty the single safety
/// output is the main output itself (z = y).
struct Task {
  ScalarFunction f;
  std::vector<ScalarFunction> q;
  Vector thresholds;

  bool safety_is_main() const { return q.empty(); }
  std::size_t num_safety() const { return q.empty() ? 1 : q.size(); }
  double safety_value(std::size_t j, const Vector& x) const;
  bool safe(const Vector& x) const;
};

struct Observation {
  double y = 0.0;
  Vector z;
};

/// Simulated system answering queries with Gaussian observation noise drawn
/// from a private stream.
class Oracle {
 public:
  Oracle(Task task, Domain domain, double noise_std, std::uint64_t seed);

  Observation query(const Eigen::Ref<const Vector>& x);
  bool ground_truth_safe(const Eigen::Ref<const Vector>& x) const;
  bool observed_safe(const Observation& obs) const;

  const Task& task() const { return task_; }
  const Domain& domain() const { return domain_; }
  double noise_std() const { return noise_std_; }

 private:
  Task task_;
  Domain domain_;
  double noise_std_;
  Rng rng_;
};

/// Values on a regular lattice, read back by multilinear interpolation.
struct GridFunction {
  Lattice lattice;
  Vector values;

  double operator()(const Vector& x) const;
};

/// Population mean and standard deviation used to normalize an output.
struct Normalization {
  double mean = 0.0;
  double std = 1.0;
  double apply(double v) const { return (v - mean) / std; }
};
Normalization normalization_of(const Vector& values);

// ---------------------------------------------------------------------------
// Multi-output GP samples

struct MogpHyper {
  std::vector<Matrix> mixing;         // W_l, 2x2 with unit-norm rows
  std::vector<Vector> lengthscales;   // per latent
};

MogpHyper sample_mogp_hyper(std::size_t dim, Rng& rng, double l_lo = 0.1, double l_hi = 1.0);

/// Factorized generator for functions drawn from sum_l W_l W_l^T (x) k_l on a
/// lattice. Each draw returns an n x 2 matrix (source column, target column)
/// normalized to mean 0 and unit variance per column.
class MogpSampler {
 public:
  MogpSampler(const Lattice& lattice, MogpHyper hyper);
  Matrix draw(Rng& rng) const;
  const Lattice& lattice() const { return lattice_; }
  const MogpHyper& hyper() const { return hyper_; }

 private:
  Lattice lattice_;
  MogpHyper hyper_;
  std::vector<Matrix> l_kernel_;
  std::vector<Matrix> l_task_;
};

struct MogpSample {
  Lattice lattice;
  MogpHyper hyper;
  Matrix f;  // n x 2: source, target
  Matrix q;
};

/// One unfiltered draw of (f, q) on 100^D lattice points over [-2, 2]^D.
MogpSample sample_mogp_functions(std::size_t dim, std::uint64_t seed, std::size_t per_dim = 100);

// ---------------------------------------------------------------------------
// Closed-form task families

struct BraninConstants {
  double a, b, c, r, s, t;
  static BraninConstants target();
  static BraninConstants sample(Rng& rng);
};

/// a (x2 - b x1^2 + c x1 - r)^2 + s (1 - t) cos(x1) + s on [-5, 10] x [0, 15].
double branin(const Vector& x, const BraninConstants& k);
Domain branin_domain();

struct HartmannConstants {
  double a[4];
  static HartmannConstants target();
  static HartmannConstants sample(Rng& rng);
};

/// -sum_i a_i exp(-sum_j A_ij (x_j - P_ij)^2) on [0, 1]^3.
double hartmann3(const Vector& x, const HartmannConstants& k);
Domain hartmann_domain();

// ---------------------------------------------------------------------------
// Rejection filter

struct RejectionReport {
  bool accepted = false;
  int failed_condition = 0;               // 0 when accepted, else 1, 2 or 3
  int target_regions = 0;
  std::vector<double> shared_fractions;   // per target region, of the whole lattice
};

/// Accepts when the target has at least two disjoint safe regions, at least
/// two of them share safe area with the source, and at least two shared
/// areas each exceed 5% of the lattice.
RejectionReport rejection_filter(const std::vector<bool>& source_safe,
                                 const std::vector<bool>& target_safe,
                                 const std::vector<std::size_t>& dims);

// ---------------------------------------------------------------------------
// Benchmarks

enum class BenchmarkKind { GP1D, GP2D, Branin, Hartmann3, Toy1D, CustomCsv };

std::string to_string(BenchmarkKind kind);
BenchmarkKind parse_benchmark(const std::string& name);

struct BenchmarkSizes {
  std::size_t n_source = 100;
  std::size_t n_init = 20;
  std::size_t n_query = 100;
  std::size_t n_pool = 5000;
  static BenchmarkSizes defaults(BenchmarkKind kind);
};

/// Subset of the domain used for sampling: lattice cells, or the whole box.
struct Region {
  std::optional<Lattice> lattice;
  std::vector<std::size_t> cells;
  bool whole_domain() const { return !lattice.has_value(); }
};

struct Benchmark {
  BenchmarkKind kind = BenchmarkKind::Branin;
  Domain domain;
  Task target;
  std::vector<Task> sources;
  double noise_std = 0.01;
  bool source_from_safe_region = false;

  // Present for lattice-backed benchmarks (D <= 2).
  std::optional<Lattice> lattice;
  std::vector<bool> target_safe_cells;
  RegionLabeling target_regions;
  Region initial_region;

  std::vector<std::pair<std::string, double>> metadata;
  /// Noise-free lattice values per task, columns (f, q_1..q_J); sources first.
  std::vector<Matrix> grid_values;
};

/// Builds a benchmark from a seed, running the rejection filter where the
/// benchmark requires disjoint regions. Throws when 1000 attempts fail.
Benchmark make_benchmark(BenchmarkKind kind, std::uint64_t seed, std::size_t num_sources = 1);

Matrix make_pool(const Domain& domain, std::size_t n_pool, std::uint64_t seed);

/// Initial target observations inside `region`, each ground-truth safe and
/// observed safe.
LabeledDataset make_initial_target_data(Oracle& oracle, const Region& region, std::size_t n_init,
                                        std::uint64_t seed);

LabeledDataset make_source_data(Oracle& source_oracle, std::size_t n, bool safe_region_only,
                                std::uint64_t seed);

/// Test set of points drawn uniformly from the true safe set with noisy y.
struct TestSet {
  Matrix x;
  Vector y;
};
TestSet make_safe_test_set(Oracle& oracle, std::size_t n, std::uint64_t seed);

}  // namespace safetl
