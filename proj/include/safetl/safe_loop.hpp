#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safetl/datasets.hpp"
#include "safetl/gp.hpp"
#include "safetl/metrics.hpp"
#include "safetl/transfer.hpp"

namespace safetl {

/// alpha = 1 - Phi(beta^{1/2}), for beta >= 0.
double alpha_from_beta(double beta);
/// Inverse of alpha_from_beta on alpha in (0, 0.5].
double beta_from_alpha(double alpha);

/// Candidate inputs plus a mask of points that may still be queried.
class Pool {
 public:
  explicit Pool(Matrix candidates);

  const Matrix& candidates() const { return x_; }
  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t alive_count() const { return alive_count_; }
  bool alive(std::size_t i) const { return alive_[i]; }
  void remove(std::size_t i);

 private:
  Matrix x_;
  std::vector<bool> alive_;
  std::size_t alive_count_ = 0;
};

struct SafeSet {
  std::vector<std::size_t> members;  // pool indices, ascending
  double beta = 4.0;
  Vector thresholds;
  bool noisy = true;
};

/// Pool points (alive ones only unless `include_removed`) whose lower
/// confidence bound clears every threshold. `noise_variances[j]` enters under
/// the square root in noisy mode.
SafeSet compute_safe_set(const std::vector<Prediction>& safety, const std::vector<double>& noise_variances,
                         const Pool& pool, double beta, const Vector& thresholds, bool noisy,
                         bool include_removed = false);

struct AcquisitionScores {
  Vector scores;
  std::size_t clamped = 0;  // variances raised to 1e-12 before the log
};

/// Sum over models of the Gaussian entropy 0.5 log(2 pi e sigma^2).
AcquisitionScores acquisition_scores(const std::vector<Vector>& variances);

/// Safe member with the largest score, lowest index on ties; empty when the
/// safe set is empty.
std::optional<std::size_t> select_query(const Vector& scores, const SafeSet& safe);

enum class Method { Sal, FullHgp, FullLmc, EffHgp };

std::string to_string(Method method);
/// Accepts sal, full_hgp, full_lmc and eff_hgp; eff_lmc is rejected as an
/// unsupported combination.
Method parse_method(const std::string& name);

enum class TraceStatus { Completed, SafeSetExhausted, FitFailed };
std::string to_string(TraceStatus status);

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t query_index = 0;
  Vector x;
  double y = 0.0;
  Vector z;
  bool was_safe = false;          // observed z clears every threshold
  std::size_t safe_set_size = 0;  // alive safe candidates at selection time
  double rmse = 0.0;
  double tp_area = 0.0;
  double fp_area = 0.0;
  std::optional<int> region_label;
  double fit_seconds = 0.0;

  // Local-exploration check (single-task runs with one safety output).
  std::optional<double> exploration_radius;
  double nearest_distance = 0.0;   // from the query to the closest observed input
  bool bound_assumption_holds = false;
};

struct ExperimentTrace {
  Method method = Method::Sal;
  std::vector<IterationRecord> records;
  TraceStatus status = TraceStatus::Completed;
  std::string message;
};

/// Fraction of queries observed safe.
double safe_query_ratio(const ExperimentTrace& trace);

struct BoundCheck {
  std::size_t checked = 0;
  std::size_t skipped = 0;       // assumption on the observation norm violated
  std::size_t violations = 0;    // queries beyond the exploration radius
};

/// Every checked query must lie within the exploration radius of the data
/// observed before it.
BoundCheck check_local_exploration(const ExperimentTrace& trace);

/// Everything the loop needs besides the oracle.
struct LoopData {
  LabeledDataset initial;
  std::vector<LabeledDataset> sources;  // same channel layout as the target
  Matrix pool;
  std::vector<bool> pool_safe;          // ground truth per pool point
  TestSet test;
  std::optional<Lattice> lattice;
  std::optional<RegionLabeling> regions;
};

struct LoopConfig {
  std::size_t n_query = 50;
  double beta = 4.0;
  bool noisy = true;
  std::size_t refit_every = 1;
  KernelFamily family = KernelFamily::Matern52;
  int initial_restarts = 5;
  int refit_restarts = 1;
  std::uint64_t seed = 0;
  bool timing = true;              // false records fit_seconds = 0
  std::size_t lmc_latents = 0;     // 0 means P + 1

  /// Fixed parameters per channel (main output first). When set, no fitting
  /// happens and these models are used throughout.
  std::optional<std::vector<GPModel>> frozen_single;
  std::optional<std::vector<TransferModel>> frozen_transfer;
};

/// Single-task safe active learning.
ExperimentTrace run_sal(Oracle oracle, const LoopData& data, const LoopConfig& config);

/// Transfer safe active learning refitting every multitask parameter.
ExperimentTrace run_full_transfer(Oracle oracle, const LoopData& data, const LoopConfig& config,
                                  bool lmc);

/// Transfer safe active learning with source parameters fitted once and the
/// source factor cached; HGP only.
ExperimentTrace run_modular_transfer(Oracle oracle, const LoopData& data, const LoopConfig& config);

ExperimentTrace run_method(Method method, Oracle oracle, const LoopData& data, const LoopConfig& config);

}  // namespace safetl
