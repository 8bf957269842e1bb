#pragma once

#include <memory>
#include <vector>

#include "safetl/gp.hpp"
#include "safetl/kernels.hpp"

namespace safetl {

/// One output channel observed on P source tasks and on the target task.
struct MultiTaskData {
  std::vector<Matrix> source_x;
  std::vector<Vector> source_y;
  Matrix target_x;
  Vector target_y;

  std::size_t num_sources() const { return source_x.size(); }
  std::size_t num_source_points() const;
  std::size_t dim() const { return static_cast<std::size_t>(target_x.cols()); }
  void validate() const;
};

/// Inputs of several tasks stacked row-wise, each row tagged with its task slot.
struct StackedInputs {
  Matrix x;
  std::vector<std::size_t> slots;
};

StackedInputs stack_sources(const MultiTaskData& data);
StackedInputs stack_all(const MultiTaskData& data);
Vector stack_source_outputs(const MultiTaskData& data);

struct SourceCache;

struct TransferModel {
  MultiTaskKernelSpec kernel;
  Vector source_noise;             // one variance per source task
  double target_noise = 1e-2;
  std::shared_ptr<const SourceCache> cache;

  std::size_t num_sources() const { return kernel.num_sources(); }
  void validate() const;
};

/// Frozen source-side state: source parameters, the stacked source inputs and
/// outputs of one channel, and the Cholesky factor of the source block.
struct SourceCache {
  std::vector<KernelSpec> source_kernels;
  Vector source_noise;
  StackedInputs inputs;
  Vector outputs;
  Matrix l_source;
  Vector whitened;        // L_source^{-1} y_source
  double source_lml = 0;  // log N(y_source | 0, source block)

  /// Throws ConfigError when the model's source parameters differ from the
  /// frozen ones or the model is not an HGP.
  void check_compatible(const TransferModel& model) const;
};

/// Covariance of the stacked observations (sources 1..P, then the target)
/// including per-task noise on the diagonal.
Matrix joint_covariance(const TransferModel& model, const MultiTaskData& data);

/// Cholesky factor of [[S, C], [C^T, T]] from L = L(S) by solving V = L^{-1} C
/// and factorizing the Schur block T - V^T V.
Matrix two_step_cholesky(const Matrix& l_source, const Matrix& k_cross, const Matrix& k_target_block);

/// Factorized joint posterior, predicting the target task. With a source
/// cache the source block factor is reused and only the target Schur block
/// is factorized.
class TransferPosterior {
 public:
  TransferPosterior(const TransferModel& model, const MultiTaskData& data);

  Prediction predict(const Matrix& test_x) const;
  /// Same as predict with L_source^{-1} K(source, test) supplied by the caller
  /// (see source_projection); only meaningful with a cache.
  Prediction predict_projected(const Matrix& test_x, const Matrix& projection) const;
  /// L_source^{-1} K(source, test) for target-task test points.
  Matrix source_projection(const Matrix& test_x) const;

  double log_marginal_likelihood() const;
  /// Full lower factor of the joint covariance, assembled from the blocks.
  Matrix factor() const;

 private:
  Prediction finish(const Matrix& test_x, const Matrix& a) const;

  TransferModel model_;
  StackedInputs source_;
  Matrix target_x_;
  Matrix l_source_;
  Matrix v_;        // L_source^{-1} K(source, target)
  Matrix l_schur_;
  Vector w_source_;
  Vector w_target_;
  double source_logdet_half_ = 0.0;
};

Prediction transfer_posterior(const TransferModel& model, const MultiTaskData& data,
                              const Matrix& test_x);

/// Log marginal likelihood of all observations of the channel. Uses the
/// cache when the model carries one.
double transfer_log_marginal_likelihood(const TransferModel& model, const MultiTaskData& data);

/// Packed log-parameters of the full model.
///   HGP: per level (log l_1..D, log scale), then log source noises, log target noise.
///   LMC: per latent log l_1..D, then per latent W_l, then log kappa, then log noises.
Vector transfer_params(const TransferModel& model);
TransferModel transfer_from_params(const TransferModel& templ, const Vector& theta);
Box transfer_param_box(const TransferModel& model, const ParameterBounds& bounds);

/// Joint log marginal likelihood and its gradient over transfer_params.
double transfer_lml_and_gradient(const TransferModel& model, const MultiTaskData& data, Vector* grad);

struct TransferFitResult {
  TransferModel model;
  double lml = 0.0;
  int successful_starts = 0;
};

/// Full transfer fit: every parameter free, multi-start L-BFGS on the joint LML.
TransferFitResult fit_full_transfer(const TransferModel& initial, const MultiTaskData& data,
                                    const FitOptions& options);

/// Fits the source levels and noises of an HGP on source data alone and
/// returns the frozen cache for the given channel.
SourceCache precompute_source(const TransferModel& initial, const MultiTaskData& data,
                              const FitOptions& options);

/// Builds a cache from the model's current source parameters without fitting.
SourceCache build_source_cache(const TransferModel& model, const MultiTaskData& data);

/// Copy of `model` carrying `cache`, with source parameters taken from it.
TransferModel attach_cache(const TransferModel& model, std::shared_ptr<const SourceCache> cache);

/// Modular fit: target residual kernel and target noise only, reusing the
/// cached source factor.
TransferFitResult fit_target_given_source(const TransferModel& initial, const MultiTaskData& data,
                                          const FitOptions& options);

}  // namespace safetl
