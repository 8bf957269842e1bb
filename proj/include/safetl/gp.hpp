#pragma once

#include <cstdint>

#include "safetl/kernels.hpp"
#include "safetl/optimize.hpp"
#include "safetl/random.hpp"

namespace safetl {

/// Lower Cholesky factor of a symmetric positive definite matrix. A plain
/// attempt is made first, then jitter of 1e-10, 1e-8 and 1e-6 times the mean
/// diagonal is added in turn. `jitter_used` receives the absolute amount.
Matrix cholesky_spd(const Matrix& a, double* jitter_used = nullptr);

/// Observations for one task: inputs, main output and J safety outputs.
struct LabeledDataset {
  Matrix X;
  Vector y;
  Matrix Z;

  LabeledDataset() = default;
  LabeledDataset(Matrix x, Vector y_values, Matrix z);
  static LabeledDataset empty(std::size_t dim, std::size_t num_safety);

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t num_safety() const { return static_cast<std::size_t>(Z.cols()); }
  void validate() const;
  void append(const Eigen::Ref<const Vector>& x, double y_value, const Eigen::Ref<const Vector>& z);
  /// Output column: 0 is y, j >= 1 is the j-th safety output.
  Vector channel(std::size_t c) const;
};

struct GPModel {
  KernelSpec kernel;
  double noise_variance = 1e-2;

  void validate() const;
};

struct Prediction {
  Vector mean;
  Vector variance;
};

/// Factorized training state of a single-task GP.
class GPPosterior {
 public:
  GPPosterior() = default;
  GPPosterior(const GPModel& model, const Matrix& x, const Vector& y);

  Prediction predict(const Matrix& test_x) const;
  double log_marginal_likelihood() const;

  const GPModel& model() const { return model_; }
  const Matrix& inputs() const { return x_; }
  const Matrix& factor() const { return l_; }
  const Vector& weights() const { return alpha_; }

 private:
  GPModel model_;
  Matrix x_;
  Vector y_;
  Matrix l_;
  Vector alpha_;
};

Prediction posterior(const GPModel& model, const Matrix& x, const Vector& y, const Matrix& test_x);

double log_marginal_likelihood(const GPModel& model, const Matrix& x, const Vector& y);

/// Log-parameters (log l_1..log l_D, log scale, log noise_variance).
Vector gp_log_params(const GPModel& model);
GPModel gp_from_log_params(KernelFamily family, const Vector& theta);

/// Log marginal likelihood of y under N(0, offset + K + noise I), with the
/// gradient over gp_log_params(model) written to `grad` when non-null.
/// `offset` may be null; it stands for a fixed covariance contribution that
/// does not depend on the parameters.
double lml_and_gradient(const GPModel& model, const Matrix& x, const Vector& y, Vector* grad,
                        const Matrix* offset = nullptr);

/// Log-space bounds for the kernel lengthscales, kernel scale and noise.
struct ParameterBounds {
  double lengthscale_min = 1e-3;
  double lengthscale_max = 1e3;
  double scale_min = 1e-3;
  double scale_max = 1e3;
  double noise_min = 1e-6;
  double noise_max = 1e1;
};

struct FitOptions {
  int restarts = 5;                 // random starts in addition to the incoming parameters
  std::uint64_t seed = 0;
  ParameterBounds bounds;
  LbfgsOptions lbfgs;
  bool fit_scale = true;            // false holds the kernel scale at its incoming value
};

struct FitResult {
  GPModel model;
  double lml = 0.0;
  int successful_starts = 0;
};

/// Type-II maximum likelihood: multi-start L-BFGS over the log-parameters,
/// the incoming model being the first start. Throws FitError when no start
/// reaches a finite objective.
FitResult fit_gp(const GPModel& initial, const Matrix& x, const Vector& y,
                 const FitOptions& options, const Matrix* offset = nullptr);

/// Random start point for one kernel on inputs `x`: lengthscales
/// log-uniform in [0.05, 2] times the per-dimension data range.
Vector random_kernel_log_params(const Matrix& x, std::size_t dim, Rng& rng,
                                bool with_scale);

}  // namespace safetl
