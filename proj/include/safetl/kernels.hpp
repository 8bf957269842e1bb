#pragma once

#include <cstddef>
#include <string_view>
#include <variant>
#include <vector>

#include "safetl/common.hpp"

namespace safetl {

enum class KernelFamily { RBF, Matern12, Matern32, Matern52 };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

/// Unit-scale profile k(r) of a stationary family at distance r measured in
/// lengthscale units.
double base_kernel(KernelFamily family, double r);

/// (dk/dr) / r, finite at r = 0 for every family except Matern12, where the
/// value at r = 0 is returned as 0 (the accompanying squared differences
/// vanish there).
double base_kernel_slope_over_r(KernelFamily family, double r);

/// Stationary kernel with per-dimension (ARD) lengthscales:
///   k(x, x') = scale * k_family(||(x - x') / l||_2)
struct KernelSpec {
  KernelFamily family = KernelFamily::Matern52;
  Vector lengthscales;
  double scale = 1.0;

  std::size_t dim() const { return static_cast<std::size_t>(lengthscales.size()); }
  void validate() const;

  static KernelSpec isotropic(KernelFamily family, std::size_t dim, double lengthscale,
                              double scale = 1.0);
};

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& x_prime);

/// Gram matrix between the rows of `x` and the rows of `x_prime`.
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& x_prime);

/// Symmetric Gram matrix of the rows of `x` together with its derivatives with
/// respect to the log-parameters, ordered (log l_1, ..., log l_D, log scale).
struct KernelGradient {
  Matrix value;
  std::vector<Matrix> d_log_params;
};
KernelGradient kernel_matrix_with_gradient(const KernelSpec& spec, const Matrix& x);

/// Smallest distance r (lengthscale units) with base_kernel(family, r) <= delta.
/// Closed form for RBF and Matern12, bisection on [0, 50] otherwise.
double radius_for_delta(KernelFamily family, double delta);

// ---------------------------------------------------------------------------
// Multi-task kernels

/// Task identity in a model with P source tasks. Sources are numbered 1..P.
class TaskTag {
 public:
  static TaskTag source(std::size_t index);
  static TaskTag target() { return TaskTag(0, true); }

  bool is_target() const { return target_; }
  std::size_t source_index() const { return index_; }

  /// Row/column of the task in the (P+1)x(P+1) coregionalization matrices:
  /// sources occupy 0..P-1, the target occupies P.
  std::size_t slot(std::size_t num_sources) const;

 private:
  TaskTag(std::size_t index, bool target) : index_(index), target_(target) {}
  std::size_t index_;
  bool target_;
};

/// Linear model of coregionalization:
///   sum_l (W_l W_l^T + diag(kappa)) (x) k_l
/// with unit-scale latent kernels. Each W_l and kappa have length P+1.
struct LmcKernel {
  std::vector<KernelSpec> latents;
  std::vector<Vector> mixing;
  Vector kappa;

  /// Task covariance B_l = W_l W_l^T + diag(kappa).
  Matrix coregionalization(std::size_t latent) const;
};

/// Hierarchical GP. Level i kernel contributes to every pair of tasks whose
/// slots are both >= i. Levels 0..P-1 are the source kernels, level P is the
/// target residual; for P = 1 this is [[k_s, k_s], [k_s, k_s + k_t]].
struct HgpKernel {
  std::vector<KernelSpec> source_kernels;
  KernelSpec target_residual;

  const KernelSpec& level(std::size_t i) const;
  std::size_t num_levels() const { return source_kernels.size() + 1; }
};

class MultiTaskKernelSpec {
 public:
  MultiTaskKernelSpec() = default;
  explicit MultiTaskKernelSpec(LmcKernel lmc) : variant_(std::move(lmc)) {}
  explicit MultiTaskKernelSpec(HgpKernel hgp) : variant_(std::move(hgp)) {}

  bool is_lmc() const { return std::holds_alternative<LmcKernel>(variant_); }
  bool is_hgp() const { return std::holds_alternative<HgpKernel>(variant_); }
  const LmcKernel& lmc() const { return std::get<LmcKernel>(variant_); }
  const HgpKernel& hgp() const { return std::get<HgpKernel>(variant_); }
  LmcKernel& lmc() { return std::get<LmcKernel>(variant_); }
  HgpKernel& hgp() { return std::get<HgpKernel>(variant_); }

  std::size_t num_sources() const;
  std::size_t dim() const;
  void validate() const;

  /// Variance of the target output at any x (kernel is stationary).
  double target_variance() const;

  /// LMC with `latents` unit-scale components (default P+1), W = 0, kappa = 1.
  static MultiTaskKernelSpec default_lmc(std::size_t num_sources, std::size_t dim,
                                         KernelFamily family, double lengthscale,
                                         std::size_t latents = 0);
  /// HGP with all levels sharing the given family and lengthscale.
  static MultiTaskKernelSpec default_hgp(std::size_t num_sources, std::size_t dim,
                                         KernelFamily family, double lengthscale);

 private:
  std::variant<LmcKernel, HgpKernel> variant_;
};

double eval_multitask_kernel(const MultiTaskKernelSpec& spec, const Eigen::Ref<const Vector>& x_a,
                             TaskTag task_a, const Eigen::Ref<const Vector>& x_b, TaskTag task_b);

/// Gram matrix with rows of `x_a` tagged by `slots_a` and rows of `x_b` by
/// `slots_b` (slot convention of TaskTag::slot).
Matrix multitask_kernel_matrix(const MultiTaskKernelSpec& spec, const Matrix& x_a,
                               const std::vector<std::size_t>& slots_a, const Matrix& x_b,
                               const std::vector<std::size_t>& slots_b);

}  // namespace safetl
