#include "safetl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace safetl {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.23606797749979;

void require_dim(const KernelSpec& spec, Eigen::Index cols, const char* where) {
  if (cols != static_cast<Eigen::Index>(spec.dim())) {
    throw InputError(std::string(where) + ": input dimension " + std::to_string(cols) +
                     " does not match kernel dimension " + std::to_string(spec.dim()));
  }
}

double scaled_distance(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                       const Eigen::Ref<const Vector>& y) {
  double r2 = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double diff = (x[d] - y[d]) / spec.lengthscales[d];
    r2 += diff * diff;
  }
  return std::sqrt(std::max(r2, 0.0));
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::RBF: return "rbf";
    case KernelFamily::Matern12: return "matern12";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Matern52: return "matern52";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "rbf" || name == "RBF") return KernelFamily::RBF;
  if (name == "matern12" || name == "Matern12") return KernelFamily::Matern12;
  if (name == "matern32" || name == "Matern32") return KernelFamily::Matern32;
  if (name == "matern52" || name == "Matern52") return KernelFamily::Matern52;
  throw InputError("unknown kernel family '" + std::string(name) + "'");
}

double base_kernel(KernelFamily family, double r) {
  r = std::max(r, 0.0);
  switch (family) {
    case KernelFamily::RBF: return std::exp(-0.5 * r * r);
    case KernelFamily::Matern12: return std::exp(-r);
    case KernelFamily::Matern32: return (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
    case KernelFamily::Matern52:
      return (1.0 + kSqrt5 * r + (5.0 / 3.0) * r * r) * std::exp(-kSqrt5 * r);
  }
  return 0.0;
}

double base_kernel_slope_over_r(KernelFamily family, double r) {
  r = std::max(r, 0.0);
  switch (family) {
    case KernelFamily::RBF: return -std::exp(-0.5 * r * r);
    case KernelFamily::Matern12: return r > 0.0 ? -std::exp(-r) / r : 0.0;
    case KernelFamily::Matern32: return -3.0 * std::exp(-kSqrt3 * r);
    case KernelFamily::Matern52:
      return -(5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
  }
  return 0.0;
}

void KernelSpec::validate() const {
  if (lengthscales.size() == 0) throw InputError("KernelSpec: empty lengthscale vector");
  for (Eigen::Index d = 0; d < lengthscales.size(); ++d) {
    if (!(lengthscales[d] > 0.0) || !std::isfinite(lengthscales[d])) {
      throw InputError("KernelSpec: lengthscales must be positive and finite");
    }
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InputError("KernelSpec: scale must be positive and finite");
  }
}

KernelSpec KernelSpec::isotropic(KernelFamily family, std::size_t dim, double lengthscale,
                                 double scale) {
  KernelSpec spec{family, Vector::Constant(static_cast<Eigen::Index>(dim), lengthscale), scale};
  spec.validate();
  return spec;
}

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& x_prime) {
  if (x.size() != x_prime.size()) throw InputError("eval_kernel: input sizes differ");
  require_dim(spec, x.size(), "eval_kernel");
  return spec.scale * base_kernel(spec.family, scaled_distance(spec, x, x_prime));
}

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& x_prime) {
  require_dim(spec, x.cols(), "kernel_matrix");
  require_dim(spec, x_prime.cols(), "kernel_matrix");
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x_prime.rows();
  const Eigen::Index dim = x.cols();
  const Vector inv_l = spec.lengthscales.cwiseInverse();
  // Row-major copies of scaled inputs keep the inner distance loop contiguous.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a =
      x * inv_l.asDiagonal();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> b =
      x_prime * inv_l.asDiagonal();
  Matrix k(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double* bj = b.row(j).data();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* ai = a.row(i).data();
      double r2 = 0.0;
      for (Eigen::Index d = 0; d < dim; ++d) {
        const double diff = ai[d] - bj[d];
        r2 += diff * diff;
      }
      k(i, j) = spec.scale * base_kernel(spec.family, std::sqrt(r2));
    }
  }
  return k;
}

KernelGradient kernel_matrix_with_gradient(const KernelSpec& spec, const Matrix& x) {
  require_dim(spec, x.cols(), "kernel_matrix_with_gradient");
  const Eigen::Index n = x.rows();
  const Eigen::Index dim = x.cols();
  const Vector inv_l = spec.lengthscales.cwiseInverse();
  const Matrix a = x * inv_l.asDiagonal();

  KernelGradient out;
  out.value.resize(n, n);
  out.d_log_params.assign(static_cast<std::size_t>(dim) + 1, Matrix(n, n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      double r2 = 0.0;
      for (Eigen::Index d = 0; d < dim; ++d) {
        const double diff = a(i, d) - a(j, d);
        r2 += diff * diff;
      }
      const double r = std::sqrt(r2);
      const double kij = spec.scale * base_kernel(spec.family, r);
      const double slope = spec.scale * base_kernel_slope_over_r(spec.family, r);
      out.value(i, j) = out.value(j, i) = kij;
      for (Eigen::Index d = 0; d < dim; ++d) {
        const double diff = a(i, d) - a(j, d);
        // d r / d log l_d = -diff^2 / r, so dk/dlog l_d = -(k'(r)/r) diff^2.
        const double g = -slope * diff * diff;
        out.d_log_params[d](i, j) = out.d_log_params[d](j, i) = g;
      }
      out.d_log_params[dim](i, j) = out.d_log_params[dim](j, i) = kij;
    }
  }
  return out;
}

double radius_for_delta(KernelFamily family, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InputError("radius_for_delta: delta must lie in (0, 1)");
  }
  switch (family) {
    case KernelFamily::RBF: return std::sqrt(std::log(1.0 / (delta * delta)));
    case KernelFamily::Matern12: return std::log(1.0 / delta);
    default: break;
  }
  double lo = 0.0;
  double hi = 50.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (base_kernel(family, mid) <= delta) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

// ---------------------------------------------------------------------------

TaskTag TaskTag::source(std::size_t index) {
  if (index == 0) throw InputError("TaskTag: source indices start at 1");
  return TaskTag(index, false);
}

std::size_t TaskTag::slot(std::size_t num_sources) const {
  if (target_) return num_sources;
  if (index_ > num_sources) {
    throw InputError("TaskTag: source index " + std::to_string(index_) +
                     " exceeds the declared number of sources " + std::to_string(num_sources));
  }
  return index_ - 1;
}

Matrix LmcKernel::coregionalization(std::size_t latent) const {
  const Vector& w = mixing.at(latent);
  Matrix b = w * w.transpose();
  b.diagonal() += kappa;
  return b;
}

const KernelSpec& HgpKernel::level(std::size_t i) const {
  if (i < source_kernels.size()) return source_kernels[i];
  if (i == source_kernels.size()) return target_residual;
  throw InputError("HgpKernel: level index out of range");
}

std::size_t MultiTaskKernelSpec::num_sources() const {
  if (is_hgp()) return hgp().source_kernels.size();
  const auto& m = lmc();
  return m.kappa.size() > 0 ? static_cast<std::size_t>(m.kappa.size()) - 1 : 0;
}

std::size_t MultiTaskKernelSpec::dim() const {
  if (is_hgp()) return hgp().target_residual.dim();
  return lmc().latents.empty() ? 0 : lmc().latents.front().dim();
}

void MultiTaskKernelSpec::validate() const {
  if (is_hgp()) {
    const auto& h = hgp();
    if (h.source_kernels.empty()) throw InputError("HGP: at least one source level required");
    h.target_residual.validate();
    for (const auto& k : h.source_kernels) {
      k.validate();
      if (k.dim() != h.target_residual.dim()) throw InputError("HGP: level dimensions differ");
    }
    return;
  }
  const auto& m = lmc();
  if (m.kappa.size() < 2) throw InputError("LMC: kappa must cover at least one source and the target");
  if (m.latents.empty() || m.latents.size() != m.mixing.size()) {
    throw InputError("LMC: latent kernel and mixing vector counts differ");
  }
  for (Eigen::Index t = 0; t < m.kappa.size(); ++t) {
    if (!(m.kappa[t] > 0.0)) throw InputError("LMC: kappa entries must be positive");
  }
  for (std::size_t l = 0; l < m.latents.size(); ++l) {
    m.latents[l].validate();
    if (m.latents[l].scale != 1.0) throw InputError("LMC: latent kernels must have unit scale");
    if (m.latents[l].dim() != m.latents.front().dim()) {
      throw InputError("LMC: latent dimensions differ");
    }
    if (m.mixing[l].size() != m.kappa.size()) throw InputError("LMC: W_l must have length P+1");
  }
}

double MultiTaskKernelSpec::target_variance() const {
  if (is_hgp()) {
    const auto& h = hgp();
    double v = h.target_residual.scale;
    for (const auto& k : h.source_kernels) v += k.scale;
    return v;
  }
  const auto& m = lmc();
  const std::size_t t = num_sources();
  double v = 0.0;
  for (std::size_t l = 0; l < m.latents.size(); ++l) v += m.coregionalization(l)(t, t);
  return v;
}

MultiTaskKernelSpec MultiTaskKernelSpec::default_lmc(std::size_t num_sources, std::size_t dim,
                                                     KernelFamily family, double lengthscale,
                                                     std::size_t latents) {
  if (latents == 0) latents = num_sources + 1;
  LmcKernel m;
  const auto tasks = static_cast<Eigen::Index>(num_sources + 1);
  for (std::size_t l = 0; l < latents; ++l) {
    m.latents.push_back(KernelSpec::isotropic(family, dim, lengthscale, 1.0));
    m.mixing.push_back(Vector::Zero(tasks));
  }
  m.kappa = Vector::Ones(tasks);
  MultiTaskKernelSpec spec(std::move(m));
  spec.validate();
  return spec;
}

MultiTaskKernelSpec MultiTaskKernelSpec::default_hgp(std::size_t num_sources, std::size_t dim,
                                                     KernelFamily family, double lengthscale) {
  HgpKernel h;
  for (std::size_t p = 0; p < num_sources; ++p) {
    h.source_kernels.push_back(KernelSpec::isotropic(family, dim, lengthscale, 1.0));
  }
  h.target_residual = KernelSpec::isotropic(family, dim, lengthscale, 1.0);
  MultiTaskKernelSpec spec(std::move(h));
  spec.validate();
  return spec;
}

namespace {

double multitask_value(const MultiTaskKernelSpec& spec, const Eigen::Ref<const Vector>& x_a,
                       std::size_t slot_a, const Eigen::Ref<const Vector>& x_b,
                       std::size_t slot_b) {
  if (spec.is_hgp()) {
    const auto& h = spec.hgp();
    const std::size_t top = std::min(slot_a, slot_b);
    double v = 0.0;
    for (std::size_t i = 0; i <= top; ++i) v += eval_kernel(h.level(i), x_a, x_b);
    return v;
  }
  const auto& m = spec.lmc();
  double v = 0.0;
  for (std::size_t l = 0; l < m.latents.size(); ++l) {
    double b = m.mixing[l][slot_a] * m.mixing[l][slot_b];
    if (slot_a == slot_b) b += m.kappa[slot_a];
    if (b != 0.0) v += b * eval_kernel(m.latents[l], x_a, x_b);
  }
  return v;
}

}  // namespace

double eval_multitask_kernel(const MultiTaskKernelSpec& spec, const Eigen::Ref<const Vector>& x_a,
                             TaskTag task_a, const Eigen::Ref<const Vector>& x_b, TaskTag task_b) {
  const std::size_t p = spec.num_sources();
  return multitask_value(spec, x_a, task_a.slot(p), x_b, task_b.slot(p));
}

Matrix multitask_kernel_matrix(const MultiTaskKernelSpec& spec, const Matrix& x_a,
                               const std::vector<std::size_t>& slots_a, const Matrix& x_b,
                               const std::vector<std::size_t>& slots_b) {
  if (static_cast<Eigen::Index>(slots_a.size()) != x_a.rows() ||
      static_cast<Eigen::Index>(slots_b.size()) != x_b.rows()) {
    throw InputError("multitask_kernel_matrix: one task slot per input row required");
  }
  const std::size_t tasks = spec.num_sources() + 1;
  for (auto s : slots_a) {
    if (s >= tasks) throw InputError("multitask_kernel_matrix: unknown task slot");
  }
  for (auto s : slots_b) {
    if (s >= tasks) throw InputError("multitask_kernel_matrix: unknown task slot");
  }

  Matrix k = Matrix::Zero(x_a.rows(), x_b.rows());
  if (spec.is_hgp()) {
    const auto& h = spec.hgp();
    for (std::size_t level = 0; level < h.num_levels(); ++level) {
      const Matrix kl = kernel_matrix(h.level(level), x_a, x_b);
      for (Eigen::Index j = 0; j < k.cols(); ++j) {
        for (Eigen::Index i = 0; i < k.rows(); ++i) {
          if (std::min(slots_a[i], slots_b[j]) >= level) k(i, j) += kl(i, j);
        }
      }
    }
    return k;
  }
  const auto& m = spec.lmc();
  for (std::size_t l = 0; l < m.latents.size(); ++l) {
    const Matrix b = m.coregionalization(l);
    const Matrix kl = kernel_matrix(m.latents[l], x_a, x_b);
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      for (Eigen::Index i = 0; i < k.rows(); ++i) {
        k(i, j) += b(slots_a[i], slots_b[j]) * kl(i, j);
      }
    }
  }
  return k;
}

}  // namespace safetl
