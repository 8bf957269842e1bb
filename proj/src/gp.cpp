#include "safetl/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace safetl {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

bool try_llt(const Matrix& a, Matrix& out) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  const auto diag = out.diagonal();
  return diag.allFinite() && (diag.array() > 0.0).all();
}

}  // namespace

Matrix cholesky_spd(const Matrix& a, double* jitter_used) {
  if (a.rows() != a.cols()) throw InputError("cholesky_spd: matrix is not square");
  if (!a.allFinite()) throw FactorizationError("cholesky_spd: matrix has non-finite entries");
  Matrix l;
  if (jitter_used != nullptr) *jitter_used = 0.0;
  if (a.rows() == 0) return l;
  if (try_llt(a, l)) return l;

  const double mean_diag = std::max(a.diagonal().mean(), std::numeric_limits<double>::min());
  for (double level : {1e-10, 1e-8, 1e-6}) {
    Matrix shifted = a;
    shifted.diagonal().array() += level * mean_diag;
    if (try_llt(shifted, l)) {
      if (jitter_used != nullptr) *jitter_used = level * mean_diag;
      return l;
    }
  }
  throw FactorizationError("cholesky_spd: matrix of size " + std::to_string(a.rows()) +
                           " is not positive definite after maximum jitter");
}

// ---------------------------------------------------------------------------

LabeledDataset::LabeledDataset(Matrix x, Vector y_values, Matrix z)
    : X(std::move(x)), y(std::move(y_values)), Z(std::move(z)) {
  validate();
}

LabeledDataset LabeledDataset::empty(std::size_t dim, std::size_t num_safety) {
  LabeledDataset d;
  d.X.resize(0, static_cast<Eigen::Index>(dim));
  d.y.resize(0);
  d.Z.resize(0, static_cast<Eigen::Index>(num_safety));
  return d;
}

void LabeledDataset::validate() const {
  if (y.size() != X.rows() || Z.rows() != X.rows()) {
    throw InputError("LabeledDataset: row counts of X, y and Z differ");
  }
  if (!X.allFinite() || !y.allFinite() || !Z.allFinite()) {
    throw InputError("LabeledDataset: non-finite entries");
  }
}

void LabeledDataset::append(const Eigen::Ref<const Vector>& x, double y_value,
                            const Eigen::Ref<const Vector>& z) {
  if (x.size() != X.cols() || z.size() != Z.cols()) {
    throw InputError("LabeledDataset::append: dimension mismatch");
  }
  const Eigen::Index n = X.rows();
  X.conservativeResize(n + 1, Eigen::NoChange);
  y.conservativeResize(n + 1);
  Z.conservativeResize(n + 1, Eigen::NoChange);
  X.row(n) = x.transpose();
  y[n] = y_value;
  Z.row(n) = z.transpose();
}

Vector LabeledDataset::channel(std::size_t c) const {
  if (c == 0) return y;
  if (c > num_safety()) throw InputError("LabeledDataset::channel: no such safety output");
  return Z.col(static_cast<Eigen::Index>(c) - 1);
}

void GPModel::validate() const {
  kernel.validate();
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw InputError("GPModel: noise variance must be positive and finite");
  }
}

// ---------------------------------------------------------------------------

GPPosterior::GPPosterior(const GPModel& model, const Matrix& x, const Vector& y)
    : model_(model), x_(x), y_(y) {
  model_.validate();
  if (x.rows() != y.size()) throw InputError("GPPosterior: X and y row counts differ");
  if (x.rows() > 0 && x.cols() != static_cast<Eigen::Index>(model.kernel.dim())) {
    throw InputError("GPPosterior: input dimension does not match the kernel");
  }
  Matrix k = kernel_matrix(model_.kernel, x_, x_);
  k.diagonal().array() += model_.noise_variance;
  l_ = cholesky_spd(k);
  alpha_ = y_;
  if (alpha_.size() > 0) {
    l_.triangularView<Eigen::Lower>().solveInPlace(alpha_);
    l_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
  }
}

Prediction GPPosterior::predict(const Matrix& test_x) const {
  if (test_x.cols() != static_cast<Eigen::Index>(model_.kernel.dim())) {
    throw InputError("GPPosterior::predict: test input dimension does not match the kernel");
  }
  Prediction out;
  const Eigen::Index m = test_x.rows();
  out.mean = Vector::Zero(m);
  out.variance = Vector::Constant(m, model_.kernel.scale);
  if (x_.rows() == 0) return out;
  const Matrix ks = kernel_matrix(model_.kernel, x_, test_x);
  out.mean = ks.transpose() * alpha_;
  Matrix v = ks;
  l_.triangularView<Eigen::Lower>().solveInPlace(v);
  out.variance -= v.colwise().squaredNorm().transpose();
  out.variance = out.variance.cwiseMax(0.0);
  return out;
}

double GPPosterior::log_marginal_likelihood() const {
  const double n = static_cast<double>(y_.size());
  return -0.5 * y_.dot(alpha_) - l_.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
}

Prediction posterior(const GPModel& model, const Matrix& x, const Vector& y, const Matrix& test_x) {
  return GPPosterior(model, x, y).predict(test_x);
}

double log_marginal_likelihood(const GPModel& model, const Matrix& x, const Vector& y) {
  if (y.size() == 0) throw InputError("log_marginal_likelihood: at least one observation required");
  return GPPosterior(model, x, y).log_marginal_likelihood();
}

Vector gp_log_params(const GPModel& model) {
  const Eigen::Index d = model.kernel.lengthscales.size();
  Vector theta(d + 2);
  theta.head(d) = model.kernel.lengthscales.array().log();
  theta[d] = std::log(model.kernel.scale);
  theta[d + 1] = std::log(model.noise_variance);
  return theta;
}

GPModel gp_from_log_params(KernelFamily family, const Vector& theta) {
  if (theta.size() < 3) throw InputError("gp_from_log_params: parameter vector too short");
  const Eigen::Index d = theta.size() - 2;
  GPModel model;
  model.kernel.family = family;
  model.kernel.lengthscales = theta.head(d).array().exp();
  model.kernel.scale = std::exp(theta[d]);
  model.noise_variance = std::exp(theta[d + 1]);
  return model;
}

double lml_and_gradient(const GPModel& model, const Matrix& x, const Vector& y, Vector* grad,
                        const Matrix* offset) {
  const Eigen::Index n = x.rows();
  if (y.size() != n) throw InputError("lml_and_gradient: X and y row counts differ");
  if (n == 0) throw InputError("lml_and_gradient: at least one observation required");
  if (offset != nullptr && (offset->rows() != n || offset->cols() != n)) {
    throw InputError("lml_and_gradient: offset matrix has the wrong shape");
  }
  const Eigen::Index d = static_cast<Eigen::Index>(model.kernel.dim());

  KernelGradient kg;
  Matrix c;
  if (grad != nullptr) {
    kg = kernel_matrix_with_gradient(model.kernel, x);
    c = kg.value;
  } else {
    c = kernel_matrix(model.kernel, x, x);
  }
  if (offset != nullptr) c += *offset;
  c.diagonal().array() += model.noise_variance;

  const Matrix l = cholesky_spd(c);
  Vector alpha = y;
  l.triangularView<Eigen::Lower>().solveInPlace(alpha);
  const double fit_term = alpha.squaredNorm();
  l.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha);
  const double lml = -0.5 * fit_term - l.diagonal().array().log().sum() -
                     0.5 * static_cast<double>(n) * kLog2Pi;

  if (grad != nullptr) {
    Matrix w = Matrix::Identity(n, n);
    l.triangularView<Eigen::Lower>().solveInPlace(w);
    l.triangularView<Eigen::Lower>().transpose().solveInPlace(w);
    // w <- alpha alpha^T - C^{-1}
    w = alpha * alpha.transpose() - w;
    grad->resize(d + 2);
    for (Eigen::Index p = 0; p <= d; ++p) {
      (*grad)[p] = 0.5 * w.cwiseProduct(kg.d_log_params[p]).sum();
    }
    (*grad)[d + 1] = 0.5 * model.noise_variance * w.trace();
  }
  return lml;
}

Vector random_kernel_log_params(const Matrix& x, std::size_t dim, Rng& rng, bool with_scale) {
  const auto d = static_cast<Eigen::Index>(dim);
  Vector theta(with_scale ? d + 1 : d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double range = 1.0;
    if (x.rows() > 1) range = x.col(j).maxCoeff() - x.col(j).minCoeff();
    if (!(range > 0.0)) range = 1.0;
    theta[j] = std::log(rng.log_uniform(0.05 * range, 2.0 * range));
  }
  if (with_scale) theta[d] = std::log(rng.log_uniform(0.2, 5.0));
  return theta;
}

FitResult fit_gp(const GPModel& initial, const Matrix& x, const Vector& y,
                 const FitOptions& options, const Matrix* offset) {
  if (x.rows() < 2) throw InputError("fit_gp: at least two observations required");
  initial.validate();
  const KernelFamily family = initial.kernel.family;
  const Eigen::Index d = static_cast<Eigen::Index>(initial.kernel.dim());
  const ParameterBounds& b = options.bounds;

  Box box;
  box.lower.resize(d + 2);
  box.upper.resize(d + 2);
  box.lower.head(d).setConstant(std::log(b.lengthscale_min));
  box.upper.head(d).setConstant(std::log(b.lengthscale_max));
  if (options.fit_scale) {
    box.lower[d] = std::log(b.scale_min);
    box.upper[d] = std::log(b.scale_max);
  } else {
    box.lower[d] = box.upper[d] = std::log(initial.kernel.scale);
  }
  box.lower[d + 1] = std::log(b.noise_min);
  box.upper[d + 1] = std::log(b.noise_max);

  const Objective objective = [&](const Vector& theta, Vector* g) {
    const GPModel m = gp_from_log_params(family, theta);
    const double v = lml_and_gradient(m, x, y, g, offset);
    if (g != nullptr) *g = -*g;
    return -v;
  };

  Rng rng(options.seed);
  std::vector<Vector> starts;
  starts.push_back(gp_log_params(initial));
  for (int r = 0; r < options.restarts; ++r) {
    Vector theta(d + 2);
    theta.head(d + 1) = random_kernel_log_params(x, static_cast<std::size_t>(d), rng, true);
    if (!options.fit_scale) theta[d] = std::log(initial.kernel.scale);
    theta[d + 1] = std::log(rng.log_uniform(1e-4, 1e-1));
    starts.push_back(theta);
  }

  FitResult best;
  double best_value = std::numeric_limits<double>::infinity();
  for (const Vector& start : starts) {
    const LbfgsResult r = minimize_lbfgs(objective, start, box, options.lbfgs);
    if (!std::isfinite(r.value)) continue;
    ++best.successful_starts;
    if (r.value < best_value) {
      best_value = r.value;
      best.model = gp_from_log_params(family, r.x);
    }
  }
  if (best.successful_starts == 0) {
    throw FitError("fit_gp: no start produced a finite marginal likelihood");
  }
  best.lml = -best_value;
  return best;
}

}  // namespace safetl
