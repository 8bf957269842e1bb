#include "safetl/transfer.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace safetl {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void solve_lower(const Matrix& l, Matrix& b) {
  if (l.rows() == 0 || b.cols() == 0) return;
  l.triangularView<Eigen::Lower>().solveInPlace(b);
}

void solve_lower(const Matrix& l, Vector& b) {
  if (l.rows() == 0) return;
  l.triangularView<Eigen::Lower>().solveInPlace(b);
}

double half_logdet(const Matrix& l) {
  return l.rows() == 0 ? 0.0 : l.diagonal().array().log().sum();
}

double task_noise(const TransferModel& model, std::size_t slot) {
  const std::size_t p = model.num_sources();
  return slot < p ? model.source_noise[static_cast<Eigen::Index>(slot)] : model.target_noise;
}

std::vector<std::size_t> target_slots(std::size_t count, std::size_t num_sources) {
  return std::vector<std::size_t>(count, num_sources);
}

void check_shapes(const TransferModel& model, const MultiTaskData& data) {
  model.validate();
  data.validate();
  if (data.num_sources() != model.num_sources()) {
    throw InputError("transfer: data has " + std::to_string(data.num_sources()) +
                     " source tasks but the kernel declares " +
                     std::to_string(model.num_sources()));
  }
  const auto dim = static_cast<Eigen::Index>(model.kernel.dim());
  if (data.target_x.cols() != dim) throw InputError("transfer: target input dimension mismatch");
  for (const auto& xs : data.source_x) {
    if (xs.rows() > 0 && xs.cols() != dim) throw InputError("transfer: source input dimension mismatch");
  }
}

void check_cache_data(const SourceCache& cache, const MultiTaskData& data) {
  const StackedInputs src = stack_sources(data);
  const Vector ys = stack_source_outputs(data);
  if (src.x.rows() != cache.inputs.x.rows() || src.slots != cache.inputs.slots ||
      src.x != cache.inputs.x || ys != cache.outputs) {
    throw ConfigError("transfer: source data differs from the data the cache was built on");
  }
}

// Element (a, b) is 1 when HGP level `level` contributes to the pair.
Matrix hgp_mask(const std::vector<std::size_t>& slots, std::size_t level) {
  const auto n = static_cast<Eigen::Index>(slots.size());
  Matrix m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      m(i, j) = std::min(slots[i], slots[j]) >= level ? 1.0 : 0.0;
    }
  }
  return m;
}

Matrix expand_tasks(const Matrix& b, const std::vector<std::size_t>& slots) {
  const auto n = static_cast<Eigen::Index>(slots.size());
  Matrix m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = b(slots[i], slots[j]);
  }
  return m;
}

// Sums of `m` over row/column task groups.
Matrix group_sums(const Matrix& m, const std::vector<std::size_t>& slots, std::size_t tasks) {
  const auto t = static_cast<Eigen::Index>(tasks);
  Matrix g = Matrix::Zero(t, t);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) g(slots[i], slots[j]) += m(i, j);
  }
  return g;
}

Vector random_transfer_params(const TransferModel& model, const Matrix& x, Rng& rng) {
  TransferModel m = model;
  const std::size_t dim = model.kernel.dim();
  const std::size_t p = model.num_sources();
  if (m.kernel.is_hgp()) {
    auto& h = m.kernel.hgp();
    for (std::size_t i = 0; i < h.num_levels(); ++i) {
      const Vector t = random_kernel_log_params(x, dim, rng, true);
      KernelSpec& k = i < p ? h.source_kernels[i] : h.target_residual;
      k.lengthscales = t.head(static_cast<Eigen::Index>(dim)).array().exp();
      k.scale = std::exp(t[static_cast<Eigen::Index>(dim)]);
    }
  } else {
    auto& l = m.kernel.lmc();
    for (std::size_t c = 0; c < l.latents.size(); ++c) {
      const Vector t = random_kernel_log_params(x, dim, rng, false);
      l.latents[c].lengthscales = t.array().exp();
      for (Eigen::Index r = 0; r < l.mixing[c].size(); ++r) l.mixing[c][r] = rng.uniform(-1.0, 1.0);
    }
    for (Eigen::Index r = 0; r < l.kappa.size(); ++r) l.kappa[r] = rng.log_uniform(1e-2, 1.0);
  }
  for (Eigen::Index r = 0; r < m.source_noise.size(); ++r) m.source_noise[r] = rng.log_uniform(1e-4, 1e-1);
  m.target_noise = rng.log_uniform(1e-4, 1e-1);
  return transfer_params(m);
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t MultiTaskData::num_source_points() const {
  std::size_t n = 0;
  for (const auto& x : source_x) n += static_cast<std::size_t>(x.rows());
  return n;
}

void MultiTaskData::validate() const {
  if (source_x.size() != source_y.size()) {
    throw InputError("MultiTaskData: source input and output lists differ in length");
  }
  for (std::size_t p = 0; p < source_x.size(); ++p) {
    if (source_x[p].rows() != source_y[p].size()) {
      throw InputError("MultiTaskData: source task " + std::to_string(p + 1) +
                       " has mismatched input and output counts");
    }
    if (source_x[p].rows() > 0 && source_x[p].cols() != target_x.cols()) {
      throw InputError("MultiTaskData: source and target dimensions differ");
    }
  }
  if (target_x.rows() != target_y.size()) {
    throw InputError("MultiTaskData: target input and output counts differ");
  }
}

StackedInputs stack_sources(const MultiTaskData& data) {
  StackedInputs out;
  const auto n = static_cast<Eigen::Index>(data.num_source_points());
  out.x.resize(n, data.target_x.cols());
  Eigen::Index row = 0;
  for (std::size_t p = 0; p < data.source_x.size(); ++p) {
    const Matrix& xs = data.source_x[p];
    if (xs.rows() == 0) continue;
    out.x.middleRows(row, xs.rows()) = xs;
    row += xs.rows();
    out.slots.insert(out.slots.end(), static_cast<std::size_t>(xs.rows()), p);
  }
  return out;
}

StackedInputs stack_all(const MultiTaskData& data) {
  StackedInputs out = stack_sources(data);
  const Eigen::Index ns = out.x.rows();
  out.x.conservativeResize(ns + data.target_x.rows(), data.target_x.cols());
  if (data.target_x.rows() > 0) out.x.bottomRows(data.target_x.rows()) = data.target_x;
  out.slots.insert(out.slots.end(), static_cast<std::size_t>(data.target_x.rows()),
                   data.num_sources());
  return out;
}

Vector stack_source_outputs(const MultiTaskData& data) {
  Vector y(static_cast<Eigen::Index>(data.num_source_points()));
  Eigen::Index row = 0;
  for (const auto& ys : data.source_y) {
    y.segment(row, ys.size()) = ys;
    row += ys.size();
  }
  return y;
}

void TransferModel::validate() const {
  kernel.validate();
  if (source_noise.size() != static_cast<Eigen::Index>(kernel.num_sources())) {
    throw InputError("TransferModel: one source noise variance per source task required");
  }
  for (Eigen::Index p = 0; p < source_noise.size(); ++p) {
    if (!(source_noise[p] > 0.0)) throw InputError("TransferModel: noise variances must be positive");
  }
  if (!(target_noise > 0.0)) throw InputError("TransferModel: noise variances must be positive");
}

void SourceCache::check_compatible(const TransferModel& model) const {
  if (!model.kernel.is_hgp()) {
    throw ConfigError("source precomputation requires the HGP kernel; LMC is unsupported");
  }
  const auto& h = model.kernel.hgp();
  if (h.source_kernels.size() != source_kernels.size()) {
    throw ConfigError("source cache: number of source tasks differs from the model");
  }
  for (std::size_t i = 0; i < source_kernels.size(); ++i) {
    const KernelSpec& a = h.source_kernels[i];
    const KernelSpec& b = source_kernels[i];
    if (a.family != b.family || a.scale != b.scale || a.lengthscales != b.lengthscales) {
      throw ConfigError("source cache: model source kernel differs from the frozen one");
    }
  }
  if (model.source_noise != source_noise) {
    throw ConfigError("source cache: model source noise differs from the frozen one");
  }
}

// ---------------------------------------------------------------------------

Matrix joint_covariance(const TransferModel& model, const MultiTaskData& data) {
  check_shapes(model, data);
  const StackedInputs all = stack_all(data);
  Matrix omega = multitask_kernel_matrix(model.kernel, all.x, all.slots, all.x, all.slots);
  for (Eigen::Index i = 0; i < omega.rows(); ++i) omega(i, i) += task_noise(model, all.slots[i]);
  return omega;
}

Matrix two_step_cholesky(const Matrix& l_source, const Matrix& k_cross, const Matrix& k_target_block) {
  const Eigen::Index ns = l_source.rows();
  const Eigen::Index nt = k_target_block.rows();
  if (l_source.cols() != ns || k_cross.rows() != ns || k_cross.cols() != nt ||
      k_target_block.cols() != nt) {
    throw InputError("two_step_cholesky: block shapes are not conformable");
  }
  Matrix v = k_cross;
  solve_lower(l_source, v);
  Matrix schur = k_target_block;
  if (ns > 0 && nt > 0) schur.noalias() -= v.transpose() * v;
  const Matrix l_schur = cholesky_spd(schur);

  Matrix l = Matrix::Zero(ns + nt, ns + nt);
  l.topLeftCorner(ns, ns) = l_source.triangularView<Eigen::Lower>();
  l.bottomLeftCorner(nt, ns) = v.transpose();
  l.bottomRightCorner(nt, nt) = l_schur;
  return l;
}

// ---------------------------------------------------------------------------

TransferPosterior::TransferPosterior(const TransferModel& model, const MultiTaskData& data)
    : model_(model) {
  check_shapes(model, data);
  const std::size_t p = model.num_sources();
  source_ = stack_sources(data);
  target_x_ = data.target_x;
  const Eigen::Index ns = source_.x.rows();
  const Eigen::Index nt = target_x_.rows();
  const auto t_slots = target_slots(static_cast<std::size_t>(nt), p);

  Matrix k_target = multitask_kernel_matrix(model.kernel, target_x_, t_slots, target_x_, t_slots);
  k_target.diagonal().array() += model.target_noise;

  if (model.cache) {
    model.cache->check_compatible(model);
    check_cache_data(*model.cache, data);
    l_source_ = model.cache->l_source;
    w_source_ = model.cache->whitened;
    v_ = multitask_kernel_matrix(model.kernel, source_.x, source_.slots, target_x_, t_slots);
    solve_lower(l_source_, v_);
    Matrix schur = k_target;
    if (ns > 0 && nt > 0) schur.noalias() -= v_.transpose() * v_;
    l_schur_ = cholesky_spd(schur);
  } else {
    const Matrix l = cholesky_spd(joint_covariance(model, data));
    l_source_ = l.topLeftCorner(ns, ns);
    v_ = l.bottomLeftCorner(nt, ns).transpose();
    l_schur_ = l.bottomRightCorner(nt, nt);
    w_source_ = stack_source_outputs(data);
    solve_lower(l_source_, w_source_);
  }
  w_target_ = data.target_y;
  if (ns > 0 && nt > 0) w_target_.noalias() -= v_.transpose() * w_source_;
  solve_lower(l_schur_, w_target_);
  source_logdet_half_ = half_logdet(l_source_);
}

Matrix TransferPosterior::source_projection(const Matrix& test_x) const {
  const auto t_slots = target_slots(static_cast<std::size_t>(test_x.rows()), model_.num_sources());
  Matrix a = multitask_kernel_matrix(model_.kernel, source_.x, source_.slots, test_x, t_slots);
  solve_lower(l_source_, a);
  return a;
}

Prediction TransferPosterior::predict(const Matrix& test_x) const {
  if (test_x.cols() != static_cast<Eigen::Index>(model_.kernel.dim())) {
    throw InputError("TransferPosterior::predict: test input dimension mismatch");
  }
  return finish(test_x, source_projection(test_x));
}

Prediction TransferPosterior::predict_projected(const Matrix& test_x, const Matrix& projection) const {
  if (projection.rows() != source_.x.rows() || projection.cols() != test_x.rows()) {
    throw InputError("TransferPosterior::predict_projected: projection has the wrong shape");
  }
  return finish(test_x, projection);
}

Prediction TransferPosterior::finish(const Matrix& test_x, const Matrix& a) const {
  const std::size_t p = model_.num_sources();
  const Eigen::Index m = test_x.rows();
  const auto t_slots = target_slots(static_cast<std::size_t>(target_x_.rows()), p);
  const auto q_slots = target_slots(static_cast<std::size_t>(m), p);
  Matrix b = multitask_kernel_matrix(model_.kernel, target_x_, t_slots, test_x, q_slots);
  if (a.rows() > 0 && b.rows() > 0) b.noalias() -= v_.transpose() * a;
  solve_lower(l_schur_, b);

  Prediction out;
  out.mean = Vector::Zero(m);
  if (a.rows() > 0) out.mean.noalias() += a.transpose() * w_source_;
  if (b.rows() > 0) out.mean.noalias() += b.transpose() * w_target_;
  out.variance = Vector::Constant(m, model_.kernel.target_variance());
  if (a.rows() > 0) out.variance -= a.colwise().squaredNorm().transpose();
  if (b.rows() > 0) out.variance -= b.colwise().squaredNorm().transpose();
  out.variance = out.variance.cwiseMax(0.0);
  return out;
}

double TransferPosterior::log_marginal_likelihood() const {
  const double n = static_cast<double>(w_source_.size() + w_target_.size());
  return -0.5 * (w_source_.squaredNorm() + w_target_.squaredNorm()) - source_logdet_half_ -
         half_logdet(l_schur_) - 0.5 * n * kLog2Pi;
}

Matrix TransferPosterior::factor() const {
  const Eigen::Index ns = l_source_.rows();
  const Eigen::Index nt = l_schur_.rows();
  Matrix l = Matrix::Zero(ns + nt, ns + nt);
  l.topLeftCorner(ns, ns) = l_source_.triangularView<Eigen::Lower>();
  l.bottomLeftCorner(nt, ns) = v_.transpose();
  l.bottomRightCorner(nt, nt) = l_schur_;
  return l;
}

Prediction transfer_posterior(const TransferModel& model, const MultiTaskData& data,
                              const Matrix& test_x) {
  return TransferPosterior(model, data).predict(test_x);
}

double transfer_log_marginal_likelihood(const TransferModel& model, const MultiTaskData& data) {
  return TransferPosterior(model, data).log_marginal_likelihood();
}

// ---------------------------------------------------------------------------

Vector transfer_params(const TransferModel& model) {
  std::vector<double> t;
  if (model.kernel.is_hgp()) {
    const auto& h = model.kernel.hgp();
    for (std::size_t i = 0; i < h.num_levels(); ++i) {
      const KernelSpec& k = h.level(i);
      for (Eigen::Index d = 0; d < k.lengthscales.size(); ++d) t.push_back(std::log(k.lengthscales[d]));
      t.push_back(std::log(k.scale));
    }
  } else {
    const auto& l = model.kernel.lmc();
    for (const auto& k : l.latents) {
      for (Eigen::Index d = 0; d < k.lengthscales.size(); ++d) t.push_back(std::log(k.lengthscales[d]));
    }
    for (const auto& w : l.mixing) {
      for (Eigen::Index r = 0; r < w.size(); ++r) t.push_back(w[r]);
    }
    for (Eigen::Index r = 0; r < l.kappa.size(); ++r) t.push_back(std::log(l.kappa[r]));
  }
  for (Eigen::Index p = 0; p < model.source_noise.size(); ++p) t.push_back(std::log(model.source_noise[p]));
  t.push_back(std::log(model.target_noise));
  return Eigen::Map<Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
}

TransferModel transfer_from_params(const TransferModel& templ, const Vector& theta) {
  TransferModel m = templ;
  m.cache.reset();
  if (theta.size() != transfer_params(templ).size()) {
    throw InputError("transfer_from_params: parameter vector has the wrong length");
  }
  Eigen::Index idx = 0;
  if (m.kernel.is_hgp()) {
    auto& h = m.kernel.hgp();
    const std::size_t p = h.source_kernels.size();
    for (std::size_t i = 0; i <= p; ++i) {
      KernelSpec& k = i < p ? h.source_kernels[i] : h.target_residual;
      for (Eigen::Index d = 0; d < k.lengthscales.size(); ++d) k.lengthscales[d] = std::exp(theta[idx++]);
      k.scale = std::exp(theta[idx++]);
    }
  } else {
    auto& l = m.kernel.lmc();
    for (auto& k : l.latents) {
      for (Eigen::Index d = 0; d < k.lengthscales.size(); ++d) k.lengthscales[d] = std::exp(theta[idx++]);
    }
    for (auto& w : l.mixing) {
      for (Eigen::Index r = 0; r < w.size(); ++r) w[r] = theta[idx++];
    }
    for (Eigen::Index r = 0; r < l.kappa.size(); ++r) l.kappa[r] = std::exp(theta[idx++]);
  }
  for (Eigen::Index p = 0; p < m.source_noise.size(); ++p) m.source_noise[p] = std::exp(theta[idx++]);
  m.target_noise = std::exp(theta[idx++]);
  return m;
}

Box transfer_param_box(const TransferModel& model, const ParameterBounds& b) {
  std::vector<double> lo;
  std::vector<double> hi;
  auto push = [&](double a, double c) {
    lo.push_back(a);
    hi.push_back(c);
  };
  const double ll = std::log(b.lengthscale_min), lu = std::log(b.lengthscale_max);
  const std::size_t dim = model.kernel.dim();
  if (model.kernel.is_hgp()) {
    for (std::size_t i = 0; i < model.kernel.hgp().num_levels(); ++i) {
      for (std::size_t d = 0; d < dim; ++d) push(ll, lu);
      push(std::log(b.scale_min), std::log(b.scale_max));
    }
  } else {
    const auto& l = model.kernel.lmc();
    for (std::size_t c = 0; c < l.latents.size(); ++c) {
      for (std::size_t d = 0; d < dim; ++d) push(ll, lu);
    }
    const double wmax = std::sqrt(b.scale_max);
    for (const auto& w : l.mixing) {
      for (Eigen::Index r = 0; r < w.size(); ++r) push(-wmax, wmax);
    }
    for (Eigen::Index r = 0; r < l.kappa.size(); ++r) push(std::log(b.noise_min), std::log(b.scale_max));
  }
  for (Eigen::Index p = 0; p <= model.source_noise.size(); ++p) {
    push(std::log(b.noise_min), std::log(b.noise_max));
  }
  Box box;
  box.lower = Eigen::Map<Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  box.upper = Eigen::Map<Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  return box;
}

double transfer_lml_and_gradient(const TransferModel& model, const MultiTaskData& data, Vector* grad) {
  check_shapes(model, data);
  const StackedInputs all = stack_all(data);
  const Eigen::Index n = all.x.rows();
  if (n == 0) throw InputError("transfer_lml_and_gradient: no observations");
  Vector y(n);
  y << stack_source_outputs(data), data.target_y;
  const std::size_t p = model.num_sources();
  const std::size_t tasks = p + 1;

  std::vector<KernelGradient> parts;
  std::vector<Matrix> weights;  // task structure multiplying each part elementwise
  Matrix omega = Matrix::Zero(n, n);
  if (model.kernel.is_hgp()) {
    const auto& h = model.kernel.hgp();
    for (std::size_t i = 0; i < h.num_levels(); ++i) {
      parts.push_back(kernel_matrix_with_gradient(h.level(i), all.x));
      weights.push_back(hgp_mask(all.slots, i));
      omega += weights.back().cwiseProduct(parts.back().value);
    }
  } else {
    const auto& l = model.kernel.lmc();
    for (std::size_t c = 0; c < l.latents.size(); ++c) {
      parts.push_back(kernel_matrix_with_gradient(l.latents[c], all.x));
      weights.push_back(expand_tasks(l.coregionalization(c), all.slots));
      omega += weights.back().cwiseProduct(parts.back().value);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) omega(i, i) += task_noise(model, all.slots[i]);

  const Matrix l = cholesky_spd(omega);
  Vector alpha = y;
  solve_lower(l, alpha);
  const double lml = -0.5 * alpha.squaredNorm() - half_logdet(l) - 0.5 * static_cast<double>(n) * kLog2Pi;
  if (grad == nullptr) return lml;

  l.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha);
  Matrix w = Matrix::Identity(n, n);
  solve_lower(l, w);
  l.triangularView<Eigen::Lower>().transpose().solveInPlace(w);
  w = alpha * alpha.transpose() - w;

  std::vector<double> g;
  const Eigen::Index dim = static_cast<Eigen::Index>(model.kernel.dim());
  if (model.kernel.is_hgp()) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Matrix ww = w.cwiseProduct(weights[i]);
      for (Eigen::Index q = 0; q <= dim; ++q) g.push_back(0.5 * ww.cwiseProduct(parts[i].d_log_params[q]).sum());
    }
  } else {
    const auto& lm = model.kernel.lmc();
    for (std::size_t c = 0; c < parts.size(); ++c) {
      const Matrix ww = w.cwiseProduct(weights[c]);
      for (Eigen::Index q = 0; q < dim; ++q) g.push_back(0.5 * ww.cwiseProduct(parts[c].d_log_params[q]).sum());
    }
    Matrix kappa_sum = Matrix::Zero(static_cast<Eigen::Index>(tasks), static_cast<Eigen::Index>(tasks));
    for (std::size_t c = 0; c < parts.size(); ++c) {
      const Matrix gs = group_sums(w.cwiseProduct(parts[c].value), all.slots, tasks);
      const Vector gw = gs * lm.mixing[c];
      for (Eigen::Index t = 0; t < gw.size(); ++t) g.push_back(gw[t]);
      kappa_sum += gs;
    }
    for (Eigen::Index t = 0; t < lm.kappa.size(); ++t) g.push_back(0.5 * lm.kappa[t] * kappa_sum(t, t));
  }
  Vector noise_grad = Vector::Zero(static_cast<Eigen::Index>(tasks));
  for (Eigen::Index i = 0; i < n; ++i) noise_grad[all.slots[i]] += w(i, i);
  for (std::size_t t = 0; t < tasks; ++t) {
    g.push_back(0.5 * task_noise(model, t) * noise_grad[static_cast<Eigen::Index>(t)]);
  }
  *grad = Eigen::Map<Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
  return lml;
}

// ---------------------------------------------------------------------------

TransferFitResult fit_full_transfer(const TransferModel& initial, const MultiTaskData& data,
                                    const FitOptions& options) {
  TransferModel templ = initial;
  templ.cache.reset();
  check_shapes(templ, data);
  const Box box = transfer_param_box(templ, options.bounds);
  const Objective objective = [&](const Vector& theta, Vector* g) {
    const TransferModel m = transfer_from_params(templ, theta);
    const double v = transfer_lml_and_gradient(m, data, g);
    if (g != nullptr) *g = -*g;
    return -v;
  };

  const StackedInputs all = stack_all(data);
  Rng rng(options.seed);
  std::vector<Vector> starts{transfer_params(templ)};
  for (int r = 0; r < options.restarts; ++r) starts.push_back(random_transfer_params(templ, all.x, rng));

  TransferFitResult best;
  double best_value = std::numeric_limits<double>::infinity();
  for (const Vector& start : starts) {
    const LbfgsResult r = minimize_lbfgs(objective, start, box, options.lbfgs);
    if (!std::isfinite(r.value)) continue;
    ++best.successful_starts;
    if (r.value < best_value) {
      best_value = r.value;
      best.model = transfer_from_params(templ, r.x);
    }
  }
  if (best.successful_starts == 0) {
    throw FitError("fit_full_transfer: no start produced a finite marginal likelihood");
  }
  best.lml = -best_value;
  return best;
}

SourceCache build_source_cache(const TransferModel& model, const MultiTaskData& data) {
  check_shapes(model, data);
  if (!model.kernel.is_hgp()) {
    throw ConfigError("source precomputation requires the HGP kernel; LMC is unsupported");
  }
  SourceCache cache;
  cache.source_kernels = model.kernel.hgp().source_kernels;
  cache.source_noise = model.source_noise;
  cache.inputs = stack_sources(data);
  cache.outputs = stack_source_outputs(data);
  Matrix k = multitask_kernel_matrix(model.kernel, cache.inputs.x, cache.inputs.slots,
                                     cache.inputs.x, cache.inputs.slots);
  for (Eigen::Index i = 0; i < k.rows(); ++i) k(i, i) += task_noise(model, cache.inputs.slots[i]);
  cache.l_source = cholesky_spd(k);
  cache.whitened = cache.outputs;
  solve_lower(cache.l_source, cache.whitened);
  cache.source_lml = -0.5 * cache.whitened.squaredNorm() - half_logdet(cache.l_source) -
                     0.5 * static_cast<double>(cache.outputs.size()) * kLog2Pi;
  return cache;
}

SourceCache precompute_source(const TransferModel& initial, const MultiTaskData& data,
                              const FitOptions& options) {
  check_shapes(initial, data);
  if (!initial.kernel.is_hgp()) {
    throw ConfigError("source precomputation requires the HGP kernel; LMC is unsupported");
  }
  const std::size_t p = initial.num_sources();
  if (data.num_source_points() == 0) throw InputError("precompute_source: source data is empty");
  TransferModel fitted = initial;
  fitted.cache.reset();
  const auto& h = initial.kernel.hgp();

  if (p == 1) {
    const GPModel start{h.source_kernels[0], initial.source_noise[0]};
    const FitResult r = fit_gp(start, data.source_x[0], data.source_y[0], options);
    fitted.kernel.hgp().source_kernels[0] = r.model.kernel;
    fitted.source_noise[0] = r.model.noise_variance;
  } else {
    // The sources alone follow an HGP with P-1 sources and source P on top.
    HgpKernel sub;
    sub.source_kernels.assign(h.source_kernels.begin(), h.source_kernels.end() - 1);
    sub.target_residual = h.source_kernels.back();
    TransferModel sub_model;
    sub_model.kernel = MultiTaskKernelSpec(sub);
    sub_model.source_noise = initial.source_noise.head(static_cast<Eigen::Index>(p - 1));
    sub_model.target_noise = initial.source_noise[static_cast<Eigen::Index>(p - 1)];
    MultiTaskData sub_data;
    sub_data.source_x.assign(data.source_x.begin(), data.source_x.end() - 1);
    sub_data.source_y.assign(data.source_y.begin(), data.source_y.end() - 1);
    sub_data.target_x = data.source_x.back();
    sub_data.target_y = data.source_y.back();
    const TransferFitResult r = fit_full_transfer(sub_model, sub_data, options);
    const auto& fh = r.model.kernel.hgp();
    auto& out = fitted.kernel.hgp();
    for (std::size_t i = 0; i + 1 < p; ++i) out.source_kernels[i] = fh.source_kernels[i];
    out.source_kernels[p - 1] = fh.target_residual;
    fitted.source_noise.head(static_cast<Eigen::Index>(p - 1)) = r.model.source_noise;
    fitted.source_noise[static_cast<Eigen::Index>(p - 1)] = r.model.target_noise;
  }
  return build_source_cache(fitted, data);
}

TransferModel attach_cache(const TransferModel& model, std::shared_ptr<const SourceCache> cache) {
  if (!cache) throw InputError("attach_cache: null cache");
  if (!model.kernel.is_hgp()) {
    throw ConfigError("source precomputation requires the HGP kernel; LMC is unsupported");
  }
  TransferModel m = model;
  if (m.kernel.hgp().source_kernels.size() != cache->source_kernels.size()) {
    throw ConfigError("attach_cache: number of source tasks differs from the model");
  }
  m.kernel.hgp().source_kernels = cache->source_kernels;
  m.source_noise = cache->source_noise;
  m.cache = std::move(cache);
  return m;
}

TransferFitResult fit_target_given_source(const TransferModel& initial, const MultiTaskData& data,
                                          const FitOptions& options) {
  if (!initial.cache) throw ConfigError("fit_target_given_source: model has no source cache");
  check_shapes(initial, data);
  const SourceCache& cache = *initial.cache;
  cache.check_compatible(initial);
  check_cache_data(cache, data);

  const std::size_t p = initial.num_sources();
  const auto& h = initial.kernel.hgp();
  const Matrix& xt = data.target_x;
  const auto t_slots = target_slots(static_cast<std::size_t>(xt.rows()), p);

  Matrix v = multitask_kernel_matrix(initial.kernel, cache.inputs.x, cache.inputs.slots, xt, t_slots);
  solve_lower(cache.l_source, v);
  Matrix offset = Matrix::Zero(xt.rows(), xt.rows());
  for (std::size_t i = 0; i < p; ++i) offset += kernel_matrix(h.source_kernels[i], xt, xt);
  Vector residual = data.target_y;
  if (v.rows() > 0) {
    offset.noalias() -= v.transpose() * v;
    residual.noalias() -= v.transpose() * cache.whitened;
  }

  const GPModel start{h.target_residual, initial.target_noise};
  const FitResult r = fit_gp(start, xt, residual, options, &offset);

  TransferFitResult out;
  out.model = initial;
  out.model.kernel.hgp().target_residual = r.model.kernel;
  out.model.target_noise = r.model.noise_variance;
  out.lml = cache.source_lml + r.lml;
  out.successful_starts = r.successful_starts;
  return out;
}

}  // namespace safetl
