#include "safetl/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace safetl {

namespace {

constexpr std::size_t kMaxAttempts = 1000;

std::string indexed(const std::string& stem, std::size_t i) { return stem + std::to_string(i); }

}  // namespace

// ---------------------------------------------------------------------------

void Domain::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) throw InputError("Domain: bad bounds");
  if ((lower.array() >= upper.array()).any()) throw InputError("Domain: empty box");
}

bool Domain::contains(const Eigen::Ref<const Vector>& x, double tolerance) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double slack = tolerance * (upper[d] - lower[d]);
    if (x[d] < lower[d] - slack || x[d] > upper[d] + slack) return false;
  }
  return true;
}

Matrix Domain::sample(std::size_t n, Rng& rng) const {
  Matrix x(static_cast<Eigen::Index>(n), lower.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index d = 0; d < x.cols(); ++d) x(i, d) = rng.uniform(lower[d], upper[d]);
  }
  return x;
}

double Task::safety_value(std::size_t j, const Vector& x) const {
  if (q.empty()) {
    if (j != 0) throw InputError("Task: safety index out of range");
    return f(x);
  }
  return q.at(j)(x);
}

bool Task::safe(const Vector& x) const {
  for (std::size_t j = 0; j < num_safety(); ++j) {
    if (safety_value(j, x) < thresholds[static_cast<Eigen::Index>(j)]) return false;
  }
  return true;
}

Oracle::Oracle(Task task, Domain domain, double noise_std, std::uint64_t seed)
    : task_(std::move(task)), domain_(std::move(domain)), noise_std_(noise_std), rng_(seed) {
  domain_.validate();
  if (!(noise_std_ > 0.0)) throw InputError("Oracle: noise standard deviation must be positive");
  if (task_.thresholds.size() != static_cast<Eigen::Index>(task_.num_safety())) {
    throw InputError("Oracle: one threshold per safety output required");
  }
}

Observation Oracle::query(const Eigen::Ref<const Vector>& x) {
  if (!domain_.contains(x)) throw InputError("Oracle::query: input outside the domain");
  const Vector xv = x;
  Observation obs;
  obs.y = task_.f(xv) + noise_std_ * rng_.normal();
  obs.z.resize(static_cast<Eigen::Index>(task_.num_safety()));
  if (task_.safety_is_main()) {
    obs.z[0] = obs.y;
  } else {
    for (std::size_t j = 0; j < task_.q.size(); ++j) {
      obs.z[static_cast<Eigen::Index>(j)] = task_.q[j](xv) + noise_std_ * rng_.normal();
    }
  }
  return obs;
}

bool Oracle::ground_truth_safe(const Eigen::Ref<const Vector>& x) const { return task_.safe(x); }

bool Oracle::observed_safe(const Observation& obs) const {
  return (obs.z.array() >= task_.thresholds.array()).all();
}

// ---------------------------------------------------------------------------

double GridFunction::operator()(const Vector& x) const {
  const std::size_t dim = lattice.dim();
  if (x.size() != static_cast<Eigen::Index>(dim)) throw InputError("GridFunction: dimension mismatch");
  std::vector<std::size_t> base(dim);
  std::vector<double> frac(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    double t = (x[i] - lattice.lower[i]) / lattice.step(d);
    t = std::clamp(t, 0.0, static_cast<double>(lattice.counts[d] - 1));
    std::size_t k = static_cast<std::size_t>(std::floor(t));
    if (k >= lattice.counts[d] - 1) k = lattice.counts[d] - 2;
    base[d] = k;
    frac[d] = t - static_cast<double>(k);
  }
  double out = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << dim); ++corner) {
    double weight = 1.0;
    std::size_t index = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      const bool up = (corner >> (dim - 1 - d)) & 1U;
      weight *= up ? frac[d] : 1.0 - frac[d];
      index = index * lattice.counts[d] + base[d] + (up ? 1 : 0);
    }
    if (weight != 0.0) out += weight * values[static_cast<Eigen::Index>(index)];
  }
  return out;
}

Normalization normalization_of(const Vector& values) {
  if (values.size() == 0) throw InputError("normalization_of: no values");
  Normalization n;
  n.mean = values.mean();
  n.std = std::sqrt((values.array() - n.mean).square().mean());
  if (!(n.std > 0.0)) n.std = 1.0;
  return n;
}

// ---------------------------------------------------------------------------

MogpHyper sample_mogp_hyper(std::size_t dim, Rng& rng, double l_lo, double l_hi) {
  MogpHyper h;
  for (int l = 0; l < 2; ++l) {
    Matrix w(2, 2);
    for (Eigen::Index i = 0; i < 2; ++i) {
      for (Eigen::Index j = 0; j < 2; ++j) w(i, j) = rng.uniform(-1.0, 1.0);
      w.row(i) /= w.row(i).norm();
    }
    Vector ls(static_cast<Eigen::Index>(dim));
    for (Eigen::Index d = 0; d < ls.size(); ++d) ls[d] = rng.uniform(l_lo, l_hi);
    h.mixing.push_back(w);
    h.lengthscales.push_back(ls);
  }
  return h;
}

MogpSampler::MogpSampler(const Lattice& lattice, MogpHyper hyper)
    : lattice_(lattice), hyper_(std::move(hyper)) {
  const Matrix x = lattice_.points();
  for (std::size_t l = 0; l < hyper_.mixing.size(); ++l) {
    const KernelSpec spec{KernelFamily::Matern52, hyper_.lengthscales[l], 1.0};
    Matrix k = kernel_matrix(spec, x, x);
    // Factorize in place; the lattice Gram matrix is numerically singular, so
    // a small diagonal jitter is added up front.
    bool ok = false;
    double jitter = 1e-8;
    for (; jitter <= 1e-4 && !ok; jitter *= 100.0) {
      k.diagonal().array() += jitter;
      Eigen::LLT<Eigen::Ref<Matrix>> llt(k);
      ok = llt.info() == Eigen::Success;
      if (!ok) k = kernel_matrix(spec, x, x);
    }
    if (!ok) throw FactorizationError("MogpSampler: lattice Gram matrix could not be factorized");
    k.triangularView<Eigen::StrictlyUpper>().setZero();
    l_kernel_.push_back(std::move(k));
    const Matrix& w = hyper_.mixing[l];
    l_task_.push_back(cholesky_spd(w * w.transpose()));
  }
}

Matrix MogpSampler::draw(Rng& rng) const {
  const auto n = static_cast<Eigen::Index>(lattice_.size());
  Matrix f = Matrix::Zero(n, 2);
  for (std::size_t l = 0; l < l_kernel_.size(); ++l) {
    Matrix u(n, 2);
    for (Eigen::Index j = 0; j < 2; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) u(i, j) = rng.normal();
    }
    // (L_B kron L_K) vec(U) = vec(L_K U L_B^T)
    const Matrix lu = l_kernel_[l].triangularView<Eigen::Lower>() * u;
    f.noalias() += lu * l_task_[l].transpose();
  }
  for (Eigen::Index j = 0; j < 2; ++j) {
    const Normalization nz = normalization_of(f.col(j));
    f.col(j) = (f.col(j).array() - nz.mean) / nz.std;
  }
  return f;
}

MogpSample sample_mogp_functions(std::size_t dim, std::uint64_t seed, std::size_t per_dim) {
  if (dim != 1 && dim != 2) throw InputError("sample_mogp_functions: only D = 1 or 2 is supported");
  Rng rng(seed);
  const Lattice lattice = Lattice::uniform(Vector::Constant(static_cast<Eigen::Index>(dim), -2.0),
                                           Vector::Constant(static_cast<Eigen::Index>(dim), 2.0), per_dim);
  MogpSampler sampler(lattice, sample_mogp_hyper(dim, rng));
  MogpSample out{lattice, sampler.hyper(), Matrix(), Matrix()};
  out.f = sampler.draw(rng);
  out.q = sampler.draw(rng);
  return out;
}

// ---------------------------------------------------------------------------

BraninConstants BraninConstants::target() {
  const double pi = std::numbers::pi;
  return {1.0, 5.1 / (4.0 * pi * pi), 5.0 / pi, 6.0, 10.0, 1.0 / (8.0 * pi)};
}

BraninConstants BraninConstants::sample(Rng& rng) {
  BraninConstants k{};
  k.a = rng.uniform(0.5, 1.5);
  k.b = rng.uniform(0.1, 0.15);
  k.c = rng.uniform(1.0, 2.0);
  k.r = rng.uniform(5.0, 7.0);
  k.s = rng.uniform(8.0, 12.0);
  k.t = rng.uniform(0.03, 0.05);
  return k;
}

Domain branin_domain() {
  Domain d;
  d.lower = Vector(2);
  d.upper = Vector(2);
  d.lower << -5.0, 0.0;
  d.upper << 10.0, 15.0;
  return d;
}

double branin(const Vector& x, const BraninConstants& k) {
  if (!branin_domain().contains(x)) throw InputError("branin: input outside [-5, 10] x [0, 15]");
  const double inner = x[1] - k.b * x[0] * x[0] + k.c * x[0] - k.r;
  return k.a * inner * inner + k.s * (1.0 - k.t) * std::cos(x[0]) + k.s;
}

HartmannConstants HartmannConstants::target() { return {{1.0, 1.2, 3.0, 3.2}}; }

HartmannConstants HartmannConstants::sample(Rng& rng) {
  HartmannConstants k{};
  k.a[0] = rng.uniform(1.0, 1.02);
  k.a[1] = rng.uniform(1.18, 1.2);
  k.a[2] = rng.uniform(2.8, 3.0);
  k.a[3] = rng.uniform(3.2, 3.4);
  return k;
}

Domain hartmann_domain() {
  Domain d;
  d.lower = Vector::Zero(3);
  d.upper = Vector::Ones(3);
  return d;
}

double hartmann3(const Vector& x, const HartmannConstants& k) {
  static constexpr double A[4][3] = {{3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}, {3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}};
  static constexpr double P[4][3] = {{0.3689, 0.1170, 0.2673},
                                     {0.4699, 0.4387, 0.7470},
                                     {0.1091, 0.8732, 0.5547},
                                     {0.0381, 0.5743, 0.8828}};
  if (!hartmann_domain().contains(x)) throw InputError("hartmann3: input outside [0, 1]^3");
  double f = 0.0;
  for (int i = 0; i < 4; ++i) {
    double e = 0.0;
    for (int j = 0; j < 3; ++j) e += A[i][j] * (x[j] - P[i][j]) * (x[j] - P[i][j]);
    f -= k.a[i] * std::exp(-e);
  }
  return f;
}

// ---------------------------------------------------------------------------

RejectionReport rejection_filter(const std::vector<bool>& source_safe,
                                 const std::vector<bool>& target_safe,
                                 const std::vector<std::size_t>& dims) {
  if (source_safe.size() != target_safe.size()) throw InputError("rejection_filter: mask sizes differ");
  RejectionReport rep;
  const RegionLabeling regions = ccl_label(target_safe, dims);
  rep.target_regions = regions.count;
  rep.shared_fractions.assign(static_cast<std::size_t>(regions.count), 0.0);
  for (std::size_t i = 0; i < target_safe.size(); ++i) {
    if (regions.labels[i] > 0 && source_safe[i]) {
      rep.shared_fractions[static_cast<std::size_t>(regions.labels[i] - 1)] += 1.0;
    }
  }
  for (double& s : rep.shared_fractions) s /= static_cast<double>(target_safe.size());

  if (regions.count < 2) {
    rep.failed_condition = 1;
    return rep;
  }
  const auto sharing = std::count_if(rep.shared_fractions.begin(), rep.shared_fractions.end(),
                                     [](double s) { return s > 0.0; });
  if (sharing < 2) {
    rep.failed_condition = 2;
    return rep;
  }
  const auto large = std::count_if(rep.shared_fractions.begin(), rep.shared_fractions.end(),
                                   [](double s) { return s > 0.05; });
  if (large < 2) {
    rep.failed_condition = 3;
    return rep;
  }
  rep.accepted = true;
  return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(BenchmarkKind kind) {
  switch (kind) {
    case BenchmarkKind::GP1D: return "gp1d";
    case BenchmarkKind::GP2D: return "gp2d";
    case BenchmarkKind::Branin: return "branin";
    case BenchmarkKind::Hartmann3: return "hartmann3";
    case BenchmarkKind::Toy1D: return "toy1d";
    case BenchmarkKind::CustomCsv: return "custom-csv";
  }
  return "unknown";
}

BenchmarkKind parse_benchmark(const std::string& name) {
  for (auto k : {BenchmarkKind::GP1D, BenchmarkKind::GP2D, BenchmarkKind::Branin,
                 BenchmarkKind::Hartmann3, BenchmarkKind::Toy1D, BenchmarkKind::CustomCsv}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown benchmark '" + name + "'");
}

BenchmarkSizes BenchmarkSizes::defaults(BenchmarkKind kind) {
  switch (kind) {
    case BenchmarkKind::GP1D: return {100, 10, 50, 5000};
    case BenchmarkKind::GP2D: return {250, 20, 100, 5000};
    case BenchmarkKind::Toy1D: return {100, 10, 30, 2000};
    default: return {100, 20, 100, 5000};
  }
}

namespace {

std::vector<bool> safe_cells(const Lattice& lattice, const Task& task) {
  std::vector<bool> safe(lattice.size());
  for (std::size_t i = 0; i < lattice.size(); ++i) safe[i] = task.safe(lattice.point(i));
  return safe;
}

Matrix grid_values_of(const Lattice& lattice, const Task& task) {
  const auto n = static_cast<Eigen::Index>(lattice.size());
  const auto j = static_cast<Eigen::Index>(task.num_safety());
  Matrix v(n, 1 + j);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = lattice.point(static_cast<std::size_t>(i));
    v(i, 0) = task.f(x);
    for (Eigen::Index c = 0; c < j; ++c) v(i, 1 + c) = task.safety_value(static_cast<std::size_t>(c), x);
  }
  return v;
}

// Cells of the largest connected component of `mask` (lowest label on ties).
std::vector<std::size_t> largest_component(const std::vector<bool>& mask, const std::vector<std::size_t>& dims) {
  const RegionLabeling lab = ccl_label(mask, dims);
  const auto sizes = lab.region_sizes();
  int best = 0;
  for (int l = 1; l <= lab.count; ++l) {
    if (best == 0 || sizes[static_cast<std::size_t>(l)] > sizes[static_cast<std::size_t>(best)]) best = l;
  }
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (best > 0 && lab.labels[i] == best) cells.push_back(i);
  }
  return cells;
}

Task grid_task(const Lattice& lattice, const Vector& f, const Vector& q) {
  Task t;
  t.f = GridFunction{lattice, f};
  t.q = {GridFunction{lattice, q}};
  t.thresholds = Vector::Zero(1);
  return t;
}

Task closed_form_task(ScalarFunction raw, const Normalization& nz) {
  Task t;
  t.f = [raw = std::move(raw), nz](const Vector& x) { return nz.apply(raw(x)); };
  t.thresholds = Vector::Zero(1);
  return t;
}

void finish_lattice(Benchmark& b, const Lattice& lattice) {
  b.lattice = lattice;
  b.target_safe_cells = safe_cells(lattice, b.target);
  b.target_regions = ccl_label(b.target_safe_cells, lattice.counts);
  b.grid_values.clear();
  for (const Task& s : b.sources) b.grid_values.push_back(grid_values_of(lattice, s));
  b.grid_values.push_back(grid_values_of(lattice, b.target));
}

void set_shared_initial_region(Benchmark& b) {
  std::vector<bool> shared = b.target_safe_cells;
  const std::vector<bool> src = safe_cells(*b.lattice, b.sources.front());
  for (std::size_t i = 0; i < shared.size(); ++i) shared[i] = shared[i] && src[i];
  b.initial_region.lattice = b.lattice;
  b.initial_region.cells = largest_component(shared, b.lattice->counts);
}

void add_branin_metadata(Benchmark& b, const std::string& stem, const BraninConstants& k,
                         const Normalization& nz) {
  b.metadata.emplace_back(stem + ".a", k.a);
  b.metadata.emplace_back(stem + ".b", k.b);
  b.metadata.emplace_back(stem + ".c", k.c);
  b.metadata.emplace_back(stem + ".r", k.r);
  b.metadata.emplace_back(stem + ".s", k.s);
  b.metadata.emplace_back(stem + ".t", k.t);
  b.metadata.emplace_back(stem + ".mean", nz.mean);
  b.metadata.emplace_back(stem + ".std", nz.std);
}

Benchmark make_gp_benchmark(std::size_t dim, std::uint64_t seed) {
  constexpr std::size_t kDrawsPerHyper = 20;
  Rng rng(seed);
  const Lattice lattice = Lattice::uniform(Vector::Constant(static_cast<Eigen::Index>(dim), -2.0),
                                           Vector::Constant(static_cast<Eigen::Index>(dim), 2.0), 100);
  int failures[4] = {0, 0, 0, 0};
  std::size_t attempts = 0;
  while (attempts < kMaxAttempts) {
    const MogpSampler sampler(lattice, sample_mogp_hyper(dim, rng));
    for (std::size_t k = 0; k < kDrawsPerHyper && attempts < kMaxAttempts; ++k) {
      ++attempts;
      const Matrix f = sampler.draw(rng);
      const Matrix q = sampler.draw(rng);
      std::vector<bool> src(lattice.size());
      std::vector<bool> tgt(lattice.size());
      for (std::size_t i = 0; i < lattice.size(); ++i) {
        src[i] = q(static_cast<Eigen::Index>(i), 0) >= 0.0;
        tgt[i] = q(static_cast<Eigen::Index>(i), 1) >= 0.0;
      }
      const RejectionReport rep = rejection_filter(src, tgt, lattice.counts);
      if (!rep.accepted) {
        ++failures[rep.failed_condition];
        continue;
      }
      Benchmark b;
      b.kind = dim == 1 ? BenchmarkKind::GP1D : BenchmarkKind::GP2D;
      b.domain = Domain{lattice.lower, lattice.upper};
      b.sources.push_back(grid_task(lattice, f.col(0), q.col(0)));
      b.target = grid_task(lattice, f.col(1), q.col(1));
      b.noise_std = 0.01;
      b.source_from_safe_region = true;
      finish_lattice(b, lattice);
      set_shared_initial_region(b);
      b.metadata.emplace_back("attempts", static_cast<double>(attempts));
      const MogpHyper& h = sampler.hyper();
      for (std::size_t l = 0; l < h.mixing.size(); ++l) {
        for (Eigen::Index d = 0; d < h.lengthscales[l].size(); ++d) {
          b.metadata.emplace_back(indexed("latent", l + 1) + indexed(".lengthscale", static_cast<std::size_t>(d) + 1),
                                  h.lengthscales[l][d]);
        }
        for (Eigen::Index i = 0; i < 2; ++i) {
          for (Eigen::Index j = 0; j < 2; ++j) {
            b.metadata.emplace_back(indexed("latent", l + 1) + ".W" + std::to_string(i + 1) + std::to_string(j + 1),
                                    h.mixing[l](i, j));
          }
        }
      }
      for (std::size_t r = 0; r < rep.shared_fractions.size(); ++r) {
        b.metadata.emplace_back(indexed("target_region", r + 1) + ".shared_fraction", rep.shared_fractions[r]);
      }
      return b;
    }
  }
  const int worst = static_cast<int>(std::max_element(failures + 1, failures + 4) - failures);
  throw FitError("rejection sampling exceeded " + std::to_string(kMaxAttempts) +
                 " attempts; condition (" + std::to_string(worst) + ") failed most often");
}

Benchmark make_branin_benchmark(std::uint64_t seed, std::size_t num_sources) {
  Rng rng(seed);
  const Domain dom = branin_domain();
  const Lattice lattice = Lattice::uniform(dom.lower, dom.upper, 100);
  const Matrix pts = lattice.points();
  auto normalization = [&](const BraninConstants& k) {
    Vector v(pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) v[i] = branin(pts.row(i).transpose(), k);
    return normalization_of(v);
  };
  auto make_task = [&](const BraninConstants& k) {
    return closed_form_task([k](const Vector& x) { return branin(x, k); }, normalization(k));
  };

  Benchmark b;
  b.kind = BenchmarkKind::Branin;
  b.domain = dom;
  b.noise_std = 0.01;
  const BraninConstants tk = BraninConstants::target();
  b.target = make_task(tk);
  const std::vector<bool> tgt = safe_cells(lattice, b.target);
  add_branin_metadata(b, "target", tk, normalization(tk));

  for (std::size_t p = 0; p < num_sources; ++p) {
    int failures[4] = {0, 0, 0, 0};
    bool accepted = false;
    for (std::size_t attempt = 1; attempt <= kMaxAttempts && !accepted; ++attempt) {
      const BraninConstants sk = BraninConstants::sample(rng);
      Task task = make_task(sk);
      const RejectionReport rep = rejection_filter(safe_cells(lattice, task), tgt, lattice.counts);
      if (!rep.accepted) {
        ++failures[rep.failed_condition];
        continue;
      }
      accepted = true;
      b.sources.push_back(std::move(task));
      add_branin_metadata(b, indexed("source", p + 1), sk, normalization(sk));
      b.metadata.emplace_back(indexed("source", p + 1) + ".attempts", static_cast<double>(attempt));
    }
    if (!accepted) {
      const int worst = static_cast<int>(std::max_element(failures + 1, failures + 4) - failures);
      throw FitError("rejection sampling exceeded " + std::to_string(kMaxAttempts) +
                     " attempts; condition (" + std::to_string(worst) + ") failed most often");
    }
  }
  finish_lattice(b, lattice);
  set_shared_initial_region(b);
  return b;
}

Benchmark make_hartmann_benchmark(std::uint64_t seed, std::size_t num_sources) {
  Rng rng(seed);
  const Domain dom = hartmann_domain();
  const Lattice norm_grid = Lattice::uniform(dom.lower, dom.upper, 22);
  const Matrix pts = norm_grid.points();
  auto make_task = [&](const HartmannConstants& k, const std::string& stem, Benchmark& b) {
    Vector v(pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) v[i] = hartmann3(pts.row(i).transpose(), k);
    const Normalization nz = normalization_of(v);
    for (int i = 0; i < 4; ++i) b.metadata.emplace_back(stem + ".a" + std::to_string(i + 1), k.a[i]);
    b.metadata.emplace_back(stem + ".mean", nz.mean);
    b.metadata.emplace_back(stem + ".std", nz.std);
    return closed_form_task([k](const Vector& x) { return hartmann3(x, k); }, nz);
  };
  Benchmark b;
  b.kind = BenchmarkKind::Hartmann3;
  b.domain = dom;
  b.noise_std = 0.01;
  b.target = make_task(HartmannConstants::target(), "target", b);
  for (std::size_t p = 0; p < num_sources; ++p) {
    b.sources.push_back(make_task(HartmannConstants::sample(rng), indexed("source", p + 1), b));
  }
  return b;
}

// Deterministic: the seed only affects data sampling downstream.
Benchmark make_toy_benchmark() {
  Benchmark b;
  b.kind = BenchmarkKind::Toy1D;
  b.domain.lower = Vector::Constant(1, -1.0);
  b.domain.upper = Vector::Constant(1, 1.0);
  b.noise_std = 0.1;
  b.target.f = [](const Vector& x) {
    const double v = x[0];
    return std::sin(10.0 * v * v * v - 5.0 * v - 10.0) + v * v / 3.0 - 0.5;
  };
  b.target.thresholds = Vector::Zero(1);
  Task src;
  src.f = [](const Vector& x) {
    const double v = x[0];
    return std::sin(10.0 * v * v * v - 5.0 * v - 10.0) + std::sin(v * v) - 0.5;
  };
  src.thresholds = Vector::Zero(1);
  b.sources.push_back(src);
  const Lattice lattice = Lattice::uniform(b.domain.lower, b.domain.upper, 2001);
  finish_lattice(b, lattice);
  // Initial data come from the left safe interval around x = -0.78.
  const int left = b.target_regions.labels[lattice.nearest(Vector::Constant(1, -0.78))];
  b.initial_region.lattice = lattice;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (left > 0 && b.target_regions.labels[i] == left) b.initial_region.cells.push_back(i);
  }
  return b;
}

}  // namespace

Benchmark make_benchmark(BenchmarkKind kind, std::uint64_t seed, std::size_t num_sources) {
  if (num_sources == 0) throw ConfigError("at least one source task is required");
  switch (kind) {
    case BenchmarkKind::GP1D:
    case BenchmarkKind::GP2D:
      if (num_sources != 1) throw ConfigError("GP benchmarks provide exactly one source task");
      return make_gp_benchmark(kind == BenchmarkKind::GP1D ? 1 : 2, seed);
    case BenchmarkKind::Branin: return make_branin_benchmark(seed, num_sources);
    case BenchmarkKind::Hartmann3: return make_hartmann_benchmark(seed, num_sources);
    case BenchmarkKind::Toy1D:
      if (num_sources != 1) throw ConfigError("the toy benchmark provides exactly one source task");
      return make_toy_benchmark();
    case BenchmarkKind::CustomCsv: break;
  }
  throw ConfigError("custom-csv benchmarks are loaded from files, not generated");
}

// ---------------------------------------------------------------------------

Matrix make_pool(const Domain& domain, std::size_t n_pool, std::uint64_t seed) {
  domain.validate();
  if (n_pool == 0) throw InputError("make_pool: pool must not be empty");
  Rng rng(seed);
  return domain.sample(n_pool, rng);
}

LabeledDataset make_initial_target_data(Oracle& oracle, const Region& region, std::size_t n_init,
                                        std::uint64_t seed) {
  Rng rng(seed);
  const Domain& dom = oracle.domain();
  LabeledDataset data = LabeledDataset::empty(dom.dim(), oracle.task().num_safety());
  if (!region.whole_domain() && region.cells.empty()) {
    throw InputError("make_initial_target_data: sampling region is empty");
  }
  std::size_t tries = 0;
  const std::size_t max_tries = kMaxAttempts * std::max<std::size_t>(n_init, 1);
  while (data.size() < n_init) {
    if (++tries > max_tries) {
      throw InputError("make_initial_target_data: region too small for " + std::to_string(n_init) +
                       " safe initial points");
    }
    Vector x(static_cast<Eigen::Index>(dom.dim()));
    if (region.whole_domain()) {
      x = dom.sample(1, rng).row(0).transpose();
    } else {
      const Lattice& lat = *region.lattice;
      const std::size_t cell = region.cells[rng.index(region.cells.size())];
      x = lat.point(cell);
      for (std::size_t d = 0; d < lat.dim(); ++d) {
        const auto i = static_cast<Eigen::Index>(d);
        x[i] = std::clamp(x[i] + rng.uniform(-0.5, 0.5) * lat.step(d), dom.lower[i], dom.upper[i]);
      }
      const std::size_t back = lat.nearest(x);
      if (!std::binary_search(region.cells.begin(), region.cells.end(), back)) continue;
    }
    if (!oracle.ground_truth_safe(x)) continue;
    const Observation obs = oracle.query(x);
    if (!oracle.observed_safe(obs)) continue;
    data.append(x, obs.y, obs.z);
  }
  return data;
}

LabeledDataset make_source_data(Oracle& source_oracle, std::size_t n, bool safe_region_only,
                                std::uint64_t seed) {
  Rng rng(seed);
  const Domain& dom = source_oracle.domain();
  LabeledDataset data = LabeledDataset::empty(dom.dim(), source_oracle.task().num_safety());
  std::size_t tries = 0;
  while (data.size() < n) {
    if (++tries > kMaxAttempts * std::max<std::size_t>(n, 1)) {
      throw InputError("make_source_data: source safe region too small");
    }
    const Vector x = dom.sample(1, rng).row(0).transpose();
    if (safe_region_only && !source_oracle.ground_truth_safe(x)) continue;
    const Observation obs = source_oracle.query(x);
    data.append(x, obs.y, obs.z);
  }
  return data;
}

TestSet make_safe_test_set(Oracle& oracle, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const Domain& dom = oracle.domain();
  TestSet t;
  t.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dom.dim()));
  t.y.resize(static_cast<Eigen::Index>(n));
  std::size_t filled = 0;
  std::size_t tries = 0;
  while (filled < n) {
    if (++tries > kMaxAttempts * std::max<std::size_t>(n, 1)) {
      throw InputError("make_safe_test_set: true safe set too small");
    }
    const Vector x = dom.sample(1, rng).row(0).transpose();
    if (!oracle.ground_truth_safe(x)) continue;
    t.x.row(static_cast<Eigen::Index>(filled)) = x.transpose();
    t.y[static_cast<Eigen::Index>(filled)] = oracle.query(x).y;
    ++filled;
  }
  return t;
}

}  // namespace safetl
