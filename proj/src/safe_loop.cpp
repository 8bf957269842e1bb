#include "safetl/safe_loop.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>

#include "safetl/normal.hpp"
#include "safetl/theory.hpp"

namespace safetl {

double alpha_from_beta(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InputError("alpha_from_beta: beta must be >= 0");
  return normal_cdf(-std::sqrt(beta));
}

double beta_from_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw InputError("beta_from_alpha: alpha must lie in (0, 0.5]");
  const double root = -normal_quantile(alpha);
  return root * root;
}

Pool::Pool(Matrix candidates) : x_(std::move(candidates)), alive_(static_cast<std::size_t>(x_.rows()), true) {
  if (x_.rows() == 0) throw InputError("Pool: no candidates");
  alive_count_ = size();
}

void Pool::remove(std::size_t i) {
  if (i >= size()) throw InputError("Pool::remove: index out of range");
  if (alive_[i]) {
    alive_[i] = false;
    --alive_count_;
  }
}

SafeSet compute_safe_set(const std::vector<Prediction>& safety, const std::vector<double>& noise_variances,
                         const Pool& pool, double beta, const Vector& thresholds, bool noisy,
                         bool include_removed) {
  if (safety.empty() || safety.size() != static_cast<std::size_t>(thresholds.size()) ||
      noise_variances.size() != safety.size()) {
    throw InputError("compute_safe_set: one prediction, noise variance and threshold per constraint");
  }
  if (!(beta >= 0.0)) throw InputError("compute_safe_set: beta must be >= 0");
  for (const Prediction& p : safety) {
    if (p.mean.size() != static_cast<Eigen::Index>(pool.size()) || p.variance.size() != p.mean.size()) {
      throw InputError("compute_safe_set: predictions must cover the pool");
    }
  }
  SafeSet out;
  out.beta = beta;
  out.thresholds = thresholds;
  out.noisy = noisy;
  const double root = std::sqrt(beta);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!include_removed && !pool.alive(i)) continue;
    const auto r = static_cast<Eigen::Index>(i);
    bool ok = true;
    for (std::size_t j = 0; j < safety.size() && ok; ++j) {
      const double var = safety[j].variance[r] + (noisy ? noise_variances[j] : 0.0);
      ok = safety[j].mean[r] - root * std::sqrt(std::max(var, 0.0)) >= thresholds[static_cast<Eigen::Index>(j)];
    }
    if (ok) out.members.push_back(i);
  }
  return out;
}

AcquisitionScores acquisition_scores(const std::vector<Vector>& variances) {
  if (variances.empty()) throw InputError("acquisition_scores: no models");
  AcquisitionScores out;
  out.scores = Vector::Zero(variances.front().size());
  const double c = 2.0 * std::numbers::pi * std::numbers::e;
  for (const Vector& v : variances) {
    if (v.size() != out.scores.size()) throw InputError("acquisition_scores: length mismatch");
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      double s2 = v[i];
      if (!(s2 > 1e-12)) {
        s2 = 1e-12;
        ++out.clamped;
      }
      out.scores[i] += 0.5 * std::log(c * s2);
    }
  }
  return out;
}

std::optional<std::size_t> select_query(const Vector& scores, const SafeSet& safe) {
  std::optional<std::size_t> best;
  for (std::size_t i : safe.members) {
    if (i >= static_cast<std::size_t>(scores.size())) throw InputError("select_query: member outside scores");
    const double s = scores[static_cast<Eigen::Index>(i)];
    if (!best || s > scores[static_cast<Eigen::Index>(*best)] ||
        (s == scores[static_cast<Eigen::Index>(*best)] && i < *best)) {
      best = i;
    }
  }
  return best;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Sal: return "sal";
    case Method::FullHgp: return "full_hgp";
    case Method::FullLmc: return "full_lmc";
    case Method::EffHgp: return "eff_hgp";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (auto m : {Method::Sal, Method::FullHgp, Method::FullLmc, Method::EffHgp}) {
    if (name == to_string(m)) return m;
  }
  if (name == "eff_lmc") {
    throw ConfigError("unsupported combination: eff_lmc (LMC parameters cannot be split into frozen source and free target parts)");
  }
  throw ConfigError("unknown method '" + name + "'");
}

std::string to_string(TraceStatus status) {
  switch (status) {
    case TraceStatus::Completed: return "completed";
    case TraceStatus::SafeSetExhausted: return "safe_set_exhausted";
    case TraceStatus::FitFailed: return "fit_failed";
  }
  return "unknown";
}

double safe_query_ratio(const ExperimentTrace& trace) {
  std::vector<bool> safe;
  for (const auto& r : trace.records) safe.push_back(r.was_safe);
  return safe_query_ratio(safe);
}

BoundCheck check_local_exploration(const ExperimentTrace& trace) {
  BoundCheck out;
  for (const auto& r : trace.records) {
    if (!r.exploration_radius || !r.bound_assumption_holds) {
      ++out.skipped;
      continue;
    }
    ++out.checked;
    if (r.nearest_distance > *r.exploration_radius) ++out.violations;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t tag) { return Rng(base).derive(tag).next(); }

/// Channels modelled for a task: just y when the safety output is y itself,
/// otherwise y and each z_j.
std::vector<std::size_t> model_channels(const Task& task) {
  std::vector<std::size_t> c{0};
  if (!task.safety_is_main()) {
    for (std::size_t j = 1; j <= task.num_safety(); ++j) c.push_back(j);
  }
  return c;
}

double initial_lengthscale(const Domain& domain) { return 0.25 * (domain.upper - domain.lower).mean(); }

/// Fitted models for every channel, predicting the target task.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual void update(const LabeledDataset& target, bool refit, int restarts, std::uint64_t seed) = 0;
  virtual Prediction predict_pool(std::size_t k) const = 0;
  virtual Prediction predict_test(std::size_t k) const = 0;
  virtual double noise_variance(std::size_t k) const = 0;
  /// Single-task model of channel slot k, when there is one.
  virtual const GPModel* single(std::size_t /*k*/) const { return nullptr; }
};

class SingleTaskLearner : public Learner {
 public:
  SingleTaskLearner(std::vector<std::size_t> channels, std::vector<GPModel> models, const LoopData& data)
      : channels_(std::move(channels)), models_(std::move(models)), data_(data) {}

  void update(const LabeledDataset& target, bool refit, int restarts, std::uint64_t seed) override {
    posts_.clear();
    for (std::size_t k = 0; k < channels_.size(); ++k) {
      const Vector y = target.channel(channels_[k]);
      if (refit) {
        FitOptions opt;
        opt.restarts = restarts;
        opt.seed = stream_seed(seed, k);
        models_[k] = fit_gp(models_[k], target.X, y, opt).model;
      }
      posts_.emplace_back(models_[k], target.X, y);
    }
  }
  Prediction predict_pool(std::size_t k) const override { return posts_[k].predict(data_.pool); }
  Prediction predict_test(std::size_t k) const override { return posts_[k].predict(data_.test.x); }
  double noise_variance(std::size_t k) const override { return models_[k].noise_variance; }
  const GPModel* single(std::size_t k) const override { return &models_[k]; }

 private:
  std::vector<std::size_t> channels_;
  std::vector<GPModel> models_;
  const LoopData& data_;
  std::vector<GPPosterior> posts_;
};

MultiTaskData channel_data(const LoopData& data, const LabeledDataset& target, std::size_t c) {
  MultiTaskData d;
  for (const auto& s : data.sources) {
    d.source_x.push_back(s.X);
    d.source_y.push_back(s.channel(c));
  }
  d.target_x = target.X;
  d.target_y = target.channel(c);
  return d;
}

class TransferLearner : public Learner {
 public:
  TransferLearner(std::vector<std::size_t> channels, std::vector<TransferModel> models, const LoopData& data,
                  bool modular)
      : channels_(std::move(channels)), models_(std::move(models)), data_(data), modular_(modular) {
    pool_proj_.resize(channels_.size());
    test_proj_.resize(channels_.size());
  }

  /// Fits (or, with `fit` false, freezes) the source side of every channel.
  void precompute(bool fit, int restarts, std::uint64_t seed) {
    for (std::size_t k = 0; k < channels_.size(); ++k) {
      const MultiTaskData d = channel_data(data_, data_.initial, channels_[k]);
      SourceCache cache;
      if (fit) {
        FitOptions opt;
        opt.restarts = restarts;
        opt.seed = stream_seed(seed, k);
        cache = precompute_source(models_[k], d, opt);
      } else {
        cache = build_source_cache(models_[k], d);
      }
      models_[k] = attach_cache(models_[k], std::make_shared<const SourceCache>(std::move(cache)));
    }
  }

  void update(const LabeledDataset& target, bool refit, int restarts, std::uint64_t seed) override {
    posts_.clear();
    for (std::size_t k = 0; k < channels_.size(); ++k) {
      const MultiTaskData d = channel_data(data_, target, channels_[k]);
      if (refit) {
        FitOptions opt;
        opt.restarts = restarts;
        opt.seed = stream_seed(seed, k);
        models_[k] = modular_ ? fit_target_given_source(models_[k], d, opt).model
                              : fit_full_transfer(models_[k], d, opt).model;
      }
      posts_.push_back(std::make_unique<TransferPosterior>(models_[k], d));
      if (modular_ && pool_proj_[k].size() == 0) {
        pool_proj_[k] = posts_[k]->source_projection(data_.pool);
        test_proj_[k] = posts_[k]->source_projection(data_.test.x);
      }
    }
  }
  Prediction predict_pool(std::size_t k) const override {
    return modular_ ? posts_[k]->predict_projected(data_.pool, pool_proj_[k]) : posts_[k]->predict(data_.pool);
  }
  Prediction predict_test(std::size_t k) const override {
    return modular_ ? posts_[k]->predict_projected(data_.test.x, test_proj_[k])
                    : posts_[k]->predict(data_.test.x);
  }
  double noise_variance(std::size_t k) const override { return models_[k].target_noise; }

 private:
  std::vector<std::size_t> channels_;
  std::vector<TransferModel> models_;
  const LoopData& data_;
  bool modular_;
  std::vector<std::unique_ptr<TransferPosterior>> posts_;
  // L_source^{-1} K(source, .) for the pool and test inputs; fixed because
  // the source parameters never change after precomputation.
  std::vector<Matrix> pool_proj_;
  std::vector<Matrix> test_proj_;
};

void check_data(const Oracle& oracle, const LoopData& data, bool needs_sources) {
  const std::size_t dim = oracle.domain().dim();
  const std::size_t j = oracle.task().num_safety();
  data.initial.validate();
  if (data.initial.dim() != dim || data.initial.num_safety() != j) {
    throw InputError("initial data do not match the oracle's input dimension or safety outputs");
  }
  if (data.pool.cols() != static_cast<Eigen::Index>(dim)) throw InputError("pool dimension mismatch");
  if (data.pool_safe.size() != static_cast<std::size_t>(data.pool.rows())) {
    throw InputError("pool ground truth must have one entry per pool point");
  }
  if (data.test.x.rows() == 0 || data.test.x.cols() != static_cast<Eigen::Index>(dim) ||
      data.test.y.size() != data.test.x.rows()) {
    throw InputError("test set missing or malformed");
  }
  if (needs_sources && data.sources.empty()) throw InputError("transfer methods need source data");
  for (const auto& s : data.sources) {
    s.validate();
    if (s.dim() != dim || s.num_safety() != j) throw InputError("source data layout differs from the target");
  }
  if (data.regions && !data.lattice) throw InputError("region labels need their lattice");
}

ExperimentTrace run_loop(Learner& learner, Method method, Oracle& oracle, const LoopData& data,
                         const LoopConfig& cfg, bool frozen) {
  using Clock = std::chrono::steady_clock;
  ExperimentTrace trace;
  trace.method = method;
  if (cfg.refit_every == 0) throw ConfigError("refit_every must be positive");

  const Task& task = oracle.task();
  const std::size_t num_safety = task.num_safety();
  const std::vector<std::size_t> channels = model_channels(task);
  // Slot of each safety constraint among the modelled channels.
  std::vector<std::size_t> safety_slot(num_safety);
  for (std::size_t j = 0; j < num_safety; ++j) safety_slot[j] = task.safety_is_main() ? 0 : j + 1;

  LabeledDataset target = data.initial;
  Pool pool(data.pool);
  const bool check_bound = method == Method::Sal && num_safety == 1;

  for (std::size_t it = 0; it < cfg.n_query; ++it) {
    const bool refit = !frozen && it % cfg.refit_every == 0;
    const int restarts = it == 0 ? cfg.initial_restarts : cfg.refit_restarts;
    const auto t0 = Clock::now();
    try {
      learner.update(target, refit, restarts, stream_seed(cfg.seed, 1000 + it));
    } catch (const FitError& e) {
      trace.status = TraceStatus::FitFailed;
      trace.message = e.what();
      return trace;
    } catch (const FactorizationError& e) {
      trace.status = TraceStatus::FitFailed;
      trace.message = e.what();
      return trace;
    }
    const double fit_seconds = cfg.timing ? std::chrono::duration<double>(Clock::now() - t0).count() : 0.0;

    std::vector<Prediction> preds;
    for (std::size_t k = 0; k < channels.size(); ++k) preds.push_back(learner.predict_pool(k));
    std::vector<Prediction> safety;
    std::vector<double> noise;
    for (std::size_t j = 0; j < num_safety; ++j) {
      safety.push_back(preds[safety_slot[j]]);
      noise.push_back(learner.noise_variance(safety_slot[j]));
    }
    const SafeSet safe = compute_safe_set(safety, noise, pool, cfg.beta, task.thresholds, cfg.noisy);
    const SafeSet whole = compute_safe_set(safety, noise, pool, cfg.beta, task.thresholds, cfg.noisy, true);
    std::vector<Vector> variances;
    for (const auto& p : preds) variances.push_back(p.variance);
    const AcquisitionScores acq = acquisition_scores(variances);

    const auto pick = select_query(acq.scores, safe);
    if (!pick) {
      trace.status = TraceStatus::SafeSetExhausted;
      trace.message = "empty safe set at iteration " + std::to_string(it);
      return trace;
    }

    IterationRecord rec;
    rec.iteration = it;
    rec.query_index = *pick;
    rec.x = data.pool.row(static_cast<Eigen::Index>(*pick)).transpose();
    rec.safe_set_size = safe.members.size();
    rec.fit_seconds = fit_seconds;
    rec.rmse = rmse(learner.predict_test(0).mean, data.test.y);
    const AreaRates area = tp_fp_area(whole.members, data.pool_safe);
    rec.tp_area = area.tp;
    rec.fp_area = area.fp;
    if (data.regions) rec.region_label = data.regions->labels[data.lattice->nearest(rec.x)];

    if (check_bound) {
      const GPModel* m = learner.single(safety_slot[0]);
      const Vector z = target.channel(task.safety_is_main() ? 0 : 1);
      const std::size_t n = target.size();
      rec.bound_assumption_holds = n > 0 && z.norm() <= std::sqrt(static_cast<double>(n));
      if (m != nullptr && n > 0) {
        const ExplorationBound b = exploration_radius(
            m->kernel.family, m->kernel.lengthscales, cfg.beta, task.thresholds[0], n,
            std::sqrt(m->noise_variance), m->kernel.scale);
        rec.exploration_radius = b.radius;
        rec.nearest_distance = (target.X.rowwise() - rec.x.transpose()).rowwise().norm().minCoeff();
      }
    }

    const Observation obs = oracle.query(rec.x);
    rec.y = obs.y;
    rec.z = obs.z;
    rec.was_safe = oracle.observed_safe(obs);
    trace.records.push_back(rec);
    target.append(rec.x, obs.y, obs.z);
    pool.remove(*pick);
  }
  return trace;
}

std::vector<TransferModel> default_transfer_models(const Oracle& oracle, const LoopData& data,
                                                   const LoopConfig& cfg, bool lmc) {
  const std::size_t p = data.sources.size();
  const std::size_t dim = oracle.domain().dim();
  const double l0 = initial_lengthscale(oracle.domain());
  TransferModel m;
  m.kernel = lmc ? MultiTaskKernelSpec::default_lmc(p, dim, cfg.family, l0, cfg.lmc_latents)
                 : MultiTaskKernelSpec::default_hgp(p, dim, cfg.family, l0);
  m.source_noise = Vector::Constant(static_cast<Eigen::Index>(p), 1e-2);
  m.target_noise = 1e-2;
  return std::vector<TransferModel>(model_channels(oracle.task()).size(), m);
}

void check_frozen_count(std::size_t have, std::size_t want) {
  if (have != want) {
    throw ConfigError("frozen parameters: expected " + std::to_string(want) + " channel models, got " +
                      std::to_string(have));
  }
}

}  // namespace

ExperimentTrace run_sal(Oracle oracle, const LoopData& data, const LoopConfig& config) {
  check_data(oracle, data, false);
  const auto channels = model_channels(oracle.task());
  std::vector<GPModel> models;
  if (config.frozen_single) {
    check_frozen_count(config.frozen_single->size(), channels.size());
    models = *config.frozen_single;
  } else {
    const std::size_t dim = oracle.domain().dim();
    const GPModel m{KernelSpec{config.family, Vector::Constant(static_cast<Eigen::Index>(dim),
                                                               initial_lengthscale(oracle.domain())),
                               1.0},
                    1e-2};
    models.assign(channels.size(), m);
  }
  SingleTaskLearner learner(channels, std::move(models), data);
  return run_loop(learner, Method::Sal, oracle, data, config, config.frozen_single.has_value());
}

ExperimentTrace run_full_transfer(Oracle oracle, const LoopData& data, const LoopConfig& config, bool lmc) {
  check_data(oracle, data, true);
  const auto channels = model_channels(oracle.task());
  std::vector<TransferModel> models;
  if (config.frozen_transfer) {
    check_frozen_count(config.frozen_transfer->size(), channels.size());
    models = *config.frozen_transfer;
    for (auto& m : models) m.cache.reset();
  } else {
    models = default_transfer_models(oracle, data, config, lmc);
  }
  TransferLearner learner(channels, std::move(models), data, false);
  return run_loop(learner, lmc ? Method::FullLmc : Method::FullHgp, oracle, data, config,
                  config.frozen_transfer.has_value());
}

ExperimentTrace run_modular_transfer(Oracle oracle, const LoopData& data, const LoopConfig& config) {
  check_data(oracle, data, true);
  const auto channels = model_channels(oracle.task());
  std::vector<TransferModel> models;
  const bool frozen = config.frozen_transfer.has_value();
  if (frozen) {
    check_frozen_count(config.frozen_transfer->size(), channels.size());
    models = *config.frozen_transfer;
  } else {
    models = default_transfer_models(oracle, data, config, false);
  }
  for (const auto& m : models) {
    if (!m.kernel.is_hgp()) {
      throw ConfigError("unsupported combination: modular transfer requires the HGP kernel");
    }
  }
  TransferLearner learner(channels, std::move(models), data, true);
  ExperimentTrace failed;
  failed.method = Method::EffHgp;
  try {
    learner.precompute(!frozen, config.initial_restarts, stream_seed(config.seed, 999));
  } catch (const FitError& e) {
    failed.status = TraceStatus::FitFailed;
    failed.message = e.what();
    return failed;
  } catch (const FactorizationError& e) {
    failed.status = TraceStatus::FitFailed;
    failed.message = e.what();
    return failed;
  }
  return run_loop(learner, Method::EffHgp, oracle, data, config, frozen);
}

ExperimentTrace run_method(Method method, Oracle oracle, const LoopData& data, const LoopConfig& config) {
  switch (method) {
    case Method::Sal: return run_sal(std::move(oracle), data, config);
    case Method::FullHgp: return run_full_transfer(std::move(oracle), data, config, false);
    case Method::FullLmc: return run_full_transfer(std::move(oracle), data, config, true);
    case Method::EffHgp: return run_modular_transfer(std::move(oracle), data, config);
  }
  throw ConfigError("unknown method");
}

}  // namespace safetl
