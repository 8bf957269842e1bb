#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "safetl/experiment.hpp"
#include "safetl/normal.hpp"
#include "safetl/safe_loop.hpp"

using namespace safetl;

namespace {

Prediction pred(std::initializer_list<double> mean, std::initializer_list<double> var) {
  Prediction p;
  p.mean = Vector(static_cast<Eigen::Index>(mean.size()));
  p.variance = Vector(static_cast<Eigen::Index>(var.size()));
  Eigen::Index i = 0;
  for (double m : mean) p.mean[i++] = m;
  i = 0;
  for (double v : var) p.variance[i++] = v;
  return p;
}

ExperimentConfig toy_config(const std::string& method, std::size_t n_query = 20) {
  return parse_config_text("benchmark = toy1d\nmethod = " + method + "\nseed = 1\nn_pool = 400\nn_test = 200\n" +
                           "n_query = " + std::to_string(n_query) + "\ntiming = false\n");
}

}  // namespace

TEST_SUITE("safe_loop") {

TEST_CASE("alpha and beta convert both ways") {
  CHECK(alpha_from_beta(4.0) == doctest::Approx(0.0227501).epsilon(1e-6 / 0.0227501));
  CHECK(beta_from_alpha(0.0227501319) == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(alpha_from_beta(0.0) == doctest::Approx(0.5));
  for (double b : {0.25, 1.0, 2.0, 9.0, 16.0}) CHECK(beta_from_alpha(alpha_from_beta(b)) == doctest::Approx(b).epsilon(1e-9));
  CHECK_THROWS_AS(alpha_from_beta(-1.0), InputError);
  CHECK_THROWS_AS(beta_from_alpha(0.7), InputError);
}

TEST_CASE("safe set keeps points whose lower bound clears the threshold") {
  Pool pool(Matrix::Zero(4, 1));
  // lower bounds with beta = 4: 1 - 2*0.4 = 0.2, 0.5 - 2*0.3 = -0.1, 2 - 2*1 = 0, 0.1 - 0 = 0.1
  const std::vector<Prediction> s{pred({1.0, 0.5, 2.0, 0.1}, {0.16, 0.09, 1.0, 0.0})};
  const SafeSet a = compute_safe_set(s, {0.0}, pool, 4.0, Vector::Zero(1), false);
  CHECK(a.members == std::vector<std::size_t>{0, 2, 3});
  // noisy mode adds the noise variance: point 3 now has 0.1 - 2*0.1 < 0
  const SafeSet b = compute_safe_set(s, {0.01}, pool, 4.0, Vector::Zero(1), true);
  CHECK(b.members == std::vector<std::size_t>{0});
  pool.remove(0);
  CHECK(compute_safe_set(s, {0.0}, pool, 4.0, Vector::Zero(1), false).members == std::vector<std::size_t>{2, 3});
  CHECK(compute_safe_set(s, {0.0}, pool, 4.0, Vector::Zero(1), false, true).members.size() == 3);
}

TEST_CASE("every constraint must hold") {
  Pool pool(Matrix::Zero(3, 1));
  const std::vector<Prediction> s{pred({1.0, 1.0, -1.0}, {0.0, 0.0, 0.0}), pred({0.0, 2.0, 2.0}, {0.0, 0.0, 0.0})};
  Vector t(2);
  t << 0.5, 1.0;
  CHECK(compute_safe_set(s, {0.0, 0.0}, pool, 4.0, t, false).members == std::vector<std::size_t>{1});
}

TEST_CASE("property: larger beta shrinks the safe set and noise never adds points") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 60;
    Pool pool(Matrix::Zero(static_cast<Eigen::Index>(n), 1));
    Prediction p{testing::random_vector(rng, static_cast<Eigen::Index>(n)),
                 testing::random_vector(rng, static_cast<Eigen::Index>(n)).cwiseAbs()};
    const std::vector<Prediction> s{p};
    const double b1 = rng.uniform(0.0, 4.0), b2 = b1 + rng.uniform(0.0, 4.0);
    const SafeSet lo = compute_safe_set(s, {0.0}, pool, b1, Vector::Zero(1), false);
    const SafeSet hi = compute_safe_set(s, {0.0}, pool, b2, Vector::Zero(1), false);
    const SafeSet noisy = compute_safe_set(s, {0.05}, pool, b1, Vector::Zero(1), true);
    CHECK(std::includes(lo.members.begin(), lo.members.end(), hi.members.begin(), hi.members.end()));
    CHECK(std::includes(lo.members.begin(), lo.members.end(), noisy.members.begin(), noisy.members.end()));
  }
}

TEST_CASE("acquisition sums Gaussian entropies") {
  const double e = 0.5 * std::log(2.0 * M_PI * M_E);
  const AcquisitionScores a = acquisition_scores({Vector{{1.0, 0.25}}, Vector{{1.0, 4.0}}});
  CHECK(a.scores[0] == doctest::Approx(2 * e));
  CHECK(a.scores[1] == doctest::Approx(2 * e + 0.5 * std::log(0.25) + 0.5 * std::log(4.0)));
  const AcquisitionScores c = acquisition_scores({Vector{{0.0, -1e-20}}});
  CHECK(c.clamped == 2);
  CHECK(std::isfinite(c.scores[0]));
  CHECK(c.scores[0] == doctest::Approx(e + 0.5 * std::log(1e-12)));
}

TEST_CASE("query selection takes the best safe point, lowest index on ties") {
  SafeSet s;
  s.members = {1, 2, 4};
  CHECK(select_query(Vector{{9.0, 1.0, 3.0, 5.0, 3.0}}, s) == std::optional<std::size_t>(2));
  s.members = {};
  CHECK_FALSE(select_query(Vector{{1.0}}, s).has_value());
}

TEST_CASE("method names and the unsupported pair") {
  for (auto m : {Method::Sal, Method::FullHgp, Method::FullLmc, Method::EffHgp}) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_WITH_AS(parse_method("eff_lmc"), doctest::Contains("unsupported combination"), ConfigError);
}

TEST_CASE("zero query budget gives an empty completed trace") {
  const ExperimentConfig cfg = toy_config("sal", 0);
  const PreparedRun run = prepare_run(cfg, 1);
  const ExperimentTrace t = run_prepared(run, Method::Sal, cfg);
  CHECK(t.records.empty());
  CHECK(t.status == TraceStatus::Completed);
}

TEST_CASE("an always-safe system yields only safe queries") {
  Task task;
  task.f = [](const Vector& x) { return 5.0 + 0.1 * std::sin(3.0 * x[0]); };
  task.thresholds = Vector::Zero(1);
  Domain dom{Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)};
  Oracle oracle(task, dom, 0.01, 2);
  Rng rng(4);
  LoopData data;
  data.initial = LabeledDataset::empty(1, 1);
  for (double x : {0.2, 0.5}) {
    const Observation o = oracle.query(Vector::Constant(1, x));
    data.initial.append(Vector::Constant(1, x), o.y, o.z);
  }
  data.pool = dom.sample(100, rng);
  data.pool_safe.assign(100, true);
  data.test.x = dom.sample(20, rng);
  data.test.y = Vector(20);
  for (int i = 0; i < 20; ++i) data.test.y[i] = task.f(data.test.x.row(i).transpose());
  LoopConfig cfg;
  cfg.n_query = 10;
  cfg.timing = false;
  cfg.initial_restarts = 2;
  const ExperimentTrace t = run_sal(oracle, data, cfg);
  REQUIRE(t.records.size() == 10);
  CHECK(safe_query_ratio(t) == 1.0);
  CHECK(t.records.back().tp_area == doctest::Approx(1.0));
  CHECK(t.records.back().fp_area == 0.0);
}

TEST_CASE("frozen HGP gives the same trace with and without the cached source") {
  ExperimentConfig cfg = toy_config("eff_hgp", 12);
  const PreparedRun run = prepare_run(cfg, 1);
  LoopConfig lc = loop_config(cfg, run);
  TransferModel m;
  m.kernel = MultiTaskKernelSpec::default_hgp(1, 1, KernelFamily::Matern52, 0.15);
  m.kernel.hgp().target_residual.scale = 0.1;
  m.source_noise = Vector::Constant(1, 0.01);
  m.target_noise = 0.01;
  lc.frozen_transfer = std::vector<TransferModel>{m};
  const Oracle oracle(run.benchmark.target, run.benchmark.domain, run.benchmark.noise_std, run.oracle_seed);
  const ExperimentTrace full = run_full_transfer(oracle, run.data, lc, false);
  const ExperimentTrace eff = run_modular_transfer(oracle, run.data, lc);
  REQUIRE(full.records.size() == eff.records.size());
  for (std::size_t i = 0; i < full.records.size(); ++i) {
    CHECK(full.records[i].query_index == eff.records[i].query_index);
    CHECK(full.records[i].safe_set_size == eff.records[i].safe_set_size);
    CHECK(full.records[i].rmse == doctest::Approx(eff.records[i].rmse).epsilon(1e-8));
  }
}

TEST_CASE("single-task queries stay within the exploration radius") {
  const ExperimentConfig cfg = toy_config("sal", 20);
  const ExperimentTrace t = run_prepared(prepare_run(cfg, 1), Method::Sal, cfg);
  const BoundCheck c = check_local_exploration(t);
  CHECK(c.checked > 0);
  CHECK(c.violations == 0);
}

TEST_CASE("toy: single-task stays left while transfer reaches the other intervals") {
  const ExperimentConfig cfg = toy_config("sal,eff_hgp", 30);
  const PreparedRun run = prepare_run(cfg, 1);
  const ExperimentTrace sal = run_prepared(run, Method::Sal, cfg);
  const ExperimentTrace eff = run_prepared(run, Method::EffHgp, cfg);
  std::size_t sal_right = 0, eff_right = 0;
  for (const auto& r : sal.records) sal_right += r.x[0] > -0.5;
  for (const auto& r : eff.records) eff_right += r.x[0] > -0.5;
  CHECK(sal_right == 0);
  CHECK(eff_right >= 1);
  CHECK(explored_regions(sal) == 1);
  CHECK(explored_regions(eff) >= 2);
}

TEST_CASE("runs are deterministic given the seed") {
  const ExperimentConfig cfg = toy_config("eff_hgp", 8);
  const ExperimentTrace a = run_prepared(prepare_run(cfg, 3), Method::EffHgp, cfg);
  const ExperimentTrace b = run_prepared(prepare_run(cfg, 3), Method::EffHgp, cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].query_index == b.records[i].query_index);
    CHECK(a.records[i].y == b.records[i].y);
    CHECK(a.records[i].rmse == b.records[i].rmse);
  }
}

}  // TEST_SUITE
