#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "safetl/gp.hpp"
#include "safetl/optimize.hpp"

using namespace safetl;
using testing::random_matrix;
using testing::random_vector;

TEST_SUITE("optimize") {

TEST_CASE("L-BFGS finds the Rosenbrock minimum") {
  const Objective rosen = [](const Vector& x, Vector* g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    if (g) {
      g->resize(2);
      (*g)[0] = -2 * a - 400 * x[0] * b;
      (*g)[1] = 200 * b;
    }
    return a * a + 100 * b * b;
  };
  Box box{Vector::Constant(2, -5.0), Vector::Constant(2, 5.0)};
  Vector x0(2);
  x0 << -1.2, 1.0;
  const LbfgsResult r = minimize_lbfgs(rosen, x0, box, {500, 8, 1e-8, 0.0, 30});
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("active bounds are respected") {
  // minimum of (x - 3)^2 + (y + 2)^2 on [0, 1]^2 is at (1, 0)
  const Objective f = [](const Vector& x, Vector* g) {
    if (g) *g = Vector{{2 * (x[0] - 3), 2 * (x[1] + 2)}};
    return (x[0] - 3) * (x[0] - 3) + (x[1] + 2) * (x[1] + 2);
  };
  const LbfgsResult r = minimize_lbfgs(f, Vector::Constant(2, 0.5), Box{Vector::Zero(2), Vector::Ones(2)});
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(0.0));
  CHECK(r.converged);
}

TEST_CASE("non-finite objective regions are avoided") {
  const Objective f = [](const Vector& x, Vector* g) {
    if (x[0] > 2.0) throw FactorizationError("outside");
    if (g) *g = Vector{{2 * (x[0] - 1.5)}};
    return (x[0] - 1.5) * (x[0] - 1.5);
  };
  const LbfgsResult r = minimize_lbfgs(f, Vector::Constant(1, -3.0), Box{Vector::Constant(1, -10), Vector::Constant(1, 10)});
  CHECK(r.x[0] == doctest::Approx(1.5).epsilon(1e-6));
}

}  // TEST_SUITE

TEST_SUITE("gp") {

namespace {

// Dense-inverse oracle for the posterior and the log marginal likelihood.
struct Dense {
  Vector mean, var;
  double lml;
};

Dense dense_oracle(const GPModel& m, const Matrix& x, const Vector& y, const Matrix& t) {
  const Matrix c = kernel_matrix(m.kernel, x, x) + m.noise_variance * Matrix::Identity(x.rows(), x.rows());
  const Matrix ci = c.inverse();
  const Matrix ks = kernel_matrix(m.kernel, x, t);
  Dense d;
  d.mean = ks.transpose() * ci * y;
  d.var = Vector(t.rows());
  for (Eigen::Index i = 0; i < t.rows(); ++i) d.var[i] = m.kernel.scale - ks.col(i).dot(ci * ks.col(i));
  d.lml = -0.5 * y.dot(ci * y) - 0.5 * std::log(c.determinant()) -
          0.5 * static_cast<double>(y.size()) * std::log(2 * std::numbers::pi);
  return d;
}

}  // namespace

TEST_CASE("posterior matches the dense-inverse oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + trial * 3;
    const Matrix x = random_matrix(rng, n, 2);
    const Vector y = random_vector(rng, n);
    const Matrix t = random_matrix(rng, 6, 2);
    const GPModel m{KernelSpec::isotropic(KernelFamily::Matern52, 2, rng.uniform(0.3, 1.0), rng.uniform(0.5, 2.0)),
                    rng.uniform(0.01, 0.2)};
    const Prediction p = posterior(m, x, y, t);
    const Dense d = dense_oracle(m, x, y, t);
    CHECK((p.mean - d.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((p.variance - d.var).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(log_marginal_likelihood(m, x, y) == doctest::Approx(d.lml).epsilon(1e-10));
  }
}

TEST_CASE("no data gives the prior") {
  const GPModel m{KernelSpec::isotropic(KernelFamily::RBF, 1, 0.5, 2.0), 0.1};
  const GPPosterior post(m, Matrix(0, 1), Vector(0));
  const Prediction p = post.predict(Matrix::Zero(3, 1));
  CHECK(p.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK((p.variance.array() - 2.0).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(log_marginal_likelihood(m, Matrix(0, 1), Vector(0)), InputError);
}

TEST_CASE("variance shrinks at observed inputs and is never negative") {
  Rng rng(4);
  const Matrix x = random_matrix(rng, 10, 1);
  const Vector y = random_vector(rng, 10);
  const GPModel m{KernelSpec::isotropic(KernelFamily::Matern52, 1, 0.3), 1e-6};
  const Prediction p = posterior(m, x, y, x);
  CHECK(p.variance.maxCoeff() < 1e-5);
  CHECK(p.variance.minCoeff() >= 0.0);
  // residual at the data is noise * C^{-1} y
  const Matrix c = kernel_matrix(m.kernel, x, x) + 1e-6 * Matrix::Identity(10, 10);
  CHECK((y - p.mean - 1e-6 * c.inverse() * y).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("duplicate inputs need the jitter ladder") {
  Matrix a = Matrix::Ones(3, 3);
  double jitter = -1.0;
  const Matrix l = cholesky_spd(a, &jitter);
  CHECK(jitter > 0.0);
  CHECK(((l * l.transpose()) - a).cwiseAbs().maxCoeff() < 1e-5);
  Matrix bad = -Matrix::Identity(2, 2);
  CHECK_THROWS_AS(cholesky_spd(bad), FactorizationError);
}

TEST_CASE("LML gradient matches finite differences") {
  Rng rng(9);
  for (auto fam : {KernelFamily::RBF, KernelFamily::Matern32, KernelFamily::Matern52}) {
    const Matrix x = random_matrix(rng, 15, 2);
    const Vector y = random_vector(rng, 15);
    KernelSpec k{fam, Vector(2), 1.2};
    k.lengthscales << 0.5, 0.8;
    const GPModel m{k, 0.05};
    Vector g;
    lml_and_gradient(m, x, y, &g);
    const Vector theta = gp_log_params(m);
    const Vector fd = testing::numeric_gradient(
        [&](const Vector& t) { return log_marginal_likelihood(gp_from_log_params(fam, t), x, y); }, theta);
    for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-5));
  }
}

TEST_CASE("offset covariance enters the likelihood additively") {
  Rng rng(13);
  const Matrix x = random_matrix(rng, 8, 1);
  const Vector y = random_vector(rng, 8);
  const Matrix a = random_matrix(rng, 8, 8);
  const Matrix offset = a * a.transpose();
  const GPModel m{KernelSpec::isotropic(KernelFamily::RBF, 1, 0.4), 0.1};
  const Matrix c = offset + kernel_matrix(m.kernel, x, x) + 0.1 * Matrix::Identity(8, 8);
  const double want = -0.5 * y.dot(c.inverse() * y) - 0.5 * std::log(c.determinant()) - 4.0 * std::log(2 * std::numbers::pi);
  CHECK(lml_and_gradient(m, x, y, nullptr, &offset) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("fit recovers a plausible lengthscale and noise") {
  Rng rng(1);
  const Matrix x = random_matrix(rng, 80, 1, -2.0, 2.0);
  Vector y(80);
  for (int i = 0; i < 80; ++i) y[i] = std::sin(3.0 * x(i, 0)) + 0.05 * rng.normal();
  const GPModel init{KernelSpec::isotropic(KernelFamily::Matern52, 1, 1.0), 0.1};
  FitOptions opt;
  opt.seed = 3;
  const FitResult r = fit_gp(init, x, y, opt);
  CHECK(r.successful_starts >= 1);
  CHECK(r.model.kernel.lengthscales[0] > 0.2);
  CHECK(r.model.kernel.lengthscales[0] < 1.5);
  CHECK(r.model.noise_variance < 0.01);
  CHECK(r.lml >= log_marginal_likelihood(init, x, y));
}

TEST_CASE("fixed scale stays fixed") {
  Rng rng(2);
  const Matrix x = random_matrix(rng, 20, 1);
  const Vector y = 3.0 * random_vector(rng, 20);
  FitOptions opt;
  opt.fit_scale = false;
  opt.restarts = 1;
  const FitResult r = fit_gp(GPModel{KernelSpec::isotropic(KernelFamily::RBF, 1, 0.5, 0.7), 0.1}, x, y, opt);
  CHECK(r.model.kernel.scale == doctest::Approx(0.7));
}

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(LabeledDataset(Matrix::Zero(3, 1), Vector::Zero(2), Matrix::Zero(3, 1)), InputError);
  LabeledDataset d = LabeledDataset::empty(2, 1);
  d.append(Vector::Ones(2), 0.5, Vector::Constant(1, 0.2));
  CHECK(d.size() == 1);
  CHECK(d.channel(0)[0] == 0.5);
  CHECK(d.channel(1)[0] == 0.2);
  CHECK_THROWS(d.channel(2));
  CHECK_THROWS(d.append(Vector::Ones(3), 0.0, Vector::Zero(1)));
}

}  // TEST_SUITE
