#include "safetl/optimize.hpp"

#include <cmath>
#include <algorithm>
#include <deque>
#include <limits>
#include <vector>

namespace safetl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const Vector& x, Vector* grad) {
  try {
    const double v = f(x, grad);
    if (!std::isfinite(v)) return kInf;
    if (grad != nullptr && !grad->allFinite()) return kInf;
    return v;
  } catch (const std::exception&) {
    return kInf;
  }
}

Vector project(const Vector& x, const Box& box) {
  return x.cwiseMax(box.lower).cwiseMin(box.upper);
}

// Mask of variables that may move: not sitting on a bound with the descent
// direction -g leaving the box.
Eigen::Array<bool, Eigen::Dynamic, 1> free_mask(const Vector& x, const Vector& g, const Box& box) {
  Eigen::Array<bool, Eigen::Dynamic, 1> free(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool at_lower = x[i] <= box.lower[i] && g[i] > 0.0;
    const bool at_upper = x[i] >= box.upper[i] && g[i] < 0.0;
    free[i] = !(at_lower || at_upper);
  }
  return free;
}

double projected_gradient_norm(const Vector& x, const Vector& g, const Box& box) {
  return (project(x - g, box) - x).lpNorm<Eigen::Infinity>();
}

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, Vector x0, const Box& box,
                           const LbfgsOptions& options) {
  const Eigen::Index n = x0.size();
  if (box.lower.size() != n || box.upper.size() != n) {
    throw InputError("minimize_lbfgs: bound dimensions do not match the start point");
  }
  if ((box.lower.array() > box.upper.array()).any()) {
    throw InputError("minimize_lbfgs: lower bound exceeds upper bound");
  }

  LbfgsResult result;
  Vector x = project(x0, box);
  Vector g(n);
  double fx = safe_eval(objective, x, &g);
  result.evaluations = 1;
  if (!std::isfinite(fx)) {
    result.x = x;
    result.value = kInf;
    return result;
  }

  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    if (projected_gradient_norm(x, g, box) < options.gradient_tolerance) {
      result.converged = true;
      break;
    }

    const auto free = free_mask(x, g, box);
    Vector q = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!free[i]) q[i] = 0.0;
    }

    // Two-loop recursion restricted to the free variables.
    const std::size_t m = s_hist.size();
    std::vector<double> a(m);
    for (std::size_t k = m; k-- > 0;) {
      a[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= a[k] * y_hist[k];
    }
    if (m > 0) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    }
    for (std::size_t k = 0; k < m; ++k) {
      const double b = rho_hist[k] * y_hist[k].dot(q);
      q += (a[k] - b) * s_hist[k];
    }
    Vector d = -q;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!free[i]) d[i] = 0.0;
    }

    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!free[i]) d[i] = 0.0;
      }
      slope = g.dot(d);
      if (!(slope < 0.0)) {
        result.converged = true;
        break;
      }
    }

    // First step of a fresh memory is scaled to unit length.
    double step = (m == 0) ? std::min(1.0, 1.0 / d.lpNorm<Eigen::Infinity>()) : 1.0;
    Vector x_new(n);
    Vector g_new(n);
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < options.max_line_search; ++ls) {
      x_new = project(x + step * d, box);
      f_new = safe_eval(objective, x_new, &g_new);
      ++result.evaluations;
      const double decrease = g.dot(x_new - x);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (m == 0) break;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
    }

    const double rel = (fx - f_new) / std::max({std::abs(fx), std::abs(f_new), 1.0});
    x = x_new;
    g = g_new;
    fx = f_new;
    if (rel < options.value_tolerance) {
      result.converged = true;
      break;
    }
  }

  result.x = x;
  result.value = fx;
  return result;
}

}  // namespace safetl
