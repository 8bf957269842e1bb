#include "safetl/theory.hpp"

#include <cmath>

#include "safetl/normal.hpp"

namespace safetl {

double delta_limit(std::size_t n, double sigma, double k_scale) {
  if (n == 0) throw InputError("delta_limit: at least one observation required");
  if (!(sigma > 0.0) || !(k_scale > 0.0)) throw InputError("delta_limit: sigma and k_scale must be positive");
  return std::sqrt(k_scale) * sigma / std::sqrt(static_cast<double>(n));
}

namespace {

double bound_unchecked(std::size_t n, double delta, double sigma, double k_scale, double t) {
  const double nd = static_cast<double>(n);
  const double ratio = std::sqrt(nd) * delta / sigma;
  const double denom = std::sqrt(k_scale - ratio * ratio);
  return normal_cdf((nd * delta / (sigma * sigma) - t) / denom);
}

}  // namespace

double safety_probability_bound(const BoundInputs& in) {
  const double limit = delta_limit(in.n, in.sigma, in.k_scale);
  if (!(in.delta > 0.0 && in.delta < limit)) {
    throw InputError("safety_probability_bound: delta must lie in (0, " + std::to_string(limit) + ")");
  }
  return bound_unchecked(in.n, in.delta, in.sigma, in.k_scale, in.threshold);
}

DeltaCondition delta_condition(double beta, double threshold, double k_scale) {
  const double root = beta > 0.0 ? std::sqrt(beta) : 0.0;
  if (threshold >= 0.0) return root > 0.0 ? DeltaCondition::NonNegativeThreshold : DeltaCondition::Violated;
  return root > std::abs(threshold) / std::sqrt(k_scale) ? DeltaCondition::NegativeThreshold
                                                         : DeltaCondition::Violated;
}

std::string describe(DeltaCondition condition) {
  switch (condition) {
    case DeltaCondition::NonNegativeThreshold: return "T >= 0 and beta^(1/2) > 0";
    case DeltaCondition::NegativeThreshold: return "T < 0 and beta^(1/2) > |T|/sqrt(k_scale)";
    case DeltaCondition::Violated: break;
  }
  return "neither T >= 0 with beta^(1/2) > 0 nor T < 0 with beta^(1/2) > |T|/sqrt(k_scale) holds";
}

std::optional<double> find_delta(double beta, double threshold, double k_scale, std::size_t n,
                                 double sigma) {
  if (delta_condition(beta, threshold, k_scale) == DeltaCondition::Violated) return std::nullopt;
  const double limit = delta_limit(n, sigma, k_scale);
  const double target = normal_cdf(std::sqrt(beta));
  auto feasible = [&](double d) { return bound_unchecked(n, d, sigma, k_scale, threshold) <= target; };

  // For very large T the bound falls again towards the open upper end.
  const double top = limit * (1.0 - 1e-12);
  if (feasible(top)) return top;
  double lo = 0.0;
  double hi = top;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (!(lo > 0.0)) {
    // Feasible set narrower than the tolerance: fall back to a tiny positive delta.
    lo = 0.5 * hi;
    while (lo > 0.0 && !feasible(lo)) lo *= 0.5;
    if (!(lo > 0.0)) return std::nullopt;
  }
  return lo;
}

ExplorationBound exploration_radius(KernelFamily family, const Vector& lengthscales, double beta,
                                    double threshold, std::size_t n, double sigma, double k_scale) {
  if (lengthscales.size() == 0 || (lengthscales.array() <= 0.0).any()) {
    throw InputError("exploration_radius: lengthscales must be positive");
  }
  ExplorationBound out;
  out.condition = delta_condition(beta, threshold, k_scale);
  out.delta = find_delta(beta, threshold, k_scale, n, sigma);
  if (!out.delta) return out;
  out.bound = bound_unchecked(n, *out.delta, sigma, k_scale, threshold);
  out.radius = lengthscales.maxCoeff() * radius_for_delta(family, *out.delta / k_scale);
  return out;
}

}  // namespace safetl
