#pragma once

#include <optional>
#include <string>

#include "safetl/kernels.hpp"

namespace safetl {

/// Inputs of the local-exploration bound for one safety constraint.
struct BoundInputs {
  std::size_t n = 0;       // number of observations
  double delta = 0.0;      // covariance bound, in (0, sqrt(k_scale) sigma / sqrt(n))
  double sigma = 0.0;      // observation noise standard deviation
  double k_scale = 1.0;    // maximum kernel variance
  double threshold = 0.0;  // safety threshold T
};

/// Open upper limit sqrt(k_scale) * sigma / sqrt(n) for delta.
double delta_limit(std::size_t n, double sigma, double k_scale);

/// Phi((n delta / sigma^2 - T) / sqrt(k_scale - (sqrt(n) delta / sigma)^2)).
double safety_probability_bound(const BoundInputs& in);

enum class DeltaCondition {
  NonNegativeThreshold,  // T >= 0 and beta^{1/2} > 0
  NegativeThreshold,     // T < 0 and beta^{1/2} > |T| / sqrt(k_scale)
  Violated,
};

DeltaCondition delta_condition(double beta, double threshold, double k_scale);
std::string describe(DeltaCondition condition);

/// Largest delta (bisection to 1e-10) whose bound does not exceed
/// Phi(beta^{1/2}); empty when neither existence condition holds.
std::optional<double> find_delta(double beta, double threshold, double k_scale, std::size_t n,
                                 double sigma);

struct ExplorationBound {
  std::optional<double> delta;
  std::optional<double> radius;     // in input units
  double bound = 0.0;               // bound value at delta
  DeltaCondition condition = DeltaCondition::Violated;
};

/// Distance beyond which every point has safety probability bounded by
/// Phi(beta^{1/2}): the largest lengthscale times the unit-scale radius at
/// delta / k_scale.
ExplorationBound exploration_radius(KernelFamily family, const Vector& lengthscales, double beta,
                                    double threshold, std::size_t n, double sigma, double k_scale);

}  // namespace safetl
