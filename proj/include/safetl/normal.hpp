#pragma once

namespace safetl {

/// Standard normal CDF, evaluated through std::erfc so that both tails keep
/// full relative precision.
double normal_cdf(double x);

/// Inverse of normal_cdf on (0, 1). Rational initial guess refined with
/// Halley steps against normal_cdf; absolute error is below 1e-14 on
/// [1e-300, 1 - 1e-16].
double normal_quantile(double p);

/// Standard normal density.
double normal_pdf(double x);

}  // namespace safetl
