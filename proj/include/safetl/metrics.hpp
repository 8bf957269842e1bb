#pragma once

#include <cstddef>
#include <vector>

#include "safetl/common.hpp"

namespace safetl {

double rmse(const Vector& predictions, const Vector& truth);

struct AreaRates {
  double tp = 0.0;
  double fp = 0.0;
};

/// Fractions of the pool inside the learned safe set that are truly safe
/// (tp) and truly unsafe (fp). `members` index into `true_safe`.
AreaRates tp_fp_area(const std::vector<std::size_t>& members, const std::vector<bool>& true_safe);

/// Regular lattice on a box, with the first coordinate varying slowest.
struct Lattice {
  Vector lower;
  Vector upper;
  std::vector<std::size_t> counts;

  static Lattice uniform(const Vector& lower, const Vector& upper, std::size_t per_dim);

  std::size_t dim() const { return counts.size(); }
  std::size_t size() const;
  double step(std::size_t d) const;
  std::vector<std::size_t> unravel(std::size_t index) const;
  Vector point(std::size_t index) const;
  Matrix points() const;
  /// Index of the closest lattice point; ties go to the lower index along
  /// each axis. Points outside the box (beyond 1e-9 relative) are rejected.
  std::size_t nearest(const Eigen::Ref<const Vector>& x) const;
};

struct RegionLabeling {
  std::vector<std::size_t> dims;
  std::vector<int> labels;  // 0 = unsafe, 1..count = region id
  int count = 0;

  /// Number of cells carrying each label 1..count (index 0 unused).
  std::vector<std::size_t> region_sizes() const;
};

/// Connected components of a safe mask on a 1-D chain or a 2-D row-major
/// grid with 4-adjacency. Labels are assigned in row-major first-seen order.
RegionLabeling ccl_label(const std::vector<bool>& safe, const std::vector<std::size_t>& dims);

/// Distinct nonzero region labels hit by the nearest lattice cells of the
/// queries (rows of `queries`).
std::size_t count_explored_regions(const Matrix& queries, const RegionLabeling& labeling,
                                   const Lattice& lattice);

/// Fraction of true entries.
double safe_query_ratio(const std::vector<bool>& was_safe);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;   // sample standard deviation / sqrt(n); 0 for n = 1
  std::size_t n = 0;
};

MeanSe mean_standard_error(const std::vector<double>& values);

}  // namespace safetl
