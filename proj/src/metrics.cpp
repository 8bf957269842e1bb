#include "safetl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <string>

namespace safetl {

double rmse(const Vector& predictions, const Vector& truth) {
  if (predictions.size() != truth.size()) throw InputError("rmse: length mismatch");
  if (predictions.size() == 0) throw InputError("rmse: empty input");
  return std::sqrt((predictions - truth).squaredNorm() / static_cast<double>(truth.size()));
}

AreaRates tp_fp_area(const std::vector<std::size_t>& members, const std::vector<bool>& true_safe) {
  AreaRates out;
  if (true_safe.empty()) return out;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i : members) {
    if (i >= true_safe.size()) throw InputError("tp_fp_area: member index outside the pool");
    if (true_safe[i]) {
      ++tp;
    } else {
      ++fp;
    }
  }
  const double n = static_cast<double>(true_safe.size());
  out.tp = static_cast<double>(tp) / n;
  out.fp = static_cast<double>(fp) / n;
  return out;
}

// ---------------------------------------------------------------------------

Lattice Lattice::uniform(const Vector& lower, const Vector& upper, std::size_t per_dim) {
  if (lower.size() != upper.size() || lower.size() == 0) throw InputError("Lattice: bad bounds");
  if (per_dim < 2) throw InputError("Lattice: at least two points per dimension required");
  Lattice g;
  g.lower = lower;
  g.upper = upper;
  g.counts.assign(static_cast<std::size_t>(lower.size()), per_dim);
  return g;
}

std::size_t Lattice::size() const {
  std::size_t n = 1;
  for (std::size_t c : counts) n *= c;
  return n;
}

double Lattice::step(std::size_t d) const {
  const auto i = static_cast<Eigen::Index>(d);
  return (upper[i] - lower[i]) / static_cast<double>(counts[d] - 1);
}

std::vector<std::size_t> Lattice::unravel(std::size_t index) const {
  std::vector<std::size_t> idx(counts.size());
  for (std::size_t d = counts.size(); d-- > 0;) {
    idx[d] = index % counts[d];
    index /= counts[d];
  }
  return idx;
}

Vector Lattice::point(std::size_t index) const {
  const auto idx = unravel(index);
  Vector x(static_cast<Eigen::Index>(dim()));
  for (std::size_t d = 0; d < dim(); ++d) {
    x[static_cast<Eigen::Index>(d)] = lower[static_cast<Eigen::Index>(d)] + step(d) * static_cast<double>(idx[d]);
  }
  return x;
}

Matrix Lattice::points() const {
  Matrix x(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < size(); ++i) x.row(static_cast<Eigen::Index>(i)) = point(i).transpose();
  return x;
}

std::size_t Lattice::nearest(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != static_cast<Eigen::Index>(dim())) throw InputError("Lattice::nearest: dimension mismatch");
  std::size_t index = 0;
  for (std::size_t d = 0; d < dim(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    const double span = upper[i] - lower[i];
    if (x[i] < lower[i] - 1e-9 * span || x[i] > upper[i] + 1e-9 * span) {
      throw InputError("Lattice::nearest: query outside the domain");
    }
    const double t = (x[i] - lower[i]) / step(d);
    double k = std::ceil(t - 0.5);
    k = std::clamp(k, 0.0, static_cast<double>(counts[d] - 1));
    index = index * counts[d] + static_cast<std::size_t>(k);
  }
  return index;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> RegionLabeling::region_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(count) + 1, 0);
  for (int l : labels) {
    if (l > 0) ++sizes[static_cast<std::size_t>(l)];
  }
  return sizes;
}

RegionLabeling ccl_label(const std::vector<bool>& safe, const std::vector<std::size_t>& dims) {
  if (dims.empty() || dims.size() > 2) {
    throw InputError("ccl_label: only 1-D and 2-D grids are supported, got " +
                     std::to_string(dims.size()) + " dimensions");
  }
  const std::size_t rows = dims.size() == 2 ? dims[0] : 1;
  const std::size_t cols = dims.size() == 2 ? dims[1] : dims[0];
  if (rows * cols != safe.size()) throw InputError("ccl_label: mask size does not match the grid");

  RegionLabeling out;
  out.dims = dims;
  out.labels.assign(safe.size(), 0);
  std::deque<std::size_t> frontier;
  for (std::size_t start = 0; start < safe.size(); ++start) {
    if (!safe[start] || out.labels[start] != 0) continue;
    const int label = ++out.count;
    out.labels[start] = label;
    frontier.push_back(start);
    while (!frontier.empty()) {
      const std::size_t cell = frontier.front();
      frontier.pop_front();
      const std::size_t r = cell / cols;
      const std::size_t c = cell % cols;
      auto visit = [&](std::size_t nb) {
        if (safe[nb] && out.labels[nb] == 0) {
          out.labels[nb] = label;
          frontier.push_back(nb);
        }
      };
      if (c > 0) visit(cell - 1);
      if (c + 1 < cols) visit(cell + 1);
      if (r > 0) visit(cell - cols);
      if (r + 1 < rows) visit(cell + cols);
    }
  }
  return out;
}

std::size_t count_explored_regions(const Matrix& queries, const RegionLabeling& labeling,
                                   const Lattice& lattice) {
  if (lattice.size() != labeling.labels.size()) {
    throw InputError("count_explored_regions: labeling does not cover the lattice");
  }
  std::set<int> hit;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const int label = labeling.labels[lattice.nearest(queries.row(i).transpose())];
    if (label > 0) hit.insert(label);
  }
  return hit.size();
}

double safe_query_ratio(const std::vector<bool>& was_safe) {
  if (was_safe.empty()) throw InputError("safe_query_ratio: no queries");
  std::size_t safe = 0;
  for (bool s : was_safe) safe += s ? 1 : 0;
  return static_cast<double>(safe) / static_cast<double>(was_safe.size());
}

MeanSe mean_standard_error(const std::vector<double>& values) {
  MeanSe out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(out.n - 1)) / std::sqrt(static_cast<double>(out.n));
  }
  return out;
}

}  // namespace safetl
