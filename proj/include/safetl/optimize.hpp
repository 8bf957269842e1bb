#pragma once

#include <functional>

#include "safetl/common.hpp"

namespace safetl {

/// Objective to minimize. When `grad` is non-null it must be filled with the
/// gradient at `x`. Non-finite values and thrown exceptions both count as +inf.
using Objective = std::function<double(const Vector& x, Vector* grad)>;

struct Box {
  Vector lower;
  Vector upper;
};

struct LbfgsOptions {
  int max_iterations = 200;
  int memory = 8;
  double gradient_tolerance = 1e-6;   // on the projected gradient, infinity norm
  double value_tolerance = 1e-10;     // relative decrease between iterations
  int max_line_search = 30;
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Projected limited-memory BFGS on a box. Variables pinned at a bound with
/// the gradient pointing outward are held fixed for the step; the line search
/// backtracks along the projected path until the Armijo condition holds.
LbfgsResult minimize_lbfgs(const Objective& objective, Vector x0, const Box& box,
                           const LbfgsOptions& options = {});

}  // namespace safetl
