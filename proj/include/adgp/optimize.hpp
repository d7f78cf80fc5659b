#pragma once

#include <functional>

#include "adgp/common.hpp"
#include "adgp/designs.hpp"

namespace adgp {

struct ObjectiveValue {
  double value;
  Vector gradient;
};

using SmoothObjective = std::function<ObjectiveValue(const VectorRef&)>;

struct BoxOptOptions {
  int max_iterations = 200;
  double projected_gradient_tol = 1e-8;
  double value_tol = 1e-12;
  double step_tol = 1e-12;
  /// First step never moves further than this fraction of the box diagonal.
  double initial_step_fraction = 0.1;
};

enum class OptStatus {
  projected_gradient,
  value_change,
  step_size,
  max_iterations,
  line_search_failed,
};

const char* to_string(OptStatus s);

struct BoxOptResult {
  Vector x;
  double value = 0.0;
  OptStatus status = OptStatus::max_iterations;
  int iterations = 0;
  int evaluations = 0;

  bool converged() const {
    return status == OptStatus::projected_gradient || status == OptStatus::value_change ||
           status == OptStatus::step_size;
  }
};

/// Maximizes a smooth objective over a box by projected quasi-Newton ascent:
/// BFGS curvature on the free variables, Armijo backtracking along the
/// projection arc. Stops on the projected-gradient norm, the change in value,
/// or the step length, whichever is met first.
BoxOptResult maximize_box(const SmoothObjective& objective, const VectorRef& x0,
                          const DesignBox& box, const BoxOptOptions& opts = {});

}  // namespace adgp
