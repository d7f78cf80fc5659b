#pragma once

// Expected improvement in fit and the multistart maximizer that picks the
// next training input.

#include <memory>
#include <vector>

#include "adgp/common.hpp"
#include "adgp/designs.hpp"
#include "adgp/gp.hpp"
#include "adgp/likelihood.hpp"
#include "adgp/optimize.hpp"

namespace adgp {

struct SmoothedPos {
  double value;
  double derivative;
};

/// Twice continuously differentiable lower bound of max(x, 0):
/// 0 for x <= 0, x^3/eta^2 - x^4/(2 eta^3) on (0, eta), x - eta/2 beyond.
SmoothedPos smoothed_pos(double x, double eta);

/// Smallest true misfit over the rows of the training set.
double training_g_min(const TrainingSet& training, const MeasurementModel& meas);

struct AcquisitionState {
  std::shared_ptr<const GpEnsemble> ensemble;
  MeasurementModel meas;
  double g_min = 0.0;
  double eta = 1e-4;
  DesignBox bounds;

  /// g_min taken from the ensemble's training outputs.
  static AcquisitionState make(std::shared_ptr<const GpEnsemble> ensemble, MeasurementModel meas,
                               DesignBox bounds, double eta = 1e-4);
};

/// Surrogate misfit of one fit and its gradient in theta.
ObjectiveValue grad_gp_misfit(const VectorRef& theta, const GpFit& fit,
                              const MeasurementModel& meas);

/// I(theta) = mean_j max(g_min - g_j(theta), 0).
double expected_improvement(const VectorRef& theta, const AcquisitionState& state);

/// I_eta(theta) and its gradient.
ObjectiveValue expected_improvement_smoothed(const VectorRef& theta, const AcquisitionState& state);

struct AcquisitionOptions {
  BoxOptOptions optimizer;
  /// Opt-in parallel multistart; the default runs starts one after another.
  int threads = 1;
};

struct LocalOptimum {
  Vector start;
  Vector theta;
  double smoothed_value = 0.0;
  double value = 0.0;  // unsmoothed I at theta
  OptStatus status = OptStatus::max_iterations;
};

struct AcquisitionResult {
  Vector theta_star;
  double value = 0.0;  // unsmoothed I(theta_star)
  Index best_start = -1;
  /// Every start failed its line search; theta_star is the best point evaluated.
  bool degraded = false;
  std::vector<LocalOptimum> optima;
};

/// Maximizes I_eta from every start (row per start) and returns the best
/// converged optimum by unsmoothed I; ties go to the lowest start index.
AcquisitionResult maximize_acquisition(const AcquisitionState& state, const Matrix& starts,
                                       const AcquisitionOptions& opts = {});

}  // namespace adgp
