#include "adgp/acquisition.hpp"

#include <algorithm>
#include <limits>

#include <spdlog/spdlog.h>

namespace adgp {

SmoothedPos smoothed_pos(double x, double eta) {
  require(eta > 0.0, "smoothed_pos: eta must be positive");
  if (x <= 0.0) return {0.0, 0.0};
  if (x >= eta) return {x - 0.5 * eta, 1.0};
  const double t = x / eta;
  return {x * t * t - 0.5 * x * t * t * t, 3.0 * t * t - 2.0 * t * t * t};
}

double training_g_min(const TrainingSet& training, const MeasurementModel& meas) {
  require(training.output_dim() == meas.size(), "training_g_min: output dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (Index r = 0; r < training.size(); ++r)
    best = std::min(best, misfit(training.raw_outputs().row(r).transpose(), meas));
  return best;
}

AcquisitionState AcquisitionState::make(std::shared_ptr<const GpEnsemble> ensemble,
                                        MeasurementModel meas, DesignBox bounds, double eta) {
  require(ensemble != nullptr, "AcquisitionState: null ensemble");
  require(eta > 0.0, "AcquisitionState: eta must be positive");
  require(bounds.dim() == ensemble->training().input_dim(), "AcquisitionState: bounds dimension");
  AcquisitionState s;
  s.g_min = training_g_min(ensemble->training(), meas);
  s.ensemble = std::move(ensemble);
  s.meas = std::move(meas);
  s.eta = eta;
  s.bounds = std::move(bounds);
  return s;
}

ObjectiveValue grad_gp_misfit(const VectorRef& theta, const GpFit& fit,
                              const MeasurementModel& meas) {
  const TrainingSet& tr = fit.training();
  require(tr.output_dim() == meas.size(), "grad_gp_misfit: output dimension mismatch");
  const PredictionGradient pg = predict_with_gradient(fit, theta);
  const Vector sd = tr.out_vars().array().sqrt();
  const Vector r = meas.z.array() - sd.array() * pg.value.mean.array() - tr.out_means().array();
  const Vector denom = meas.noise_vars + pg.value.variance * tr.out_vars();

  ObjectiveValue out;
  out.value = (r.array().square() / denom.array()).sum();
  // d/dtheta r_i^2 / D_i = -2 r_i sqrt(V_i) dm_i / D_i - r_i^2 V_i dV / D_i^2
  const Vector wm = (-2.0 * r.array() * sd.array() / denom.array()).matrix();
  const double wv = -(r.array().square() * tr.out_vars().array() / denom.array().square()).sum();
  out.gradient = pg.mean_grad * wm + wv * pg.variance_grad;
  return out;
}

double expected_improvement(const VectorRef& theta, const AcquisitionState& state) {
  const auto& fits = state.ensemble->fits();
  double sum = 0.0;
  for (const auto& fit : fits) {
    const double g = gp_misfit(rescale(predict(fit, theta), fit.training()), state.meas);
    sum += std::max(state.g_min - g, 0.0);
  }
  return sum / static_cast<double>(fits.size());
}

ObjectiveValue expected_improvement_smoothed(const VectorRef& theta, const AcquisitionState& state) {
  const auto& fits = state.ensemble->fits();
  ObjectiveValue out{0.0, Vector::Zero(theta.size())};
  for (const auto& fit : fits) {
    const double g = gp_misfit(rescale(predict(fit, theta), fit.training()), state.meas);
    const SmoothedPos h = smoothed_pos(state.g_min - g, state.eta);
    out.value += h.value;
    // Fits with no improvement contribute neither value nor gradient.
    if (h.derivative != 0.0) out.gradient -= h.derivative * grad_gp_misfit(theta, fit, state.meas).gradient;
  }
  const double n = static_cast<double>(fits.size());
  out.value /= n;
  out.gradient /= n;
  return out;
}

AcquisitionResult maximize_acquisition(const AcquisitionState& state, const Matrix& starts,
                                       const AcquisitionOptions& opts) {
  require(starts.rows() > 0, "maximize_acquisition: no starting points");
  require(starts.cols() == state.bounds.dim(), "maximize_acquisition: start dimension");
  for (Index s = 0; s < starts.rows(); ++s)
    require(state.bounds.contains(starts.row(s).transpose()),
            "maximize_acquisition: start outside the search box");

  const SmoothObjective objective = [&state](const VectorRef& th) {
    return expected_improvement_smoothed(th, state);
  };

  AcquisitionResult res;
  res.optima.resize(starts.rows());
  parallel_for(starts.rows(), opts.threads, [&](Index s) {
    const Vector x0 = starts.row(s).transpose();
    const BoxOptResult r = maximize_box(objective, x0, state.bounds, opts.optimizer);
    LocalOptimum& lo = res.optima[s];
    lo.start = x0;
    lo.theta = r.x;
    lo.smoothed_value = r.value;
    lo.value = expected_improvement(r.x, state);
    lo.status = r.status;
  });

  const auto pick = [&](bool converged_only) {
    Index best = -1;
    for (Index s = 0; s < starts.rows(); ++s) {
      const LocalOptimum& lo = res.optima[s];
      if (converged_only && lo.status == OptStatus::line_search_failed) continue;
      if (best < 0 || lo.value > res.optima[best].value) best = s;
    }
    return best;
  };
  res.best_start = pick(true);
  if (res.best_start < 0) {
    res.degraded = true;
    res.best_start = pick(false);
    spdlog::warn("maximize_acquisition: every start failed its line search");
  }
  res.theta_star = res.optima[res.best_start].theta;
  res.value = res.optima[res.best_start].value;
  return res;
}

}  // namespace adgp
