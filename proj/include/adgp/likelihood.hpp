#pragma once

// Data misfits and Gaussian log-likelihoods, for the forward model itself and
// for the GP surrogate (the D-restricted likelihood, a Gaussian mixture over
// the hyperparameter ensemble).

#include <span>

#include "adgp/common.hpp"
#include "adgp/gp.hpp"

namespace adgp {

class ForwardModel;

/// Observations z and diagonal noise variances sigma_i^2.
struct MeasurementModel {
  Vector z;
  Vector noise_vars;

  MeasurementModel() = default;
  MeasurementModel(Vector data, Vector variances);
  Index size() const { return z.size(); }
};

/// (z - f)^T Sigma_E^{-1} (z - f) for diagonal Sigma_E.
double misfit(const VectorRef& outputs, const MeasurementModel& meas);

double true_misfit(const VectorRef& theta, const ForwardModel& model, const MeasurementModel& meas);

/// Misfit of one ensemble member: sum_i (z_i - mean_i)^2 / (sigma_i^2 + V_i V).
double gp_misfit(const ComponentPrediction& component, const MeasurementModel& meas);

/// log k = -1/2 sum_i log(2 pi (sigma_i^2 + V_i V)).
double log_mixture_weight(const ComponentPrediction& component, const MeasurementModel& meas);

/// log( (1/n) sum_j k_j exp(-g_j/2) ) with the minimum misfit g* factored out.
double mixture_loglik(std::span<const double> misfits, std::span<const double> log_weights);

double d_restricted_loglik(const VectorRef& theta, const GpEnsemble& ens,
                           const MeasurementModel& meas);

/// Standard Gaussian log-density of z given forward outputs.
double gaussian_loglik(const VectorRef& outputs, const MeasurementModel& meas);

double true_loglik(const VectorRef& theta, const ForwardModel& model, const MeasurementModel& meas);

/// Reference path for a full (non-diagonal) noise covariance: dense solves
/// through an LDLT factorization. Slow; used to cross-check the diagonal code.
namespace dense {

double gp_misfit(const VectorRef& z, const VectorRef& mean, const Matrix& noise_cov,
                 const Matrix& gp_cov);

/// log of (1/n) sum_j N(z | mean_j, noise_cov + gp_cov_j).
double d_restricted_loglik(const VectorRef& z, const Matrix& noise_cov,
                           std::span<const ComponentPrediction> components);

}  // namespace dense

}  // namespace adgp
