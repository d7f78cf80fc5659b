#include "adgp/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "adgp/models.hpp"

namespace adgp {

namespace {
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
}

MeasurementModel::MeasurementModel(Vector data, Vector variances)
    : z(std::move(data)), noise_vars(std::move(variances)) {
  require(z.size() >= 1, "MeasurementModel: need at least one observation");
  require(z.size() == noise_vars.size(), "MeasurementModel: data/variance size mismatch");
  require((noise_vars.array() > 0.0).all(), "MeasurementModel: noise variances must be positive");
}

double misfit(const VectorRef& outputs, const MeasurementModel& meas) {
  require(outputs.size() == meas.size(), "misfit: output dimension mismatch");
  return ((meas.z - outputs).array().square() / meas.noise_vars.array()).sum();
}

double true_misfit(const VectorRef& theta, const ForwardModel& model, const MeasurementModel& meas) {
  return misfit(model.evaluate(theta), meas);
}

double gp_misfit(const ComponentPrediction& component, const MeasurementModel& meas) {
  require(component.mean.size() == meas.size(), "gp_misfit: output dimension mismatch");
  return ((meas.z - component.mean).array().square() /
          (meas.noise_vars + component.cov_diag).array())
      .sum();
}

double log_mixture_weight(const ComponentPrediction& component, const MeasurementModel& meas) {
  return -0.5 * ((meas.noise_vars + component.cov_diag).array().log() + kLog2Pi).sum();
}

double mixture_loglik(std::span<const double> misfits, std::span<const double> log_weights) {
  require(!misfits.empty() && misfits.size() == log_weights.size(),
          "mixture_loglik: component count mismatch");
  const double g_star = *std::min_element(misfits.begin(), misfits.end());
  // The weights k_j are bounded above by the noise-only value, so only the
  // misfit exponent needs shifting.
  double sum = 0.0;
  for (std::size_t j = 0; j < misfits.size(); ++j)
    sum += std::exp(log_weights[j] - 0.5 * (misfits[j] - g_star));
  return -0.5 * g_star + std::log(sum / static_cast<double>(misfits.size()));
}

double d_restricted_loglik(const VectorRef& theta, const GpEnsemble& ens,
                           const MeasurementModel& meas) {
  const auto comps = ensemble_predict_vector(ens, theta);
  std::vector<double> g(comps.size()), lk(comps.size());
  for (std::size_t j = 0; j < comps.size(); ++j) {
    g[j] = gp_misfit(comps[j], meas);
    lk[j] = log_mixture_weight(comps[j], meas);
  }
  return mixture_loglik(g, lk);
}

double gaussian_loglik(const VectorRef& outputs, const MeasurementModel& meas) {
  return -0.5 * (misfit(outputs, meas) + (meas.noise_vars.array().log() + kLog2Pi).sum());
}

double true_loglik(const VectorRef& theta, const ForwardModel& model, const MeasurementModel& meas) {
  return gaussian_loglik(model.evaluate(theta), meas);
}

namespace dense {

double gp_misfit(const VectorRef& z, const VectorRef& mean, const Matrix& noise_cov,
                 const Matrix& gp_cov) {
  const Vector r = z - mean;
  const Eigen::LDLT<Matrix> ldlt(noise_cov + gp_cov);
  return r.dot(ldlt.solve(r));
}

double d_restricted_loglik(const VectorRef& z, const Matrix& noise_cov,
                           std::span<const ComponentPrediction> components) {
  require(!components.empty(), "dense::d_restricted_loglik: no components");
  const double q = static_cast<double>(z.size());
  std::vector<double> terms;
  terms.reserve(components.size());
  for (const auto& c : components) {
    const Matrix s = noise_cov + Matrix(c.cov_diag.asDiagonal());
    const Eigen::LDLT<Matrix> ldlt(s);
    const Vector r = z - c.mean;
    const double log_det = ldlt.vectorD().array().log().sum();
    terms.push_back(-0.5 * r.dot(ldlt.solve(r)) - 0.5 * log_det - 0.5 * q * kLog2Pi);
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return top + std::log(sum / static_cast<double>(components.size()));
}

}  // namespace dense

}  // namespace adgp
