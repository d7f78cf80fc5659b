#pragma once

// Squared-exponential Gaussian-process regression with conditionally
// independent outputs and per-output normalization, plus the fully Bayesian
// ensemble (one fit per hyperparameter sample) and its mixture moments.

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "adgp/common.hpp"

namespace adgp {

/// Covariance hyperparameters: signal standard deviation and one length-scale
/// per input dimension. Packed as (sigma_c, l_1, ..., l_p).
struct HyperParams {
  double sigma_c = 1.0;
  Vector lengthscales;

  static HyperParams from_vector(const VectorRef& packed);
  Vector to_vector() const;
  Index input_dim() const { return lengthscales.size(); }
  bool valid() const;
};

/// c(a,b) = sigma_c^2 exp(-sum_i (a_i - b_i)^2 / l_i^2). No factor 1/2 in the
/// exponent; every gradient in this library follows that convention.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sq_exp_cov(const Eigen::MatrixBase<DerivedA>& a,
                                     const Eigen::MatrixBase<DerivedB>& b,
                                     const HyperParams& psi) {
  require(a.size() == b.size() && a.size() == psi.input_dim(),
          "sq_exp_cov: dimension mismatch");
  using Scalar = typename DerivedA::Scalar;
  Scalar r2(0);
  for (Index i = 0; i < a.size(); ++i) {
    const Scalar d = (a(i) - b(i)) / psi.lengthscales(i);
    r2 += d * d;
  }
  return psi.sigma_c * psi.sigma_c * std::exp(-r2);
}

/// Row-per-point inputs -> dense covariance matrix C_psi (no jitter).
Matrix covariance_matrix(const Matrix& inputs, const HyperParams& psi);

/// Covariances between theta and every training input.
Vector cross_covariance(const Matrix& inputs, const VectorRef& theta, const HyperParams& psi);

/// Eigenvalue ratio of a symmetric matrix; infinity if not positive definite.
double condition_estimate(const Matrix& c);

struct OutputScaling {
  Matrix scaled;  // n_train x q, zero mean / unit population variance per column
  Vector means;   // m_i
  Vector vars;    // V_i (population convention, 1/n)
};

/// Per-column standardization with the population variance. A column whose
/// variance falls below 1e-12 * max(1, m_i^2) gets that floor as V_i and a
/// zero scaled column.
OutputScaling normalize_outputs(const Matrix& raw);

/// Training inputs, raw forward-model outputs and their normalization.
class TrainingSet {
 public:
  TrainingSet(Matrix inputs, Matrix raw_outputs);

  const Matrix& inputs() const { return inputs_; }
  const Matrix& raw_outputs() const { return raw_; }
  const Matrix& scaled_outputs() const { return scaling_.scaled; }
  const Vector& out_means() const { return scaling_.means; }
  const Vector& out_vars() const { return scaling_.vars; }

  Index size() const { return inputs_.rows(); }
  Index input_dim() const { return inputs_.cols(); }
  Index output_dim() const { return raw_.cols(); }

  /// New set with one more (input, output) row; normalization is recomputed.
  TrainingSet augmented(const VectorRef& theta, const VectorRef& output) const;

 private:
  Matrix inputs_;
  Matrix raw_;
  OutputScaling scaling_;
};

/// Diagonal jitter, relative to sigma_c^2: start at `initial`, multiply by
/// `growth` after each failed factorization, give up above `max`.
/// initial == 0 means a single attempt without jitter.
struct JitterPolicy {
  double initial = 1e-10;
  double max = 1e-6;
  double growth = 10.0;
};

class IllConditionedKernel : public NumericalError {
 public:
  IllConditionedKernel(const std::string& what, double condition_estimate)
      : NumericalError(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Factorized GP for one hyperparameter vector.
class GpFit {
 public:
  const HyperParams& hyperparams() const { return psi_; }
  const TrainingSet& training() const { return *training_; }
  const std::shared_ptr<const TrainingSet>& training_ptr() const { return training_; }
  /// Lower-triangular L with L L^T = C_psi + jitter I.
  const Matrix& chol() const { return chol_; }
  /// Column i holds v_i = C_psi^{-1} yhat_i.
  const Matrix& weights() const { return weights_; }
  /// Absolute jitter that was added to the diagonal.
  double jitter() const { return jitter_; }

 private:
  friend GpFit fit_single(std::shared_ptr<const TrainingSet>, const HyperParams&,
                          const JitterPolicy&);
  std::shared_ptr<const TrainingSet> training_;
  HyperParams psi_;
  Matrix chol_;
  Matrix weights_;
  double jitter_ = 0.0;
};

/// Throws IllConditionedKernel when no jitter within the policy gives a
/// positive-definite factorization.
GpFit fit_single(std::shared_ptr<const TrainingSet> training, const HyperParams& psi,
                 const JitterPolicy& jitter = {});

/// Predictive moments on the normalized scale: one mean per output and the
/// variance shared by all outputs.
struct Prediction {
  Vector mean;
  double variance = 0.0;
  double unclamped_variance = 0.0;
};

Prediction predict(const GpFit& fit, const VectorRef& theta);

/// Prediction plus d(mean_i)/d(theta) (p x q, column per output) and
/// d(variance)/d(theta).
struct PredictionGradient {
  Prediction value;
  Matrix mean_grad;
  Vector variance_grad;
};

PredictionGradient predict_with_gradient(const GpFit& fit, const VectorRef& theta);

/// sum_i log N(yhat_i | 0, C_psi), evaluated through the Cholesky factor.
double log_marginal_likelihood(const TrainingSet& training, const HyperParams& psi,
                               const JitterPolicy& jitter = {});

/// Discrete hyperparameter posterior: one fit per sample, sharing the training set.
class GpEnsemble {
 public:
  GpEnsemble(std::shared_ptr<const TrainingSet> training, std::vector<GpFit> fits);

  const TrainingSet& training() const { return *training_; }
  const std::shared_ptr<const TrainingSet>& training_ptr() const { return training_; }
  const std::vector<GpFit>& fits() const { return fits_; }
  Index size() const { return static_cast<Index>(fits_.size()); }
  /// Row j = packed hyperparameters of fit j.
  Matrix hyperparameter_matrix() const;

 private:
  std::shared_ptr<const TrainingSet> training_;
  std::vector<GpFit> fits_;
};

/// Fits every packed hyperparameter row; used to rebuild a saved surrogate.
GpEnsemble ensemble_from_samples(std::shared_ptr<const TrainingSet> training,
                                 const Matrix& packed_psi, const JitterPolicy& jitter = {});

/// One mixture component on the raw output scale.
struct ComponentPrediction {
  Vector mean;      // V_i^{1/2} m_i(theta) + m_i
  double variance;  // shared normalized variance V(theta; D, psi)
  Vector cov_diag;  // diagonal of Sigma_GP = V(theta) * V_i
};

ComponentPrediction rescale(const Prediction& pred, const TrainingSet& training);

std::vector<ComponentPrediction> ensemble_predict_vector(const GpEnsemble& ens,
                                                         const VectorRef& theta);

struct ScalarMoments {
  double mean;
  double variance;
};

struct VectorMoments {
  Vector mean;
  Matrix covariance;
};

/// Mean and variance of an equal-weight Gaussian mixture.
ScalarMoments mixture_moments(std::span<const double> means, std::span<const double> variances);

/// Vector form: average covariance plus the spread of the component means.
VectorMoments mixture_moments(std::span<const ComponentPrediction> components);

}  // namespace adgp
