#include "adgp/gp.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <sstream>

namespace adgp {

HyperParams HyperParams::from_vector(const VectorRef& packed) {
  require(packed.size() >= 2, "HyperParams: need sigma_c and at least one length-scale");
  HyperParams psi;
  psi.sigma_c = packed(0);
  psi.lengthscales = packed.tail(packed.size() - 1);
  return psi;
}

Vector HyperParams::to_vector() const {
  Vector packed(lengthscales.size() + 1);
  packed(0) = sigma_c;
  packed.tail(lengthscales.size()) = lengthscales;
  return packed;
}

bool HyperParams::valid() const {
  return std::isfinite(sigma_c) && sigma_c > 0.0 && lengthscales.size() > 0 &&
         lengthscales.allFinite() && (lengthscales.array() > 0.0).all();
}

Matrix covariance_matrix(const Matrix& inputs, const HyperParams& psi) {
  require(inputs.cols() == psi.input_dim(), "covariance_matrix: dimension mismatch");
  const Index n = inputs.rows();
  const double s2 = psi.sigma_c * psi.sigma_c;
  Matrix c(n, n);
  for (Index i = 0; i < n; ++i) {
    c(i, i) = s2;
    for (Index j = 0; j < i; ++j) {
      const double v = sq_exp_cov(inputs.row(i).transpose(), inputs.row(j).transpose(), psi);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

Vector cross_covariance(const Matrix& inputs, const VectorRef& theta, const HyperParams& psi) {
  require(theta.size() == inputs.cols() && theta.size() == psi.input_dim(),
          "cross_covariance: dimension mismatch");
  const Vector inv_l = psi.lengthscales.cwiseInverse();
  const double s2 = psi.sigma_c * psi.sigma_c;
  Vector c(inputs.rows());
  for (Index j = 0; j < inputs.rows(); ++j) {
    const double r2 = ((inputs.row(j).transpose() - theta).cwiseProduct(inv_l)).squaredNorm();
    c(j) = s2 * std::exp(-r2);
  }
  return c;
}

OutputScaling normalize_outputs(const Matrix& raw) {
  require(raw.rows() >= 1 && raw.cols() >= 1, "normalize_outputs: empty output matrix");
  const double n = static_cast<double>(raw.rows());
  OutputScaling out;
  out.means = raw.colwise().sum().transpose() / n;
  out.vars.resize(raw.cols());
  out.scaled.resize(raw.rows(), raw.cols());
  for (Index i = 0; i < raw.cols(); ++i) {
    const double m = out.means(i);
    const double v = (raw.col(i).array() - m).square().sum() / n;
    const double floor = 1e-12 * std::max(1.0, m * m);
    if (v < floor) {
      out.vars(i) = floor;
      out.scaled.col(i).setZero();
    } else {
      out.vars(i) = v;
      out.scaled.col(i) = (raw.col(i).array() - m) / std::sqrt(v);
    }
  }
  return out;
}

TrainingSet::TrainingSet(Matrix inputs, Matrix raw_outputs)
    : inputs_(std::move(inputs)), raw_(std::move(raw_outputs)) {
  require(inputs_.rows() >= 1, "TrainingSet: need at least one training input");
  require(inputs_.rows() == raw_.rows(), "TrainingSet: inputs/outputs row count differs");
  require(inputs_.allFinite() && raw_.allFinite(), "TrainingSet: non-finite entries");
  scaling_ = normalize_outputs(raw_);
}

TrainingSet TrainingSet::augmented(const VectorRef& theta, const VectorRef& output) const {
  require(theta.size() == input_dim() && output.size() == output_dim(),
          "TrainingSet::augmented: dimension mismatch");
  Matrix in(size() + 1, input_dim());
  Matrix out(size() + 1, output_dim());
  in.topRows(size()) = inputs_;
  in.row(size()) = theta.transpose();
  out.topRows(size()) = raw_;
  out.row(size()) = output.transpose();
  return TrainingSet(std::move(in), std::move(out));
}

double condition_estimate(const Matrix& c) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(c, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

namespace {

struct Factor {
  Matrix chol;
  double jitter;
};

Factor factorize(const Matrix& inputs, const HyperParams& psi, const JitterPolicy& policy) {
  require(psi.valid(), "fit: invalid hyperparameters");
  const Matrix c = covariance_matrix(inputs, psi);
  const double s2 = psi.sigma_c * psi.sigma_c;
  double rel = policy.initial;
  while (true) {
    Matrix cj = c;
    cj.diagonal().array() += rel * s2;
    Eigen::LLT<Matrix> llt(cj);
    if (llt.info() == Eigen::Success) {
      Matrix l = llt.matrixL();
      const double dmin = l.diagonal().minCoeff();
      if (std::isfinite(dmin) && dmin > 0.0 && l.allFinite()) return {std::move(l), rel * s2};
    }
    if (rel <= 0.0 || rel * policy.growth > policy.max * (1.0 + 1e-12)) break;
    rel *= policy.growth;
  }
  const double cond = condition_estimate(c);
  std::ostringstream msg;
  msg << "ill-conditioned kernel matrix (n=" << inputs.rows() << ", cond~" << cond
      << ") after jitter up to " << policy.max << "*sigma_c^2";
  throw IllConditionedKernel(msg.str(), cond);
}

}  // namespace

GpFit fit_single(std::shared_ptr<const TrainingSet> training, const HyperParams& psi,
                 const JitterPolicy& jitter) {
  require(training != nullptr, "fit_single: null training set");
  require(psi.input_dim() == training->input_dim(), "fit_single: hyperparameter dimension");
  Factor f = factorize(training->inputs(), psi, jitter);
  GpFit fit;
  fit.weights_ = f.chol.triangularView<Eigen::Lower>().solve(training->scaled_outputs());
  f.chol.triangularView<Eigen::Lower>().transpose().solveInPlace(fit.weights_);
  fit.chol_ = std::move(f.chol);
  fit.jitter_ = f.jitter;
  fit.psi_ = psi;
  fit.training_ = std::move(training);
  return fit;
}

Prediction predict(const GpFit& fit, const VectorRef& theta) {
  const Vector c = cross_covariance(fit.training().inputs(), theta, fit.hyperparams());
  const Vector k = fit.chol().triangularView<Eigen::Lower>().solve(c);
  Prediction p;
  p.mean = fit.weights().transpose() * c;
  p.unclamped_variance = fit.hyperparams().sigma_c * fit.hyperparams().sigma_c - k.squaredNorm();
  p.variance = std::max(0.0, p.unclamped_variance);
  return p;
}

PredictionGradient predict_with_gradient(const GpFit& fit, const VectorRef& theta) {
  const Matrix& x = fit.training().inputs();
  const HyperParams& psi = fit.hyperparams();
  const Vector c = cross_covariance(x, theta, psi);
  const auto l = fit.chol().triangularView<Eigen::Lower>();
  const Vector k = l.solve(c);
  const Vector w = l.transpose().solve(k);  // C^{-1} c

  PredictionGradient out;
  out.value.mean = fit.weights().transpose() * c;
  out.value.unclamped_variance = psi.sigma_c * psi.sigma_c - k.squaredNorm();
  out.value.variance = std::max(0.0, out.value.unclamped_variance);

  // dc_j/dtheta = -2 Lambda^{-1} (theta - x_j) c_j, Lambda = diag(l^2)
  const Vector inv_l2 = psi.lengthscales.array().square().inverse();
  const Matrix delta = (-x).rowwise() + theta.transpose();  // n x p
  const Matrix dc = (-2.0 * (delta.array().colwise() * c.array())).matrix() * inv_l2.asDiagonal();
  out.mean_grad = dc.transpose() * fit.weights();
  if (out.value.unclamped_variance > 0.0)
    out.variance_grad = -2.0 * dc.transpose() * w;
  else
    out.variance_grad = Vector::Zero(theta.size());
  return out;
}

double log_marginal_likelihood(const TrainingSet& training, const HyperParams& psi,
                               const JitterPolicy& jitter) {
  require(psi.input_dim() == training.input_dim(), "log_marginal_likelihood: dimension");
  const Factor f = factorize(training.inputs(), psi, jitter);
  const Matrix alpha = f.chol.triangularView<Eigen::Lower>().solve(training.scaled_outputs());
  const double n = static_cast<double>(training.size());
  const double q = static_cast<double>(training.output_dim());
  const double log_det = 2.0 * f.chol.diagonal().array().log().sum();
  return -0.5 * alpha.squaredNorm() - 0.5 * q * log_det -
         0.5 * q * n * std::log(2.0 * std::numbers::pi);
}

GpEnsemble::GpEnsemble(std::shared_ptr<const TrainingSet> training, std::vector<GpFit> fits)
    : training_(std::move(training)), fits_(std::move(fits)) {
  require(training_ != nullptr, "GpEnsemble: null training set");
  require(!fits_.empty(), "GpEnsemble: need at least one fit");
  for (const auto& f : fits_)
    require(f.training_ptr() == training_, "GpEnsemble: fits must share the training set");
}

Matrix GpEnsemble::hyperparameter_matrix() const {
  Matrix out(size(), training_->input_dim() + 1);
  for (Index j = 0; j < size(); ++j) out.row(j) = fits_[j].hyperparams().to_vector().transpose();
  return out;
}

GpEnsemble ensemble_from_samples(std::shared_ptr<const TrainingSet> training,
                                 const Matrix& packed_psi, const JitterPolicy& jitter) {
  std::vector<GpFit> fits;
  fits.reserve(packed_psi.rows());
  for (Index j = 0; j < packed_psi.rows(); ++j)
    fits.push_back(fit_single(training, HyperParams::from_vector(packed_psi.row(j).transpose()),
                              jitter));
  return GpEnsemble(std::move(training), std::move(fits));
}

ComponentPrediction rescale(const Prediction& pred, const TrainingSet& training) {
  ComponentPrediction c;
  c.mean = (training.out_vars().array().sqrt() * pred.mean.array() + training.out_means().array())
               .matrix();
  c.variance = pred.variance;
  c.cov_diag = pred.variance * training.out_vars();
  return c;
}

std::vector<ComponentPrediction> ensemble_predict_vector(const GpEnsemble& ens,
                                                         const VectorRef& theta) {
  std::vector<ComponentPrediction> out;
  out.reserve(ens.fits().size());
  for (const auto& fit : ens.fits()) out.push_back(rescale(predict(fit, theta), ens.training()));
  return out;
}

ScalarMoments mixture_moments(std::span<const double> means, std::span<const double> variances) {
  require(!means.empty() && means.size() == variances.size(), "mixture_moments: bad components");
  const double n = static_cast<double>(means.size());
  double m = 0.0, m2 = 0.0, v = 0.0;
  for (std::size_t j = 0; j < means.size(); ++j) {
    m += means[j];
    m2 += means[j] * means[j];
    v += variances[j];
  }
  m /= n;
  return {m, v / n + m2 / n - m * m};
}

VectorMoments mixture_moments(std::span<const ComponentPrediction> components) {
  require(!components.empty(), "mixture_moments: no components");
  const Index q = components.front().mean.size();
  const double n = static_cast<double>(components.size());
  Vector m = Vector::Zero(q);
  Matrix second = Matrix::Zero(q, q);
  Vector cov = Vector::Zero(q);
  for (const auto& c : components) {
    m += c.mean;
    second.noalias() += c.mean * c.mean.transpose();
    cov += c.cov_diag;
  }
  m /= n;
  Matrix covariance = second / n - m * m.transpose();
  covariance.diagonal() += cov / n;
  return {m, covariance};
}

}  // namespace adgp
