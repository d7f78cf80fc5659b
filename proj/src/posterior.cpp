#include "adgp/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "adgp/designs.hpp"

namespace adgp {

PosteriorSampleSet sample_posterior(const LogProb& loglik, const BoxPrior& prior,
                                    const PosteriorOptions& opts, std::string source) {
  require(opts.n_samples >= 1, "sample_posterior: n_samples must be positive");
  require(opts.thin >= 1, "sample_posterior: thin must be positive");
  const Index kept = (opts.n_samples + opts.n_walkers - 1) / opts.n_walkers;
  const Index burn = opts.burn_in >= 0 ? opts.burn_in : kept * opts.thin;
  SamplerOptions so;
  so.n_walkers = opts.n_walkers;
  so.n_steps = burn + kept * opts.thin;
  so.keep_from_step = burn;
  so.seed = opts.seed;
  so.threads = opts.threads;
  so.de_fraction = 0.2;
  for (Index q = 1; q <= 4; ++q) so.relocate_after.push_back(q * burn / 8);
  SamplerResult r = run_sampler(loglik, prior, so);
  Matrix thinned(kept * opts.n_walkers, prior.dim());
  for (Index s = 0; s < kept; ++s)
    thinned.middleRows(s * opts.n_walkers, opts.n_walkers) =
        r.samples.middleRows((s * opts.thin + opts.thin - 1) * opts.n_walkers, opts.n_walkers);

  PosteriorSampleSet out;
  out.samples = thinned.bottomRows(opts.n_samples);
  out.source = std::move(source);
  out.seed = opts.seed;
  out.n_walkers = opts.n_walkers;
  out.n_steps = so.n_steps;
  out.burn_in = burn;
  out.acceptance_rate = r.acceptance_rate;
  out.relocated = r.relocated;
  return out;
}

LogProb true_loglik_fn(std::shared_ptr<const ForwardModel> model, MeasurementModel meas) {
  return [model = std::move(model), meas = std::move(meas)](const VectorRef& theta) {
    return true_loglik(theta, *model, meas);
  };
}

LogProb surrogate_loglik_fn(std::shared_ptr<const GpEnsemble> ensemble, MeasurementModel meas) {
  return [ensemble = std::move(ensemble), meas = std::move(meas)](const VectorRef& theta) {
    return d_restricted_loglik(theta, *ensemble, meas);
  };
}

double HpdSummary::coverage(const Matrix& samples) const {
  require(samples.cols() == dim(), "HpdSummary::coverage: dimension");
  Index inside = 0;
  for (Index i = 0; i < samples.rows(); ++i)
    inside += ((samples.row(i).transpose().array() >= lower.array()) &&
               (samples.row(i).transpose().array() <= upper.array()))
                  .all();
  return static_cast<double>(inside) / static_cast<double>(samples.rows());
}

HpdSummary hpd_region(const Matrix& samples, double alpha) {
  require(samples.rows() >= 100, "hpd_region: need at least 100 samples");
  require(alpha > 0.0 && alpha < 1.0, "hpd_region: alpha must lie in (0, 1)");
  const Index n = samples.rows();
  const auto m = static_cast<Index>(std::ceil((1.0 - alpha) * static_cast<double>(n) - 1e-9));
  HpdSummary h;
  h.alpha = alpha;
  h.lower.resize(samples.cols());
  h.upper.resize(samples.cols());
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Index d = 0; d < samples.cols(); ++d) {
    for (Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = samples(i, d);
    std::sort(col.begin(), col.end());
    Index best = 0;
    for (Index i = 1; i + m - 1 < n; ++i)
      if (col[i + m - 1] - col[i] < col[best + m - 1] - col[best]) best = i;
    h.lower(d) = col[best];
    h.upper(d) = col[best + m - 1];
  }
  return h;
}

double histogram_tv_distance(const VectorRef& a, const VectorRef& b, double lo, double hi,
                             Index bins) {
  require(hi > lo && bins >= 1, "histogram_tv_distance: bad binning");
  require(a.size() > 0 && b.size() > 0, "histogram_tv_distance: empty sample");
  const auto hist = [&](const VectorRef& x) {
    Vector h = Vector::Zero(bins);
    for (Index i = 0; i < x.size(); ++i) {
      const double u = (x(i) - lo) / (hi - lo) * static_cast<double>(bins);
      h(std::clamp<Index>(static_cast<Index>(std::floor(u)), 0, bins - 1)) += 1.0;
    }
    return Vector(h / static_cast<double>(x.size()));
  };
  return 0.5 * (hist(a) - hist(b)).cwiseAbs().sum();
}

void write_samples_csv(std::ostream& os, const Matrix& samples) { write_points_csv(os, samples); }

}  // namespace adgp
