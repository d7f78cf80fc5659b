#pragma once

// Parameter posteriors with the forward model or the surrogate likelihood,
// and per-dimension highest-posterior-density intervals.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>

#include "adgp/gp.hpp"
#include "adgp/likelihood.hpp"
#include "adgp/mcmc.hpp"
#include "adgp/models.hpp"

namespace adgp {

struct PosteriorOptions {
  Index n_samples = 20000;
  Index n_walkers = 100;
  /// Burn-in sweeps; negative means as many as the kept sweeps.
  Index burn_in = 1000;
  /// Keep every `thin`-th sweep after burn-in.
  Index thin = 1;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct PosteriorSampleSet {
  Matrix samples;      // row per sample
  std::string source;  // "true" or "surrogate"
  std::uint64_t seed = 0;
  Index n_walkers = 0;
  Index n_steps = 0;
  Index burn_in = 0;
  double acceptance_rate = 0.0;
  Index relocated = 0;  // stuck walkers moved during burn-in
};

/// Ensemble MCMC on exp(loglik) restricted to the prior box. Keeps every
/// thin-th of ceil(n_samples / n_walkers) * thin sweeps after the burn-in and
/// returns the last n_samples walker positions. Walkers stranded in negligible-density
/// basins are relocated four times in the first half of the burn-in, since a
/// stretch move cannot carry a walker across a density barrier that separates
/// it from every complementary walker.
PosteriorSampleSet sample_posterior(const LogProb& loglik, const BoxPrior& prior,
                                    const PosteriorOptions& opts, std::string source);

/// Log-likelihood of the forward model; every call evaluates the model.
LogProb true_loglik_fn(std::shared_ptr<const ForwardModel> model, MeasurementModel meas);

/// D-restricted log-likelihood of the GP ensemble; never touches the model.
LogProb surrogate_loglik_fn(std::shared_ptr<const GpEnsemble> ensemble, MeasurementModel meas);

struct HpdSummary {
  double alpha = 0.05;
  Vector lower;
  Vector upper;

  Index dim() const { return lower.size(); }
  /// Fraction of rows of `samples` inside the box.
  double coverage(const Matrix& samples) const;
};

/// Per dimension, the shortest window of sorted samples holding
/// ceil((1 - alpha) n) of them. Needs at least 100 samples.
HpdSummary hpd_region(const Matrix& samples, double alpha = 0.05);

/// Total-variation distance between the equal-width histograms of two
/// 1-D sample sets on [lo, hi] (values outside are clamped into the end bins).
double histogram_tv_distance(const VectorRef& a, const VectorRef& b, double lo, double hi,
                             Index bins);

/// Rows as CSV with header x1..xp.
void write_samples_csv(std::ostream& os, const Matrix& samples);

}  // namespace adgp
