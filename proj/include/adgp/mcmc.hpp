#pragma once

// Affine-invariant ensemble sampler (stretch move) for box-bounded targets.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "adgp/common.hpp"
#include "adgp/gp.hpp"

namespace adgp {

using LogProb = std::function<double(const VectorRef&)>;

/// Axis-aligned support of a uniform prior.
struct BoxPrior {
  Vector lower;
  Vector upper;

  BoxPrior() = default;
  BoxPrior(Vector lo, Vector hi);

  Index dim() const { return lower.size(); }
  bool contains(const VectorRef& x) const;
  /// Independent uniform draw inside the box.
  template <typename Engine>
  Vector sample(Engine& eng) const {
    Vector x(dim());
    for (Index i = 0; i < dim(); ++i) x(i) = lower(i) + (upper(i) - lower(i)) * uniform01(eng);
    return x;
  }
};

/// Walker positions (row per walker), cached log-probabilities and the
/// generator that drives every proposal.
struct WalkerEnsemble {
  Matrix positions;
  Vector log_probs;
  std::mt19937_64 rng;

  Index size() const { return positions.rows(); }
  Index dim() const { return positions.cols(); }
};

/// Observer for one proposal: walker k is moved along the line through the
/// complementary-half walker `partner`, whose position is passed as seen by
/// the proposal.
struct ProposalEvent {
  Index walker;
  Index partner;
  double z;
  bool accepted;
};
using ProposalObserver = std::function<void(const ProposalEvent&, const Matrix& positions)>;

struct StretchOptions {
  double stretch_a = 2.0;
  int threads = 1;
  ProposalObserver observer;
  /// Probability that a proposal is a differential-evolution move
  /// y = x_k + gamma (x_j - x_l) with j, l from the other half, instead of a
  /// stretch. A share `de_jump_fraction` of these uses gamma = 1, which can
  /// carry a walker between separated modes; the rest use 2.38 / sqrt(2d).
  /// Zero (the default) draws no extra random numbers.
  double de_fraction = 0.0;
  double de_jump_fraction = 0.5;
};

struct StepStats {
  Index proposed = 0;
  Index accepted = 0;
};

/// Draw from g(z) ~ 1/sqrt(z) on [1/a, a] by inverse CDF.
double draw_stretch(double a, double u);

/// Evaluates log_prob, mapping NaN to -inf with a warning.
double safe_log_prob(const LogProb& log_prob, const VectorRef& x);

/// One sweep: both halves updated in turn, each against the frozen other half.
/// All random numbers of a half-sweep are drawn before any target evaluation,
/// so the result does not depend on the thread count.
StepStats stretch_step(WalkerEnsemble& ens, const LogProb& log_prob,
                       const StretchOptions& opts = {});

struct SamplerOptions {
  Index n_walkers = 200;
  Index n_steps = 400;
  std::uint64_t seed = 0;
  double stretch_a = 2.0;
  int threads = 1;
  /// Collect every walker position from this step on (0-based, after the
  /// step's update). Negative keeps only the final states.
  Index keep_from_step = -1;
  double de_fraction = 0.0;  // see StretchOptions
  /// After each listed step (0-based), walkers whose log-density trails the
  /// best walker by more than `stuck_gap` are moved onto uniformly chosen
  /// walkers that do not. For burn-in only: it breaks detailed balance.
  std::vector<Index> relocate_after;
  double stuck_gap = 25.0;
};

struct SamplerResult {
  Matrix samples;  // row per sample
  double acceptance_rate = 0.0;
  Index relocated = 0;
};

/// Moves walkers trailing the best log-density by more than `gap` onto
/// randomly chosen walkers within the gap. Returns how many were moved.
Index relocate_stuck_walkers(WalkerEnsemble& ens, double gap);

/// Initializes walkers by independent uniform draws from `prior`, runs
/// n_steps sweeps, and returns either the final walker states or the
/// post-burn-in chain. log_prob is evaluated only inside the prior box.
SamplerResult run_sampler(const LogProb& log_prob, const BoxPrior& prior,
                          const SamplerOptions& opts);

/// Starts from an explicit ensemble (used by the affine-invariance check).
SamplerResult run_sampler_from(const LogProb& log_prob, Matrix initial, std::uint64_t seed,
                               Index n_steps, const StretchOptions& opts = {},
                               std::vector<bool>* decisions = nullptr);

struct HyperposteriorOptions {
  Index n_walkers = 200;
  Index n_steps = 400;
  std::uint64_t seed = 0;
  int threads = 1;
  JitterPolicy jitter;
};

struct HyperposteriorResult {
  GpEnsemble ensemble;
  double acceptance_rate;
  Index replaced_fits;
};

/// MCMC over psi with log_prob = log marginal likelihood + log of the uniform
/// prior; every final walker becomes one ensemble member. Walkers whose fit
/// fails are replaced by a copy of a uniformly chosen successful one.
HyperposteriorResult sample_hyperposterior(std::shared_ptr<const TrainingSet> training,
                                           const BoxPrior& prior,
                                           const HyperposteriorOptions& opts);

}  // namespace adgp
