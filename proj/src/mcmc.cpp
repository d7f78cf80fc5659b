#include "adgp/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>

#include <spdlog/spdlog.h>

namespace adgp {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
std::atomic<int> nan_warnings{0};

Index draw_index(std::mt19937_64& rng, Index n) {
  return std::min<Index>(static_cast<Index>(uniform01(rng) * static_cast<double>(n)), n - 1);
}
}  // namespace

BoxPrior::BoxPrior(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  require(lower.size() == upper.size() && lower.size() > 0, "BoxPrior: bound dimensions");
  require((lower.array() < upper.array()).all(), "BoxPrior: need lower < upper");
}

bool BoxPrior::contains(const VectorRef& x) const {
  return x.size() == dim() && (x.array() >= lower.array()).all() &&
         (x.array() <= upper.array()).all();
}

double draw_stretch(double a, double u) {
  const double s = (a - 1.0) * u + 1.0;
  return s * s / a;
}

double safe_log_prob(const LogProb& log_prob, const VectorRef& x) {
  const double lp = log_prob(x);
  if (std::isnan(lp)) {
    if (nan_warnings++ < 10) spdlog::warn("log-probability returned NaN; treating as -inf");
    return kNegInf;
  }
  return lp;
}

StepStats stretch_step(WalkerEnsemble& ens, const LogProb& log_prob, const StretchOptions& opts) {
  const Index n = ens.size();
  const Index d = ens.dim();
  require(n >= 2 && n % 2 == 0, "stretch_step: walker count must be even and >= 2");
  require(opts.stretch_a > 1.0, "stretch_step: stretch parameter must exceed 1");
  const Index half = n / 2;
  require(opts.de_fraction >= 0.0 && opts.de_fraction <= 1.0, "stretch_step: de_fraction in [0, 1]");
  const bool use_de = opts.de_fraction > 0.0;
  require(!use_de || half >= 2, "stretch_step: differential evolution needs two walkers per half");
  const double de_gamma = 2.38 / std::sqrt(2.0 * static_cast<double>(d));
  StepStats stats;

  for (int part = 0; part < 2; ++part) {
    const Index first = part == 0 ? 0 : half;
    const Index other = part == 0 ? half : 0;

    std::vector<Index> partner(half), second(half, -1);
    std::vector<double> z(half), log_u(half);
    for (Index k = 0; k < half; ++k) {
      if (use_de && uniform01(ens.rng) < opts.de_fraction) {
        partner[k] = other + draw_index(ens.rng, half);
        second[k] = other + draw_index(ens.rng, half - 1);
        if (second[k] >= partner[k]) ++second[k];
        const double g = uniform01(ens.rng) < opts.de_jump_fraction ? 1.0 : de_gamma;
        z[k] = g * (1.0 + 1e-5 * standard_normal(ens.rng));
      } else {
        partner[k] = other + draw_index(ens.rng, half);
        z[k] = draw_stretch(opts.stretch_a, uniform01(ens.rng));
      }
      log_u[k] = std::log(uniform01(ens.rng));
    }

    Matrix proposals(half, d);
    for (Index k = 0; k < half; ++k) {
      const auto xj = ens.positions.row(partner[k]);
      if (second[k] >= 0)
        proposals.row(k) = ens.positions.row(first + k) + z[k] * (xj - ens.positions.row(second[k]));
      else
        proposals.row(k) = xj + z[k] * (ens.positions.row(first + k) - xj);
    }

    Vector lp(half);
    parallel_for(half, opts.threads, [&](Index k) {
      lp(k) = safe_log_prob(log_prob, proposals.row(k).transpose());
    });

    std::vector<bool> accept(half);
    for (Index k = 0; k < half; ++k) {
      const double cur = ens.log_probs(first + k);
      bool ok = false;
      if (lp(k) != kNegInf) {
        if (cur == kNegInf)
          ok = true;
        else
          ok = log_u[k] < (second[k] >= 0 ? 0.0 : static_cast<double>(d - 1) * std::log(z[k])) +
                              lp(k) - cur;
      }
      accept[k] = ok;
      if (opts.observer) opts.observer({first + k, partner[k], z[k], ok}, ens.positions);
    }
    for (Index k = 0; k < half; ++k) {
      ++stats.proposed;
      if (!accept[k]) continue;
      ++stats.accepted;
      ens.positions.row(first + k) = proposals.row(k);
      ens.log_probs(first + k) = lp(k);
    }
  }
  return stats;
}

SamplerResult run_sampler_from(const LogProb& log_prob, Matrix initial, std::uint64_t seed,
                               Index n_steps, const StretchOptions& opts,
                               std::vector<bool>* decisions) {
  WalkerEnsemble ens;
  ens.positions = std::move(initial);
  ens.rng.seed(seed);
  ens.log_probs.resize(ens.size());
  for (Index k = 0; k < ens.size(); ++k)
    ens.log_probs(k) = safe_log_prob(log_prob, ens.positions.row(k).transpose());
  StretchOptions local = opts;
  if (decisions) {
    local.observer = [&, user = opts.observer](const ProposalEvent& ev, const Matrix& pos) {
      decisions->push_back(ev.accepted);
      if (user) user(ev, pos);
    };
  }
  Index proposed = 0, accepted = 0;
  for (Index s = 0; s < n_steps; ++s) {
    const StepStats st = stretch_step(ens, log_prob, local);
    proposed += st.proposed;
    accepted += st.accepted;
  }
  return {ens.positions, proposed ? static_cast<double>(accepted) / proposed : 0.0};
}

SamplerResult run_sampler(const LogProb& log_prob, const BoxPrior& prior,
                          const SamplerOptions& opts) {
  const Index d = prior.dim();
  require(opts.n_walkers >= 2 * d && opts.n_walkers % 2 == 0,
          "run_sampler: need an even number of walkers, at least twice the dimension");
  require(opts.n_steps >= 1, "run_sampler: need at least one step");

  const LogProb bounded = [&](const VectorRef& x) {
    return prior.contains(x) ? log_prob(x) : kNegInf;
  };

  WalkerEnsemble ens;
  ens.rng.seed(opts.seed);
  ens.positions.resize(opts.n_walkers, d);
  for (Index k = 0; k < opts.n_walkers; ++k) ens.positions.row(k) = prior.sample(ens.rng).transpose();
  ens.log_probs.resize(opts.n_walkers);
  parallel_for(opts.n_walkers, opts.threads, [&](Index k) {
    ens.log_probs(k) = safe_log_prob(bounded, ens.positions.row(k).transpose());
  });
  if ((ens.log_probs.array() == kNegInf).all())
    throw NumericalError("run_sampler: every initial walker has zero target density");

  StretchOptions so;
  so.stretch_a = opts.stretch_a;
  so.threads = opts.threads;
  so.de_fraction = opts.de_fraction;

  const bool keep_chain = opts.keep_from_step >= 0;
  const Index kept_steps = keep_chain ? std::max<Index>(0, opts.n_steps - opts.keep_from_step) : 0;
  Matrix chain(kept_steps * opts.n_walkers, d);
  Index proposed = 0, accepted = 0, relocated = 0;
  for (Index s = 0; s < opts.n_steps; ++s) {
    const StepStats st = stretch_step(ens, bounded, so);
    proposed += st.proposed;
    accepted += st.accepted;
    if (std::find(opts.relocate_after.begin(), opts.relocate_after.end(), s) != opts.relocate_after.end())
      relocated += relocate_stuck_walkers(ens, opts.stuck_gap);
    if (keep_chain && s >= opts.keep_from_step)
      chain.middleRows((s - opts.keep_from_step) * opts.n_walkers, opts.n_walkers) = ens.positions;
  }
  const double rate = proposed ? static_cast<double>(accepted) / proposed : 0.0;
  spdlog::debug("ensemble sampler: {} walkers x {} steps, acceptance {:.3f}", opts.n_walkers,
                opts.n_steps, rate);
  return {keep_chain ? std::move(chain) : ens.positions, rate, relocated};
}

Index relocate_stuck_walkers(WalkerEnsemble& ens, double gap) {
  require(gap > 0.0, "relocate_stuck_walkers: gap must be positive");
  const double best = ens.log_probs.maxCoeff();
  if (best == kNegInf) return 0;
  std::vector<Index> good, stuck;
  for (Index k = 0; k < ens.size(); ++k)
    (ens.log_probs(k) >= best - gap ? good : stuck).push_back(k);
  for (Index k : stuck) {
    const Index src = good[static_cast<std::size_t>(draw_index(ens.rng, static_cast<Index>(good.size())))];
    ens.positions.row(k) = ens.positions.row(src);
    ens.log_probs(k) = ens.log_probs(src);
  }
  return static_cast<Index>(stuck.size());
}

HyperposteriorResult sample_hyperposterior(std::shared_ptr<const TrainingSet> training,
                                           const BoxPrior& prior,
                                           const HyperposteriorOptions& opts) {
  require(training != nullptr, "sample_hyperposterior: null training set");
  require(prior.dim() == training->input_dim() + 1, "sample_hyperposterior: prior dimension");
  const LogProb lml = [&](const VectorRef& packed) {
    if ((packed.array() <= 0.0).any()) return kNegInf;
    try {
      return log_marginal_likelihood(*training, HyperParams::from_vector(packed), opts.jitter);
    } catch (const IllConditionedKernel&) {
      return kNegInf;
    }
  };
  SamplerOptions so;
  so.n_walkers = opts.n_walkers;
  so.n_steps = opts.n_steps;
  so.seed = opts.seed;
  so.threads = opts.threads;
  const SamplerResult res = run_sampler(lml, prior, so);

  std::vector<std::optional<GpFit>> fits(res.samples.rows());
  std::vector<Index> good;
  for (Index j = 0; j < res.samples.rows(); ++j) {
    const HyperParams psi = HyperParams::from_vector(res.samples.row(j).transpose());
    if (!psi.valid()) continue;
    try {
      fits[j] = fit_single(training, psi, opts.jitter);
      good.push_back(j);
    } catch (const IllConditionedKernel&) {
    }
  }
  if (good.empty()) throw NumericalError("sample_hyperposterior: no hyperparameter sample could be fitted");

  std::mt19937_64 rng(mix_seed(opts.seed, 0x68797065));
  std::vector<GpFit> out;
  out.reserve(fits.size());
  Index replaced = 0;
  for (auto& f : fits) {
    if (f) {
      out.push_back(*f);
    } else {
      out.push_back(*fits[good[draw_index(rng, static_cast<Index>(good.size()))]]);
      ++replaced;
    }
  }
  if (replaced > 0)
    spdlog::info("hyperposterior: replaced {} unfittable samples by duplicates", replaced);
  return {GpEnsemble(std::move(training), std::move(out)), res.acceptance_rate, replaced};
}

}  // namespace adgp
