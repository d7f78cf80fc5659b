#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "adgp/mcmc.hpp"
#include "helpers.hpp"

using namespace adgp;
using doctest::Approx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Diagonal Gaussian log-density up to a constant.
LogProb diag_gaussian(Vector mean, Vector sd) {
  return [mean, sd](const VectorRef& x) {
    return -0.5 * ((x - mean).array() / sd.array()).square().sum();
  };
}

Vector column_mean(const Matrix& s) { return s.colwise().mean().transpose(); }

Matrix column_cov(const Matrix& s) {
  const Matrix c = s.rowwise() - s.colwise().mean();
  return c.transpose() * c / static_cast<double>(s.rows());
}

}  // namespace

TEST_CASE("stretch variable: inverse-CDF draws follow 1/sqrt(z) on [1/a, a]") {
  const double a = 2.0;
  std::mt19937_64 rng(2024);
  std::vector<double> z(1000000);
  for (auto& v : z) v = draw_stretch(a, uniform01(rng));
  std::sort(z.begin(), z.end());
  CHECK(z.front() >= 1.0 / a);
  CHECK(z.back() <= a);
  const double lo = 1.0 / std::sqrt(a), hi = std::sqrt(a);
  double ks = 0.0;
  const double n = static_cast<double>(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double cdf = (std::sqrt(z[i]) - lo) / (hi - lo);
    ks = std::max({ks, std::abs(cdf - static_cast<double>(i) / n),
                   std::abs(cdf - static_cast<double>(i + 1) / n)});
  }
  CHECK(ks < 0.002);
}

TEST_CASE("run_sampler: standard 2-D Gaussian") {
  // A single 200-walker run meets the tolerances only about half the time
  // (standard error 0.07 on the mean, 0.1 on the variance), so ten
  // independent runs are pooled.
  const BoxPrior prior(Vector::Constant(2, -10.0), Vector::Constant(2, 10.0));
  Matrix pooled(2000, 2);
  double acc = 0.0;
  for (int s = 0; s < 10; ++s) {
    SamplerOptions opts;
    opts.seed = 42 + s;
    const SamplerResult r =
        run_sampler(diag_gaussian(Vector::Zero(2), Vector::Ones(2)), prior, opts);
    REQUIRE(r.samples.rows() == 200);
    pooled.middleRows(200 * s, 200) = r.samples;
    acc += r.acceptance_rate / 10.0;
  }
  CHECK(column_mean(pooled).cwiseAbs().maxCoeff() < 0.1);
  const Matrix c = column_cov(pooled);
  CHECK(std::abs(c(0, 0) - 1.0) < 0.15);
  CHECK(std::abs(c(1, 1) - 1.0) < 0.15);
  CHECK(acc > 0.3);
}

TEST_CASE("run_sampler: sharp 1-D target concentrates") {
  const BoxPrior prior(Vector::Zero(1), Vector::Ones(1));
  SamplerOptions opts;
  opts.seed = 8;
  const SamplerResult r =
      run_sampler(diag_gaussian(Vector::Constant(1, 0.5), Vector::Constant(1, 1e-3)), prior, opts);
  CHECK(((r.samples.array() - 0.5).abs() < 0.01).all());
}

TEST_CASE("run_sampler: determinism, thread invariance and burn-in chain") {
  const BoxPrior prior(Vector::Constant(3, -4.0), Vector::Constant(3, 4.0));
  const LogProb lp = diag_gaussian(Vector::Constant(3, 0.5), Vector::Constant(3, 0.7));
  SamplerOptions opts;
  opts.n_walkers = 20;
  opts.n_steps = 50;
  opts.seed = 99;
  const Matrix a = run_sampler(lp, prior, opts).samples;
  const Matrix b = run_sampler(lp, prior, opts).samples;
  CHECK((a.array() == b.array()).all());
  opts.threads = 4;
  const Matrix c = run_sampler(lp, prior, opts).samples;
  CHECK((a.array() == c.array()).all());
  opts.seed = 100;
  CHECK_FALSE((run_sampler(lp, prior, opts).samples.array() == a.array()).all());

  opts.seed = 99;
  opts.keep_from_step = 25;
  const Matrix chain = run_sampler(lp, prior, opts).samples;
  CHECK(chain.rows() == 25 * 20);
  CHECK((chain.bottomRows(20).array() == a.array()).all());
}

TEST_CASE("run_sampler: contract errors") {
  const BoxPrior prior(Vector::Zero(2), Vector::Ones(2));
  SamplerOptions opts;
  opts.n_walkers = 3;
  CHECK_THROWS_AS(run_sampler([](const VectorRef&) { return 0.0; }, prior, opts), ContractError);
  opts.n_walkers = 10;
  CHECK_THROWS_AS(run_sampler([](const VectorRef&) { return -kInf; }, prior, opts),
                  NumericalError);
  CHECK_THROWS_AS(BoxPrior(Vector::Ones(2), Vector::Zero(2)), ContractError);
}

TEST_CASE("stretch_step: flat target in 1-D accepts every in-box proposal") {
  const BoxPrior prior(Vector::Zero(1), Vector::Ones(1));
  const LogProb flat = [&](const VectorRef& x) { return prior.contains(x) ? 0.0 : -kInf; };
  std::mt19937_64 init(4);
  Matrix start(40, 1);
  for (Index k = 0; k < 40; ++k) start.row(k) = prior.sample(init).transpose();

  std::size_t inside = 0, inside_accepted = 0, outside_accepted = 0;
  StretchOptions so;
  so.observer = [&](const ProposalEvent& ev, const Matrix& pos) {
    const double y = pos(ev.partner, 0) + ev.z * (pos(ev.walker, 0) - pos(ev.partner, 0));
    if (y >= 0.0 && y <= 1.0) {
      ++inside;
      inside_accepted += ev.accepted;
    } else {
      outside_accepted += ev.accepted;
    }
  };
  const SamplerResult r = run_sampler_from(flat, start, 12, 100, so);
  CHECK(inside > 0);
  CHECK(inside_accepted == inside);
  CHECK(outside_accepted == 0);
  CHECK(((r.samples.array() >= 0.0) && (r.samples.array() <= 1.0)).all());
}

TEST_CASE("stretch_step: zero-density and NaN proposals are never accepted") {
  // Density vanishes for x > 0.5 and is NaN for x < -0.5.
  const LogProb lp = [](const VectorRef& x) {
    if (x(0) > 0.5) return -kInf;
    if (x(0) < -0.5) return std::numeric_limits<double>::quiet_NaN();
    return -x.squaredNorm();
  };
  std::mt19937_64 init(6);
  Matrix start(30, 2);
  for (Index k = 0; k < 30; ++k)
    start.row(k) << -0.4 + 0.8 * uniform01(init), uniform01(init) - 0.5;
  const SamplerResult r = run_sampler_from(lp, start, 3, 200);
  CHECK((r.samples.col(0).array() <= 0.5).all());
  CHECK((r.samples.col(0).array() >= -0.5).all());
  CHECK(safe_log_prob(lp, Vector::Constant(2, -1.0)) == -kInf);
}

TEST_CASE("stretch_step: each half only sees the frozen other half") {
  const LogProb lp = diag_gaussian(Vector::Zero(2), Vector::Ones(2));
  WalkerEnsemble ens;
  ens.rng.seed(77);
  ens.positions = Matrix::Random(16, 2);
  ens.log_probs.resize(16);
  for (Index k = 0; k < 16; ++k) ens.log_probs(k) = lp(ens.positions.row(k).transpose());

  Matrix snapshot;
  Index current_half = -1;
  bool frozen = true, complementary = true;
  StretchOptions so;
  so.observer = [&](const ProposalEvent& ev, const Matrix& pos) {
    const Index half = ev.walker < 8 ? 0 : 1;
    if (half != current_half) {
      current_half = half;
      snapshot = pos;
    }
    frozen = frozen && (pos.array() == snapshot.array()).all();
    complementary = complementary && ((ev.partner < 8) != (ev.walker < 8));
  };
  for (int s = 0; s < 20; ++s) {
    current_half = -1;
    stretch_step(ens, lp, so);
  }
  CHECK(frozen);
  CHECK(complementary);
}

TEST_CASE("affine invariance: transformed target and ensemble give the transformed chain") {
  const Vector mean = (Vector(3) << 0.3, -1.0, 2.0).finished();
  const Vector sd = (Vector(3) << 0.5, 2.0, 1.0).finished();
  std::mt19937_64 init(21);
  Matrix start(24, 3);
  for (Index k = 0; k < 24; ++k)
    for (Index i = 0; i < 3; ++i) start(k, i) = mean(i) + sd(i) * (2.0 * uniform01(init) - 1.0);

  // Permutation with power-of-two scales is exact in floating point, so the
  // chains must agree bit for bit.
  const Eigen::Vector3i perm(2, 0, 1);
  const Vector scale = (Vector(3) << 4.0, 0.5, 2.0).finished();
  const auto map = [&](const Matrix& x) {
    Matrix y(x.rows(), 3);
    for (Index i = 0; i < 3; ++i) y.col(perm(i)) = scale(i) * x.col(i);
    return y;
  };
  Vector mean2(3), sd2(3);
  for (Index i = 0; i < 3; ++i) {
    mean2(perm(i)) = scale(i) * mean(i);
    sd2(perm(i)) = scale(i) * sd(i);
  }
  std::vector<bool> d1, d2;
  const SamplerResult a = run_sampler_from(diag_gaussian(mean, sd), start, 5, 60, {}, &d1);
  const SamplerResult b = run_sampler_from(diag_gaussian(mean2, sd2), map(start), 5, 60, {}, &d2);
  CHECK(d1 == d2);
  CHECK((map(a.samples).array() == b.samples.array()).all());

  // General affine map with a full Gaussian target: same decisions, positions
  // agree to rounding.
  Matrix amat(3, 3);
  amat << 1.3, 0.2, -0.4, 0.1, 0.9, 0.3, -0.2, 0.5, 1.1;
  const Vector shift = (Vector(3) << 0.7, -2.0, 0.25).finished();
  const Matrix ainv = amat.inverse();
  const LogProb base = diag_gaussian(mean, sd);
  const LogProb mapped = [&](const VectorRef& y) { return base(ainv * (y - shift)); };
  const Matrix start_mapped = (start * amat.transpose()).rowwise() + shift.transpose();
  std::vector<bool> d3;
  const SamplerResult c = run_sampler_from(mapped, start_mapped, 5, 60, {}, &d3);
  CHECK(d1 == d3);
  const Matrix expect = (a.samples * amat.transpose()).rowwise() + shift.transpose();
  CHECK((expect - c.samples).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sample_hyperposterior: ensemble size, bounds and fits") {
  std::mt19937_64 rng(31);
  auto ts = testing::random_training(rng, 6, 1, 1);
  const BoxPrior prior(Vector::Constant(2, 1e-8), (Vector(2) << 12.0, 5.0).finished());
  HyperposteriorOptions opts;
  opts.n_walkers = 40;
  opts.n_steps = 100;
  opts.seed = 1;
  const HyperposteriorResult r = sample_hyperposterior(ts, prior, opts);
  CHECK(r.ensemble.size() == 40);
  const Matrix psi = r.ensemble.hyperparameter_matrix();
  for (Index j = 0; j < psi.rows(); ++j) CHECK(prior.contains(psi.row(j).transpose()));
  for (const auto& f : r.ensemble.fits()) CHECK(f.training_ptr() == ts);

  const HyperposteriorResult again = sample_hyperposterior(ts, prior, opts);
  CHECK((again.ensemble.hyperparameter_matrix().array() == psi.array()).all());
}
