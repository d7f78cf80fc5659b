#include <doctest.h>

#include <cmath>
#include <limits>

#include "adgp/acquisition.hpp"
#include "adgp/models.hpp"
#include "helpers.hpp"

using namespace adgp;
using doctest::Approx;

namespace {

/// 1-D rational model state: design, data near theta = 2.41, random psi ensemble.
AcquisitionState rational_state(std::mt19937_64& rng, const Vector& design, Index n_psi) {
  Matrix x = design;
  Matrix y(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) y(i, 0) = rational_1d(x(i, 0));
  auto ts = std::make_shared<const TrainingSet>(x, y);
  Matrix packed(n_psi, 2);
  for (Index j = 0; j < n_psi; ++j) packed.row(j) << 0.5 + 2.5 * uniform01(rng), 0.5 + 2.5 * uniform01(rng);
  auto ens = std::make_shared<const GpEnsemble>(ensemble_from_samples(ts, packed));
  const MeasurementModel meas(Vector::Constant(1, rational_1d(2.41) + 0.004), Vector::Constant(1, 1e-4));
  return AcquisitionState::make(ens, meas, DesignBox(Vector::Constant(1, -6.0), Vector::Constant(1, 6.0)));
}

/// Random multi-output state in [0,1]^p.
AcquisitionState random_state(std::mt19937_64& rng, Index n, Index p, Index q, Index n_psi) {
  auto ts = testing::random_training(rng, n, p, q);
  Matrix packed(n_psi, p + 1);
  for (Index j = 0; j < n_psi; ++j) packed.row(j) = testing::random_psi(rng, p).to_vector().transpose();
  auto ens = std::make_shared<const GpEnsemble>(ensemble_from_samples(ts, packed));
  // Data near the output at a random interior point, so improvement regions exist.
  const Vector centre = testing::uniform_vector(rng, p, 0.2, 0.8);
  Vector z = ensemble_predict_vector(*ens, centre)[0].mean;
  const MeasurementModel meas(z, Vector::Constant(q, 0.01));
  return AcquisitionState::make(ens, meas, DesignBox(Vector::Zero(p), Vector::Ones(p)));
}

}  // namespace

TEST_CASE("smoothed_pos: branches") {
  const double eta = 1e-4;
  CHECK(smoothed_pos(-1.0, eta).value == 0.0);
  CHECK(smoothed_pos(-1.0, eta).derivative == 0.0);
  CHECK(smoothed_pos(2.0 * eta, eta).value == Approx(1.5 * eta).epsilon(1e-14));
  CHECK(smoothed_pos(2.0 * eta, eta).derivative == 1.0);
  CHECK(smoothed_pos(0.5 * eta, eta).value == Approx(3.0 * eta / 32.0).epsilon(1e-14));
  CHECK(smoothed_pos(0.5 * eta, eta).derivative == Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(smoothed_pos(1.0, 0.0), ContractError);
}

TEST_CASE("smoothed_pos: sandwich and continuity at the branch points") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 10000; ++t) {
    const double eta = std::pow(10.0, -6.0 + 6.0 * uniform01(rng));
    const double x = (uniform01(rng) * 4.0 - 1.0) * eta;
    const SmoothedPos s = smoothed_pos(x, eta);
    const double pos = std::max(x, 0.0);
    CHECK(s.value <= pos);
    CHECK(pos <= s.value + eta / 2.0 + 4e-16 * std::max(std::abs(x), eta));
  }
  for (double eta : {1e-6, 1e-4, 1.0, 3.0}) {
    const double below = std::nextafter(eta, 0.0);
    CHECK(std::abs(smoothed_pos(below, eta).value - smoothed_pos(eta, eta).value) < 1e-12);
    CHECK(std::abs(smoothed_pos(below, eta).derivative - smoothed_pos(eta, eta).derivative) < 1e-12);
    const double tiny = std::numeric_limits<double>::denorm_min();
    CHECK(std::abs(smoothed_pos(tiny, eta).value) < 1e-12);
    CHECK(std::abs(smoothed_pos(tiny, eta).derivative) < 1e-12);
  }
}

TEST_CASE("expected_improvement: hinge average, bounds and zero at training inputs") {
  // Hand arithmetic: g_min = 10, g = {4, 16} gives (6 + 0) / 2.
  CHECK((std::max(10.0 - 4.0, 0.0) + std::max(10.0 - 16.0, 0.0)) / 2.0 == 3.0);

  std::mt19937_64 rng(3);
  const AcquisitionState st = rational_state(rng, (Vector(3) << -4.0, 0.0, 4.0).finished(), 20);
  CHECK(st.g_min == Approx(training_g_min(st.ensemble->training(), st.meas)));
  // Zero up to the jitter nugget: the predictive variance at a training input
  // is about the jitter, which shrinks the misfit by roughly V_i * jitter / sigma^2.
  for (Index r = 0; r < 3; ++r)
    CHECK(expected_improvement(st.ensemble->training().inputs().row(r).transpose(), st) < 1e-4 * st.g_min);

  for (int t = 0; t < 200; ++t) {
    const Vector th = Vector::Constant(1, -6.0 + 12.0 * uniform01(rng));
    const double ei = expected_improvement(th, st);
    double manual = 0.0;
    for (const auto& c : ensemble_predict_vector(*st.ensemble, th))
      manual += std::max(st.g_min - gp_misfit(c, st.meas), 0.0) / 20.0;
    CHECK(ei == Approx(manual).epsilon(1e-13));
    CHECK(ei >= 0.0);
    CHECK(ei <= st.g_min);
    const double smooth = expected_improvement_smoothed(th, st).value;
    CHECK(smooth <= ei + 1e-12);
    CHECK(ei <= smooth + st.eta / 2.0 + 1e-12);
  }
}

TEST_CASE("grad_gp_misfit: finite differences on random 5-point designs") {
  std::mt19937_64 rng(14);
  for (int inst = 0; inst < 10; ++inst) {
    const Index p = 1 + inst % 3;
    const AcquisitionState st = random_state(rng, 5, p, 2, 1);
    const GpFit& fit = st.ensemble->fits()[0];
    for (int k = 0; k < 100; ++k) {
      const Vector th = testing::uniform_vector(rng, p, 0.0, 1.0);
      const ObjectiveValue g = grad_gp_misfit(th, fit, st.meas);
      CHECK(g.value == Approx(gp_misfit(rescale(predict(fit, th), fit.training()), st.meas)));
      if (predict(fit, th).variance < 1e-6) continue;
      const Vector fd = testing::central_diff(
          [&](const Vector& u) { return grad_gp_misfit(u, fit, st.meas).value; }, th, 1e-5);
      CHECK(testing::rel_err(g.gradient, fd) < 1e-5);
    }
  }
}

TEST_CASE("expected_improvement_smoothed: gradient matches finite differences") {
  std::mt19937_64 rng(15);
  int checked = 0;
  for (int inst = 0; inst < 5; ++inst) {
    const Index p = 1 + inst % 2;
    const AcquisitionState st = random_state(rng, 6, p, 2, 10);
    for (int k = 0; k < 100; ++k) {
      const Vector th = testing::uniform_vector(rng, p, 0.0, 1.0);
      const ObjectiveValue v = expected_improvement_smoothed(th, st);
      const Vector fd = testing::central_diff(
          [&](const Vector& u) { return expected_improvement_smoothed(u, st).value; }, th, 1e-5);
      CHECK(testing::rel_err(v.gradient, fd, 1e-8) < 1e-4);
      checked += v.gradient.norm() > 0.0;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("maximize_box: concave quadratic with an active bound") {
  const Vector centre = (Vector(3) << 0.3, 1.7, -0.4).finished();
  const Vector w = (Vector(3) << 1.0, 3.0, 0.5).finished();
  const SmoothObjective f = [&](const VectorRef& x) {
    const Vector d = x - centre;
    return ObjectiveValue{-(w.array() * d.array().square()).sum(), (-2.0 * w.array() * d.array()).matrix()};
  };
  const DesignBox box(Vector::Zero(3), Vector::Ones(3));
  const Vector expected = (Vector(3) << 0.3, 1.0, 0.0).finished();
  for (const Vector& x0 : {Vector(Vector::Constant(3, 0.5)), Vector(Vector::Zero(3)), Vector(Vector::Ones(3))}) {
    const BoxOptResult r = maximize_box(f, x0, box);
    CHECK(r.converged());
    CHECK((r.x - expected).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("maximize_box: non-finite objective fails the line search") {
  const SmoothObjective bad = [](const VectorRef& x) {
    return ObjectiveValue{x(0) == 0.5 ? 0.0 : std::numeric_limits<double>::quiet_NaN(), Vector::Ones(1)};
  };
  const BoxOptResult r = maximize_box(bad, Vector::Constant(1, 0.5), DesignBox(Vector::Zero(1), Vector::Ones(1)));
  CHECK(r.status == OptStatus::line_search_failed);
  CHECK(r.x(0) == 0.5);
}

TEST_CASE("maximize_acquisition: multistart on the 1-D problem") {
  std::mt19937_64 rng(21);
  const AcquisitionState st = rational_state(rng, (Vector(3) << -4.0, 0.0, 4.0).finished(), 20);
  const Matrix starts = uniform_grid_1d(25, st.bounds);
  const AcquisitionResult res = maximize_acquisition(st, starts);
  CHECK_FALSE(res.degraded);
  CHECK(res.optima.size() == 25);
  CHECK(st.bounds.contains(res.theta_star));
  CHECK(res.value > 0.0);
  for (const auto& lo : res.optima) {
    CHECK(st.bounds.contains(lo.theta));
    CHECK(lo.value <= res.value);
  }
  CHECK(res.value == Approx(expected_improvement(res.theta_star, st)));
  // Interior optimum: the smoothed gradient vanishes there.
  if (res.theta_star(0) > -6.0 + 1e-6 && res.theta_star(0) < 6.0 - 1e-6)
    CHECK(expected_improvement_smoothed(res.theta_star, st).gradient.norm() < 1e-6 * std::max(1.0, st.g_min));

  AcquisitionOptions par;
  par.threads = 3;
  const AcquisitionResult again = maximize_acquisition(st, starts, par);
  CHECK((again.theta_star.array() == res.theta_star.array()).all());
  CHECK(again.best_start == res.best_start);

  CHECK_THROWS_AS(maximize_acquisition(st, Matrix::Constant(1, 1, 7.0)), ContractError);
}
