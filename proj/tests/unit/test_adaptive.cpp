#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include "adgp/adaptive.hpp"
#include "adgp/likelihood.hpp"

using namespace adgp;

namespace {

MeasurementModel rational_data() {
  RationalModel m;
  return generate_measurements(m, Vector::Constant(1, 2.41), Vector::Constant(1, 1e-4), 1);
}

AdaptiveConfig rational_config(std::uint64_t seed) {
  AdaptiveConfig c;
  c.initial_design = Matrix(3, 1);
  c.initial_design << -4.0, 0.0, 4.0;
  c.bounds = DesignBox(Vector::Constant(1, -6.0), Vector::Constant(1, 6.0));
  c.hyper_prior = BoxPrior(Vector::Constant(2, 1e-8), (Vector(2) << 12.0, 5.0).finished());
  c.hyper_walkers = 60;
  c.hyper_steps = 150;
  c.starts = StartDesign::grid;
  c.n_starts = 25;
  c.seed = seed;
  return c;
}

/// Rational model that fails after a fixed number of evaluations.
class FailingModel final : public ForwardModel {
 public:
  FailingModel(long good_calls, bool throw_error) : good_(good_calls), throw_(throw_error) {}
  std::string name() const override { return "failing"; }
  Index input_dim() const override { return 1; }
  Index output_dim() const override { return 1; }
  Vector evaluate(const VectorRef& theta) const override {
    if (calls_++ < good_) return inner_.evaluate(theta);
    if (throw_) throw std::runtime_error("solver diverged");
    return Vector::Constant(1, std::numeric_limits<double>::quiet_NaN());
  }

 private:
  RationalModel inner_;
  long good_;
  bool throw_;
  mutable std::atomic<long> calls_{0};
};

}  // namespace

TEST_CASE("adaptive: 1-D run stops below threshold and satisfies the run invariants") {
  RationalModel model;
  const AdaptiveResult res = run_adaptive(model, rational_data(), rational_config(1));
  const RunRecord& r = res.record;
  CHECK(check_run_invariants(r).empty());
  CHECK(r.threshold_met());
  CHECK(r.final_inputs.rows() >= 8);
  CHECK(r.final_inputs.rows() <= 16);
  CHECK(r.model_evaluations == r.final_inputs.rows());
  REQUIRE(res.ensemble);
  CHECK(res.ensemble->training().size() == r.final_inputs.rows());
  // The best training point ends near a minimizer of the true misfit.
  CHECK(r.final_g_min() < 5.0);

  for (std::size_t i = 0; i < r.iterations.size(); ++i) {
    const IterationRecord& it = r.iterations[i];
    CHECK(it.n_train == r.initial_points + static_cast<Index>(i));
    if (it.added) CHECK(it.improvement >= r.eps_thresh * it.g_min);
    CHECK(model.input_dim() == it.theta.size());
    CHECK(it.theta(0) >= -6.0);
    CHECK(it.theta(0) <= 6.0);
  }
  CHECK_FALSE(r.iterations.back().added);
  CHECK(r.iterations.back().improvement < r.eps_thresh * r.iterations.back().g_min);
}

TEST_CASE("adaptive: same seed gives a byte-identical record") {
  RationalModel model;
  const auto meas = rational_data();
  AdaptiveConfig cfg = rational_config(5);
  cfg.n_max = 4;
  const std::string a = to_json(run_adaptive(model, meas, cfg).record).dump();
  const std::string b = to_json(run_adaptive(model, meas, cfg).record).dump();
  CHECK(a == b);
  cfg.threads = 3;
  CHECK(to_json(run_adaptive(model, meas, cfg).record).dump() == a);
}

TEST_CASE("adaptive: Latin hypercube start is drawn from the run seed") {
  RationalModel model;
  const auto meas = rational_data();
  AdaptiveConfig cfg = rational_config(2);
  cfg.initial_design.resize(0, 0);
  cfg.initial_lhs_points = 4;
  cfg.n_max = 1;
  const RunRecord a = run_adaptive(model, meas, cfg).record;
  const RunRecord b = run_adaptive(model, meas, cfg).record;
  CHECK(a.initial_points == 4);
  CHECK(a.final_inputs.topRows(4) == b.final_inputs.topRows(4));
  cfg.seed = 3;
  CHECK(run_adaptive(model, meas, cfg).record.final_inputs.topRows(4) != a.final_inputs.topRows(4));
}

TEST_CASE("adaptive: budget stop after n_max points") {
  RationalModel model;
  AdaptiveConfig cfg = rational_config(1);
  cfg.n_max = 2;
  const RunRecord r = run_adaptive(model, rational_data(), cfg).record;
  CHECK(r.termination == Termination::budget);
  CHECK(r.points_added() == 2);
  CHECK(r.final_inputs.rows() == 5);
  CHECK(r.iterations.size() == 3);
  CHECK_FALSE(r.threshold_met());
  CHECK(check_run_invariants(r).empty());
}

TEST_CASE("adaptive: a maximizer on an existing input stops the run") {
  RationalModel model;
  AdaptiveConfig cfg = rational_config(1);
  cfg.duplicate_tol = 2.5;  // every point of [-6, 6] is this close to -4, 0 or 4
  const RunRecord r = run_adaptive(model, rational_data(), cfg).record;
  CHECK(r.termination == Termination::duplicate);
  CHECK(r.points_added() == 0);
  CHECK(check_run_invariants(r).empty());
}

TEST_CASE("adaptive: a throwing model ends the run with model_failure") {
  FailingModel model(4, true);
  const AdaptiveResult res = run_adaptive(model, rational_data(), rational_config(1));
  const RunRecord& r = res.record;
  CHECK(r.termination == Termination::model_failure);
  CHECK(r.message.find("solver diverged") != std::string::npos);
  CHECK(r.points_added() == 1);
  CHECK(r.model_evaluations == 5);
  CHECK(check_run_invariants(r).empty());
  REQUIRE(res.ensemble);
  CHECK(res.ensemble->training().size() == 4);
}

TEST_CASE("adaptive: a non-finite model output ends the run with model_failure") {
  FailingModel model(3, false);
  const AdaptiveResult res = run_adaptive(model, rational_data(), rational_config(1));
  CHECK(res.record.termination == Termination::model_failure);
  CHECK(res.record.points_added() == 0);
  CHECK(res.training->size() == 3);
}

TEST_CASE("adaptive: invalid configurations are rejected") {
  RationalModel model;
  const auto meas = rational_data();
  AdaptiveConfig cfg = rational_config(1);
  cfg.eps_thresh = 0.0;
  CHECK_THROWS_AS(run_adaptive(model, meas, cfg), ContractError);
  cfg = rational_config(1);
  cfg.n_max = 0;
  CHECK_THROWS_AS(run_adaptive(model, meas, cfg), ContractError);
  cfg = rational_config(1);
  cfg.initial_design(1, 0) = 7.0;  // outside the box
  CHECK_THROWS_AS(run_adaptive(model, meas, cfg), ContractError);
  cfg = rational_config(1);
  cfg.initial_design(1, 0) = 4.0;  // repeated input
  CHECK_THROWS_AS(run_adaptive(model, meas, cfg), ContractError);
}

TEST_CASE("run invariants: violations are reported") {
  RunRecord r;
  r.eps_thresh = 0.01;
  r.n_max = 5;
  r.initial_points = 2;
  r.final_inputs = Matrix(2, 1);
  r.final_inputs << 0.0, 1.0;
  r.final_outputs = Matrix::Zero(2, 1);
  r.model_evaluations = 2;
  r.termination = Termination::threshold;
  IterationRecord it;
  it.g_min = 1.0;
  it.improvement = 0.001;
  r.iterations = {it};
  CHECK(check_run_invariants(r).empty());

  RunRecord bad = r;
  bad.iterations[0].improvement = 0.5;
  CHECK(check_run_invariants(bad).find("threshold") != std::string::npos);

  bad = r;
  IterationRecord worse = it;
  worse.g_min = 2.0;
  bad.iterations.push_back(worse);
  CHECK(check_run_invariants(bad).find("g_min") != std::string::npos);

  bad = r;
  bad.final_inputs(1, 0) = 0.0;
  CHECK(check_run_invariants(bad).find("coincide") != std::string::npos);

  bad = r;
  bad.model_evaluations = 3;
  CHECK_FALSE(check_run_invariants(bad).empty());
}

TEST_CASE("run record: JSON schema and optional timing") {
  RationalModel model;
  AdaptiveConfig cfg = rational_config(1);
  cfg.n_max = 1;
  const RunRecord r = run_adaptive(model, rational_data(), cfg).record;
  const auto j = to_json(r);
  CHECK(j["schema"] == "adgp.run_record");
  CHECK(j["version"] == RunRecord::kSchemaVersion);
  CHECK(j["termination"] == "budget");
  CHECK(j["iterations"].size() == r.iterations.size());
  CHECK_FALSE(j["iterations"][0].contains("wall_seconds"));
  CHECK(to_json(r, true)["iterations"][0].contains("wall_seconds"));
  CHECK(j["final_inputs"].size() == 4);
}

TEST_CASE("start points: grid is 1-D only; Sobol continues a sequence") {
  const DesignBox box2(Vector::Zero(2), Vector::Ones(2));
  CHECK_THROWS_AS(start_points(StartDesign::grid, 5, box2), CapabilityError);
  const Matrix all = start_points(StartDesign::sobol, 8, box2);
  CHECK(start_points(StartDesign::sobol, 4, box2, 4) == all.bottomRows(4));
  const DesignBox box1(Vector::Constant(1, -6.0), Vector::Constant(1, 6.0));
  const Matrix g = start_points(StartDesign::grid, 25, box1);
  CHECK(g(0, 0) == -6.0);
  CHECK(g(24, 0) == 6.0);
  CHECK(parse_start_design("sobol") == StartDesign::sobol);
  CHECK_THROWS(parse_start_design("random"));
}

TEST_CASE("training CSV layout") {
  Matrix x(2, 2), y(2, 1);
  x << 0.5, 1.0, 2.0, 3.0;
  y << -1.0, 4.5;
  std::ostringstream os;
  write_training_csv(os, x, y);
  CHECK(os.str() == "x1,x2,y1\n0.5,1,-1\n2,3,4.5\n");
}
