#include "adgp/adaptive.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <ostream>

#include <spdlog/spdlog.h>

namespace adgp {

StartDesign parse_start_design(const std::string& s) {
  if (s == "grid") return StartDesign::grid;
  if (s == "sobol") return StartDesign::sobol;
  throw ContractError("unknown start design '" + s + "' (expected grid|sobol)");
}

std::string to_string(StartDesign s) { return s == StartDesign::grid ? "grid" : "sobol"; }

std::string to_string(Termination t) {
  switch (t) {
    case Termination::threshold: return "threshold";
    case Termination::zero_improvement: return "zero_improvement";
    case Termination::budget: return "budget";
    case Termination::duplicate: return "duplicate";
    case Termination::model_failure: return "model_failure";
    case Termination::surrogate_failure: return "surrogate_failure";
  }
  return "unknown";
}

void AdaptiveConfig::validate() const {
  require(bounds.dim() > 0, "AdaptiveConfig: search box is not set");
  require(eps_thresh > 0.0, "AdaptiveConfig: eps_thresh must be positive");
  require(n_max >= 1, "AdaptiveConfig: n_max must be at least 1");
  require(initial_design.rows() > 0 || initial_lhs_points > 0,
          "AdaptiveConfig: empty initial design");
  require(initial_design.rows() == 0 || initial_design.cols() == bounds.dim(),
          "AdaptiveConfig: initial design dimension");
  require(hyper_prior.dim() == bounds.dim() + 1, "AdaptiveConfig: hyperparameter prior dimension");
  require(n_starts >= 1 && confirm_starts >= 0, "AdaptiveConfig: start counts");
  require(eta > 0.0, "AdaptiveConfig: eta must be positive");
  require(duplicate_tol >= 0.0, "AdaptiveConfig: duplicate tolerance");
}

Index RunRecord::points_added() const {
  return std::count_if(iterations.begin(), iterations.end(),
                       [](const IterationRecord& it) { return it.added; });
}

double RunRecord::final_g_min() const {
  return iterations.empty() ? 0.0 : iterations.back().g_min;
}

double RunRecord::final_relative_improvement() const {
  return iterations.empty() ? 0.0 : iterations.back().relative_improvement();
}

bool RunRecord::threshold_met() const {
  return termination == Termination::threshold || termination == Termination::zero_improvement;
}

namespace {

std::vector<double> as_list(const VectorRef& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::vector<double>> as_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(as_list(m.row(i).transpose()));
  return rows;
}

double min_distance(const Matrix& points, const VectorRef& theta) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < points.rows(); ++i)
    best = std::min(best, (points.row(i).transpose() - theta).cwiseAbs().maxCoeff());
  return best;
}

}  // namespace

nlohmann::json to_json(const RunRecord& r, bool include_timing) {
  nlohmann::json j;
  j["schema"] = "adgp.run_record";
  j["version"] = RunRecord::kSchemaVersion;
  j["model"] = r.model;
  j["seed"] = r.seed;
  j["eps_thresh"] = r.eps_thresh;
  j["n_max"] = r.n_max;
  j["initial_points"] = r.initial_points;
  j["points_added"] = r.points_added();
  j["model_evaluations"] = r.model_evaluations;
  j["termination"] = to_string(r.termination);
  j["message"] = r.message;
  j["final_g_min"] = r.final_g_min();
  j["final_relative_improvement"] = r.final_relative_improvement();
  j["threshold_met"] = r.threshold_met();
  j["iterations"] = nlohmann::json::array();
  for (const auto& it : r.iterations) {
    nlohmann::json e{{"k", it.k},
                     {"n_train", it.n_train},
                     {"g_min", it.g_min},
                     {"theta", as_list(it.theta)},
                     {"improvement", it.improvement},
                     {"relative_improvement", it.relative_improvement()},
                     {"escalated", it.escalated},
                     {"degraded", it.degraded},
                     {"added", it.added},
                     {"psi_mean", as_list(it.psi_mean)},
                     {"psi_sd", as_list(it.psi_sd)},
                     {"hyper_acceptance", it.hyper_acceptance},
                     {"hyper_replaced", it.hyper_replaced}};
    if (include_timing) e["wall_seconds"] = it.wall_seconds;
    j["iterations"].push_back(std::move(e));
  }
  j["final_inputs"] = as_rows(r.final_inputs);
  j["final_outputs"] = as_rows(r.final_outputs);
  return j;
}

std::string check_run_invariants(const RunRecord& r) {
  for (std::size_t i = 1; i < r.iterations.size(); ++i)
    if (r.iterations[i].g_min > r.iterations[i - 1].g_min)
      return "g_min increased at iteration " + std::to_string(r.iterations[i].k);
  for (Index i = 0; i < r.final_inputs.rows(); ++i)
    for (Index j = i + 1; j < r.final_inputs.rows(); ++j)
      if ((r.final_inputs.row(i) - r.final_inputs.row(j)).cwiseAbs().maxCoeff() == 0.0)
        return "training inputs " + std::to_string(i) + " and " + std::to_string(j) + " coincide";
  if (r.termination == Termination::threshold && !r.iterations.empty()) {
    const auto& last = r.iterations.back();
    if (!(last.improvement < r.eps_thresh * last.g_min)) return "threshold stop above threshold";
  }
  if (r.points_added() > r.n_max) return "more points added than n_max";
  if (r.model_evaluations != r.initial_points + r.points_added() &&
      r.termination != Termination::model_failure)
    return "evaluation count does not match the design";
  if (r.final_inputs.rows() != r.initial_points + r.points_added())
    return "final design size does not match the record";
  return {};
}

Matrix start_points(StartDesign kind, Index n, const DesignBox& box, Index skip) {
  if (kind == StartDesign::grid) {
    if (box.dim() != 1) throw CapabilityError("grid starts are only available in one dimension");
    return uniform_grid_1d(n, box);
  }
  return sobol(n, box, skip);
}

TrainingSet evaluate_design(const ForwardModel& model, const Matrix& inputs) {
  require(inputs.cols() == model.input_dim(), "evaluate_design: input dimension");
  Matrix out(inputs.rows(), model.output_dim());
  for (Index i = 0; i < inputs.rows(); ++i) {
    const Vector y = model.evaluate(inputs.row(i).transpose());
    if (!y.allFinite()) throw NumericalError("evaluate_design: non-finite model output");
    out.row(i) = y.transpose();
  }
  return TrainingSet(inputs, out);
}

void write_training_csv(std::ostream& os, const Matrix& inputs, const Matrix& outputs) {
  require(inputs.rows() == outputs.rows(), "write_training_csv: row mismatch");
  for (Index i = 0; i < inputs.cols(); ++i) os << (i ? "," : "") << 'x' << i + 1;
  for (Index i = 0; i < outputs.cols(); ++i) os << ",y" << i + 1;
  os << '\n';
  os.precision(17);
  for (Index r = 0; r < inputs.rows(); ++r) {
    for (Index i = 0; i < inputs.cols(); ++i) os << (i ? "," : "") << inputs(r, i);
    for (Index i = 0; i < outputs.cols(); ++i) os << ',' << outputs(r, i);
    os << '\n';
  }
}

AdaptiveResult run_adaptive(const ForwardModel& model, const MeasurementModel& meas,
                            const AdaptiveConfig& cfg) {
  cfg.validate();
  require(model.input_dim() == cfg.bounds.dim(), "run_adaptive: model and box dimensions differ");
  require(model.output_dim() == meas.size(), "run_adaptive: model and data dimensions differ");

  const Matrix initial = cfg.initial_design.rows() > 0
                             ? cfg.initial_design
                             : latin_hypercube(cfg.initial_lhs_points, cfg.bounds, mix_seed(cfg.seed, 0));
  for (Index i = 0; i < initial.rows(); ++i) {
    require(cfg.bounds.contains(initial.row(i).transpose()), "run_adaptive: initial point outside the box");
    require(min_distance(initial.topRows(i), initial.row(i).transpose()) > cfg.duplicate_tol,
            "run_adaptive: duplicate initial point");
  }

  AdaptiveResult result;
  RunRecord& rec = result.record;
  rec.model = model.name();
  rec.seed = cfg.seed;
  rec.eps_thresh = cfg.eps_thresh;
  rec.n_max = cfg.n_max;
  rec.initial_points = initial.rows();

  auto training = std::make_shared<const TrainingSet>(evaluate_design(model, initial));
  rec.model_evaluations = initial.rows();

  const Matrix starts = start_points(cfg.starts, cfg.n_starts, cfg.bounds);
  const Matrix confirm = cfg.confirm_starts > 0
                             ? sobol(cfg.confirm_starts, cfg.bounds,
                                     cfg.starts == StartDesign::sobol ? cfg.n_starts : 0)
                             : Matrix();
  AcquisitionOptions acq;
  acq.optimizer = cfg.optimizer;
  acq.threads = cfg.threads;

  for (Index k = 1;; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    IterationRecord it;
    it.k = k;
    it.n_train = training->size();
    it.g_min = training_g_min(*training, meas);
    const auto finish = [&](Termination t, std::string msg) {
      it.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.iterations.push_back(it);
      rec.termination = t;
      rec.message = std::move(msg);
    };

    HyperposteriorOptions hopts;
    hopts.n_walkers = cfg.hyper_walkers;
    hopts.n_steps = cfg.hyper_steps;
    hopts.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(k));
    hopts.threads = cfg.threads;
    hopts.jitter = cfg.jitter;
    std::shared_ptr<const GpEnsemble> ensemble;
    try {
      HyperposteriorResult hp = sample_hyperposterior(training, cfg.hyper_prior, hopts);
      const Matrix psi = hp.ensemble.hyperparameter_matrix();
      it.psi_mean = psi.colwise().mean().transpose();
      it.psi_sd = ((psi.rowwise() - it.psi_mean.transpose()).array().square().colwise().sum() /
                   static_cast<double>(psi.rows()))
                      .sqrt()
                      .transpose();
      it.hyper_acceptance = hp.acceptance_rate;
      it.hyper_replaced = hp.replaced_fits;
      ensemble = std::make_shared<const GpEnsemble>(std::move(hp.ensemble));
    } catch (const NumericalError& e) {
      spdlog::error("iteration {}: surrogate construction failed: {}", k, e.what());
      result.ensemble = nullptr;
      finish(Termination::surrogate_failure, e.what());
      break;
    }
    result.ensemble = ensemble;

    const AcquisitionState state = AcquisitionState::make(ensemble, meas, cfg.bounds, cfg.eta);
    AcquisitionResult best = maximize_acquisition(state, starts, acq);
    const double thr = cfg.eps_thresh * it.g_min;
    if (best.value < thr && confirm.rows() > 0) {
      it.escalated = true;
      AcquisitionResult second = maximize_acquisition(state, confirm, acq);
      if (second.value > best.value) best = std::move(second);
    }
    it.theta = best.theta_star;
    it.improvement = best.value;
    it.degraded = best.degraded;
    spdlog::info("iteration {}: n_train={} g_min={:.6g} I={:.6g} (relative {:.4g})", k, it.n_train,
                 it.g_min, it.improvement, it.relative_improvement());

    if (best.value < thr) {
      finish(best.value <= 0.0 ? Termination::zero_improvement : Termination::threshold, "");
      break;
    }
    if (rec.points_added() >= cfg.n_max) {
      finish(Termination::budget, "");
      break;
    }
    if (min_distance(training->inputs(), best.theta_star) <= cfg.duplicate_tol) {
      spdlog::warn("iteration {}: maximizer coincides with a training input", k);
      finish(Termination::duplicate, "maximizer coincides with a training input");
      break;
    }

    Vector y;
    try {
      ++rec.model_evaluations;
      y = model.evaluate(best.theta_star);
      if (!y.allFinite()) throw NumericalError("non-finite model output");
    } catch (const std::exception& e) {
      spdlog::error("iteration {}: forward model failed: {}", k, e.what());
      finish(Termination::model_failure, e.what());
      break;
    }
    it.added = true;
    training = std::make_shared<const TrainingSet>(training->augmented(best.theta_star, y));
    it.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.iterations.push_back(it);
  }

  result.training = training;
  rec.final_inputs = training->inputs();
  rec.final_outputs = training->raw_outputs();
  return result;
}

}  // namespace adgp
