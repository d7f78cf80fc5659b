#pragma once

// The adaptive design loop: sample the hyperposterior on the current training
// set, maximize the expected improvement in fit, stop or evaluate the forward
// model at the maximizer and repeat.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "adgp/acquisition.hpp"
#include "adgp/designs.hpp"
#include "adgp/mcmc.hpp"
#include "adgp/models.hpp"

namespace adgp {

enum class StartDesign { grid, sobol };

StartDesign parse_start_design(const std::string& s);
std::string to_string(StartDesign s);

struct AdaptiveConfig {
  /// Explicit initial inputs (row per point). When empty, a Latin hypercube
  /// of `initial_lhs_points` is drawn from the run seed.
  Matrix initial_design;
  Index initial_lhs_points = 0;

  DesignBox bounds;
  double eps_thresh = 0.01;
  /// Maximum number of points added after the initial design.
  Index n_max = 20;

  BoxPrior hyper_prior;
  Index hyper_walkers = 200;
  Index hyper_steps = 400;
  JitterPolicy jitter;

  StartDesign starts = StartDesign::sobol;
  Index n_starts = 50;
  /// Extra Sobol starts tried before accepting a below-threshold stop
  /// (continuing the same sequence); 0 disables the second search.
  Index confirm_starts = 0;
  double eta = 1e-4;
  BoxOptOptions optimizer;

  /// Inputs closer than this (max-norm) to a training input count as duplicates.
  double duplicate_tol = 1e-12;
  int threads = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Termination {
  threshold,         // I(theta_k) < eps * g_min
  zero_improvement,  // every local optimum returned I = 0
  budget,            // n_max points added
  duplicate,         // maximizer coincides with a training input
  model_failure,     // forward model threw at the selected point
  surrogate_failure  // hyperposterior sampling or fitting failed
};

std::string to_string(Termination t);

struct IterationRecord {
  Index k = 0;
  Index n_train = 0;  // training-set size the surrogate was built on
  double g_min = 0.0;
  Vector theta;       // maximizer of I
  double improvement = 0.0;
  bool escalated = false;  // the confirm search ran
  bool degraded = false;   // every multistart failed its line search
  bool added = false;
  Vector psi_mean;
  Vector psi_sd;
  double hyper_acceptance = 0.0;
  Index hyper_replaced = 0;
  double wall_seconds = 0.0;

  double relative_improvement() const { return g_min > 0.0 ? improvement / g_min : 0.0; }
};

struct RunRecord {
  static constexpr int kSchemaVersion = 1;

  std::string model;
  std::uint64_t seed = 0;
  double eps_thresh = 0.0;
  Index n_max = 0;
  Index initial_points = 0;
  std::vector<IterationRecord> iterations;
  Termination termination = Termination::budget;
  std::string message;
  Matrix final_inputs;
  Matrix final_outputs;
  long model_evaluations = 0;

  Index points_added() const;
  double final_g_min() const;
  double final_relative_improvement() const;
  bool threshold_met() const;
};

/// Structured record; wall times are left out unless asked for, so that the
/// same configuration and seed give byte-identical output.
nlohmann::json to_json(const RunRecord& record, bool include_timing = false);

/// Checks the recorded run: g_min never increases, no training input occurs
/// twice, a threshold stop is below threshold, and the budget holds.
/// Returns an empty string when every check passes.
std::string check_run_invariants(const RunRecord& record);

struct AdaptiveResult {
  std::shared_ptr<const TrainingSet> training;
  /// Hyperposterior ensemble fitted on `training`; null when the very first
  /// surrogate could not be built.
  std::shared_ptr<const GpEnsemble> ensemble;
  RunRecord record;
};

AdaptiveResult run_adaptive(const ForwardModel& model, const MeasurementModel& meas,
                            const AdaptiveConfig& cfg);

/// Multistart locations for a box: equidistant per axis (1-D only) or Sobol.
Matrix start_points(StartDesign kind, Index n, const DesignBox& box, Index skip = 0);

/// Evaluates the model at each row of `inputs`.
TrainingSet evaluate_design(const ForwardModel& model, const Matrix& inputs);

/// Writes inputs and outputs as CSV with header x1..xp,y1..yq.
void write_training_csv(std::ostream& os, const Matrix& inputs, const Matrix& outputs);

}  // namespace adgp
