#pragma once

// Experiment configuration (INI files with one section per stage), model and
// data construction, and run-directory bookkeeping.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adgp/adaptive.hpp"
#include "adgp/posterior.hpp"

namespace adgp {

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSettings {
  std::string kind;  // rational_1d | heat_source_2d | darcy_2d
  Index nx = 32;
  double dt = 0.01;
  Index fine_nx = 128;
  double fine_dt = 0.0025;
  SensorLayout layout = SensorLayout::interior;
  bool normalized_sources = true;
};

struct DataSettings {
  Vector theta_true;
  double noise_sd = 0.01;
  std::uint64_t seed = 1;
};

struct PosteriorSettings {
  PosteriorOptions options;
  double alpha = 0.05;
};

struct ExperimentConfig {
  std::string name;
  std::filesystem::path source;  // file the configuration was read from
  ModelSettings model;
  DataSettings data;
  AdaptiveConfig adaptive;
  PosteriorSettings posterior;
  /// Optional published reference for g*_min.
  std::optional<double> reference_g_star;
};

ExperimentConfig load_config(const std::filesystem::path& path);

std::shared_ptr<const ForwardModel> make_model(const ModelSettings& s);

/// Synthetic data from the fine discretization of `model` at theta_true.
MeasurementModel make_measurements(const ExperimentConfig& cfg, const ForwardModel& model);

/// Comma-separated numbers; rows of a matrix are separated by ';'.
Vector parse_vector(const std::string& text);
Matrix parse_matrix(const std::string& text);

struct MisfitMinimum {
  Vector theta;
  double g = 0.0;
};

/// Minimizes the true misfit over the box from each start with the box
/// optimizer on central-difference gradients; returns the best result.
MisfitMinimum minimize_true_misfit(const ForwardModel& model, const MeasurementModel& meas,
                                   const DesignBox& box, const Matrix& starts, double h = 1e-6);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& file);

/// Collects the files written into a run directory and writes manifest.json
/// listing name, size and hash for each.
class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path dir);
  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path file(const std::string& name) const { return dir_ / name; }
  /// Registers a file written under the directory. Non-deterministic files
  /// (timings) are flagged so reruns can be compared on the rest.
  void add(const std::string& name, bool deterministic = true);
  void write_text(const std::string& name, const std::string& content, bool deterministic = true);
  void write_manifest(const std::string& status, bool partial) const;

 private:
  struct Entry {
    std::string name;
    bool deterministic;
  };
  std::filesystem::path dir_;
  std::vector<Entry> entries_;
};

/// Numeric CSV with one header line.
Matrix read_csv_matrix(const std::filesystem::path& file);

/// Writes record.json, design.csv, hyperposterior.csv, history.csv and
/// timings.csv for a finished adaptive run.
void save_adaptive_run(RunDirectory& dir, const AdaptiveResult& result);

/// Rebuilds the final surrogate of a saved run from design.csv and
/// hyperposterior.csv without evaluating the forward model.
std::shared_ptr<const GpEnsemble> load_surrogate(const std::filesystem::path& run_dir,
                                                 Index input_dim);

/// Hyperposterior surrogate on a fixed design, with the sampler settings of
/// `cfg` (used for the non-adaptive comparison designs).
std::shared_ptr<const GpEnsemble> fit_fixed_design(const ForwardModel& model, const Matrix& inputs,
                                                   const AdaptiveConfig& cfg, std::uint64_t seed);

}  // namespace adgp
