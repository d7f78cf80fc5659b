#pragma once

// Benchmark forward models behind one evaluation interface, and synthetic
// data generation. The two PDE models use vertex-centred finite differences
// on the unit square (nodes at i/nx, j/ny; boundary nodes carry half-size
// control volumes), which makes the zero-flux boundary exact and the scheme
// conservative.

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "adgp/common.hpp"
#include "adgp/likelihood.hpp"

namespace adgp {

class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual std::string name() const = 0;
  virtual Index input_dim() const = 0;
  virtual Index output_dim() const = 0;
  virtual Vector evaluate(const VectorRef& theta) const = 0;
  /// PDE models provide a refined discretization for data generation.
  virtual bool has_fine() const { return false; }
  virtual Vector evaluate_fine(const VectorRef& theta) const { return evaluate(theta); }
};

/// Forwards to another model and counts evaluate() calls.
class CountingModel final : public ForwardModel {
 public:
  explicit CountingModel(std::shared_ptr<const ForwardModel> inner) : inner_(std::move(inner)) {}
  std::string name() const override { return inner_->name(); }
  Index input_dim() const override { return inner_->input_dim(); }
  Index output_dim() const override { return inner_->output_dim(); }
  Vector evaluate(const VectorRef& theta) const override {
    ++count_;
    return inner_->evaluate(theta);
  }
  bool has_fine() const override { return inner_->has_fine(); }
  Vector evaluate_fine(const VectorRef& theta) const override {
    return inner_->evaluate_fine(theta);
  }
  long count() const { return count_.load(); }

 private:
  std::shared_ptr<const ForwardModel> inner_;
  mutable std::atomic<long> count_{0};
};

/// f(theta) = (theta^2 - 5 theta + 6) / (theta^2 + 1).
double rational_1d(double theta);

class RationalModel final : public ForwardModel {
 public:
  std::string name() const override { return "rational_1d"; }
  Index input_dim() const override { return 1; }
  Index output_dim() const override { return 1; }
  Vector evaluate(const VectorRef& theta) const override;
};

struct GridSolverConfig {
  Index nx = 32;
  Index ny = 32;
  double dt = 0.01;
  double t_end = 0.2;

  void validate() const;
};

/// Where an m x m sensor array sits in [0,1]^2: `interior` uses i/(m+1),
/// i=1..m; `boundary` uses i/(m-1), i=0..m-1 (corners included).
enum class SensorLayout { interior, boundary };

SensorLayout parse_sensor_layout(const std::string& s);
std::vector<double> sensor_coordinates(Index m, SensorLayout layout);

/// Node bookkeeping shared by the PDE solvers.
class VertexGrid {
 public:
  VertexGrid(Index nx, Index ny);
  Index nx() const { return nx_; }
  Index ny() const { return ny_; }
  Index node_count() const { return (nx_ + 1) * (ny_ + 1); }
  Index node(Index i, Index j) const { return i + (nx_ + 1) * j; }
  double x(Index i) const { return static_cast<double>(i) / static_cast<double>(nx_); }
  double y(Index j) const { return static_cast<double>(j) / static_cast<double>(ny_); }
  /// Control-volume areas (trapezoidal quadrature weights).
  const Vector& areas() const { return areas_; }
  double integrate(const VectorRef& field) const { return areas_.dot(field); }
  /// Bilinear interpolation of a nodal field.
  double interpolate(const VectorRef& field, double px, double py) const;
  /// Conductance of the edge between neighbouring nodes (face length / spacing).
  double edge_weight_x(Index j) const;
  double edge_weight_y(Index i) const;

 private:
  Index nx_, ny_;
  Vector areas_;
};

/// Header "nx ny" with the number of points per side, then row-major values
/// (x fastest, one row of the grid per line).
void write_grid_field(std::ostream& os, const VertexGrid& grid, const VectorRef& field);

/// Source amplitude a, width h and switch-off time tau.
struct HeatSource {
  double amplitude = 2.0;
  double width = 0.05;
  double duration = 0.1;
};

/// Transient diffusion with a Gaussian source switched off at tau:
///   u_t - lap(u) = a/(2 pi h^2) exp(-|x - theta|^2 / 2h^2) on 0 <= t <= tau,
/// zero-flux boundary, u(.,0) = 0. Backward Euler with lumped mass; the system
/// matrix does not depend on theta and is factorized once.
class HeatSolver {
 public:
  using Source = HeatSource;

  explicit HeatSolver(GridSolverConfig cfg, Source src = HeatSource());

  const VertexGrid& grid() const { return grid_; }
  const GridSolverConfig& config() const { return cfg_; }
  Vector source(const VectorRef& theta) const;
  /// Nodal fields at each requested time (multiples of dt, ascending).
  std::vector<Vector> solve(const VectorRef& theta, const std::vector<double>& times) const;

 private:
  GridSolverConfig cfg_;
  Source src_;
  VertexGrid grid_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
};

/// Source-location inversion: theta in [0,1]^2 -> 9 sensors x 2 times.
/// Output index = time_index * 9 + sensor_row * 3 + sensor_col (x fastest).
class HeatSourceModel final : public ForwardModel {
 public:
  HeatSourceModel(GridSolverConfig coarse, GridSolverConfig fine,
                  SensorLayout layout = SensorLayout::interior);
  std::string name() const override { return "heat_source_2d"; }
  Index input_dim() const override { return 2; }
  Index output_dim() const override { return 18; }
  Vector evaluate(const VectorRef& theta) const override;
  bool has_fine() const override { return true; }
  Vector evaluate_fine(const VectorRef& theta) const override;

  const HeatSolver& coarse_solver() const { return *coarse_; }
  static inline const std::vector<double> kMeasurementTimes{0.1, 0.2};

 private:
  Vector sample(const HeatSolver& solver, const VectorRef& theta) const;
  std::shared_ptr<const HeatSolver> coarse_;
  std::shared_ptr<const HeatSolver> fine_;
  std::vector<double> sensors_;
};

/// Steady Darcy flow -div(kappa grad u) = s with zero-flux boundary and
/// zero-mean u. kappa = sum_i theta_i b_i(x), nine Gaussian bumps of width
/// 0.15; s is a signed mixture of four Gaussians of width 0.05.
class DarcySolver {
 public:
  DarcySolver(Index nx, Index ny, bool normalized_sources = true);

  const VertexGrid& grid() const { return grid_; }
  static Vector permeability_basis(double x, double y);  // 9 values b_i(x, y)
  Vector permeability(const VectorRef& theta) const;     // nodal kappa
  const Vector& source() const { return source_; }
  /// Throws ContractError when kappa <= 0 at some node.
  Vector solve(const VectorRef& theta) const;
  /// Assembled stiffness (without the mean constraint), for structural tests.
  Eigen::SparseMatrix<double> stiffness(const VectorRef& kappa) const;

 private:
  VertexGrid grid_;
  Vector source_;
};

class DarcyModel final : public ForwardModel {
 public:
  DarcyModel(Index coarse_n = 32, Index fine_n = 128, SensorLayout layout = SensorLayout::interior,
             bool normalized_sources = true);
  std::string name() const override { return "darcy_2d"; }
  Index input_dim() const override { return 9; }
  Index output_dim() const override { return 25; }
  Vector evaluate(const VectorRef& theta) const override;
  bool has_fine() const override { return true; }
  Vector evaluate_fine(const VectorRef& theta) const override;

  const DarcySolver& coarse_solver() const { return coarse_; }

 private:
  Vector sample(const DarcySolver& solver, const VectorRef& theta) const;
  DarcySolver coarse_;
  DarcySolver fine_;
  std::vector<double> sensors_;
};

/// z = f_fine(theta_true) + e, e_i ~ N(0, sigma_i^2), seeded.
MeasurementModel generate_measurements(const ForwardModel& model, const VectorRef& theta_true,
                                       const VectorRef& noise_vars, std::uint64_t seed);

}  // namespace adgp
