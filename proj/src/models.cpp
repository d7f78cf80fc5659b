#include "adgp/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include <Eigen/SparseLU>

namespace adgp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

double rational_1d(double theta) {
  return (theta * theta - 5.0 * theta + 6.0) / (theta * theta + 1.0);
}

Vector RationalModel::evaluate(const VectorRef& theta) const {
  require(theta.size() == 1, "rational_1d: expects a scalar input");
  return Vector::Constant(1, rational_1d(theta(0)));
}

void GridSolverConfig::validate() const {
  require(nx >= 8 && ny >= 8, "GridSolverConfig: need at least 8 cells per side");
  require(dt > 0.0 && t_end > 0.0, "GridSolverConfig: dt and t_end must be positive");
}

SensorLayout parse_sensor_layout(const std::string& s) {
  if (s == "interior") return SensorLayout::interior;
  if (s == "boundary") return SensorLayout::boundary;
  throw ContractError("unknown sensor layout '" + s + "' (expected interior|boundary)");
}

std::vector<double> sensor_coordinates(Index m, SensorLayout layout) {
  require(m >= 2, "sensor_coordinates: need at least two sensors per side");
  std::vector<double> c(m);
  for (Index i = 0; i < m; ++i)
    c[i] = layout == SensorLayout::interior
               ? static_cast<double>(i + 1) / static_cast<double>(m + 1)
               : static_cast<double>(i) / static_cast<double>(m - 1);
  return c;
}

VertexGrid::VertexGrid(Index nx, Index ny) : nx_(nx), ny_(ny) {
  require(nx >= 1 && ny >= 1, "VertexGrid: empty grid");
  const double cell = 1.0 / static_cast<double>(nx * ny);
  areas_.resize(node_count());
  for (Index j = 0; j <= ny_; ++j)
    for (Index i = 0; i <= nx_; ++i) {
      const double wx = (i == 0 || i == nx_) ? 0.5 : 1.0;
      const double wy = (j == 0 || j == ny_) ? 0.5 : 1.0;
      areas_(node(i, j)) = wx * wy * cell;
    }
}

double VertexGrid::edge_weight_x(Index j) const {
  const double wy = (j == 0 || j == ny_) ? 0.5 : 1.0;
  return wy * static_cast<double>(nx_) / static_cast<double>(ny_);
}

double VertexGrid::edge_weight_y(Index i) const {
  const double wx = (i == 0 || i == nx_) ? 0.5 : 1.0;
  return wx * static_cast<double>(ny_) / static_cast<double>(nx_);
}

double VertexGrid::interpolate(const VectorRef& field, double px, double py) const {
  require(field.size() == node_count(), "VertexGrid::interpolate: field size");
  const double gx = std::clamp(px, 0.0, 1.0) * static_cast<double>(nx_);
  const double gy = std::clamp(py, 0.0, 1.0) * static_cast<double>(ny_);
  const Index i = std::min<Index>(static_cast<Index>(gx), nx_ - 1);
  const Index j = std::min<Index>(static_cast<Index>(gy), ny_ - 1);
  const double fx = gx - static_cast<double>(i);
  const double fy = gy - static_cast<double>(j);
  return (1 - fx) * (1 - fy) * field(node(i, j)) + fx * (1 - fy) * field(node(i + 1, j)) +
         (1 - fx) * fy * field(node(i, j + 1)) + fx * fy * field(node(i + 1, j + 1));
}

void write_grid_field(std::ostream& os, const VertexGrid& grid, const VectorRef& field) {
  require(field.size() == grid.node_count(), "write_grid_field: field size");
  os << grid.nx() + 1 << ' ' << grid.ny() + 1 << '\n';
  os.precision(17);
  for (Index j = 0; j <= grid.ny(); ++j) {
    for (Index i = 0; i <= grid.nx(); ++i) os << (i ? " " : "") << field(grid.node(i, j));
    os << '\n';
  }
}

namespace {

/// Symmetric graph Laplacian with per-edge conductances; `edge_scale(a, b)`
/// multiplies the geometric weight of the edge between nodes a and b.
template <typename EdgeScale>
SparseMatrix assemble_laplacian(const VertexGrid& g, EdgeScale edge_scale) {
  std::vector<Triplet> t;
  t.reserve(5 * g.node_count());
  const auto add_edge = [&](Index a, Index b, double w) {
    t.emplace_back(a, a, w);
    t.emplace_back(b, b, w);
    t.emplace_back(a, b, -w);
    t.emplace_back(b, a, -w);
  };
  for (Index j = 0; j <= g.ny(); ++j)
    for (Index i = 0; i <= g.nx(); ++i) {
      const Index a = g.node(i, j);
      if (i < g.nx()) {
        const Index b = g.node(i + 1, j);
        add_edge(a, b, g.edge_weight_x(j) * edge_scale(a, b));
      }
      if (j < g.ny()) {
        const Index b = g.node(i, j + 1);
        add_edge(a, b, g.edge_weight_y(i) * edge_scale(a, b));
      }
    }
  SparseMatrix k(g.node_count(), g.node_count());
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

Index steps_for(double t, double dt) {
  const double r = t / dt;
  const auto n = static_cast<Index>(std::llround(r));
  require(std::abs(r - static_cast<double>(n)) < 1e-9, "time is not a multiple of dt");
  return n;
}

}  // namespace

HeatSolver::HeatSolver(GridSolverConfig cfg, Source src)
    : cfg_(cfg), src_(src), grid_(cfg.nx, cfg.ny) {
  cfg_.validate();
  SparseMatrix a = assemble_laplacian(grid_, [](Index, Index) { return 1.0; });
  a *= cfg_.dt;
  for (Index k = 0; k < grid_.node_count(); ++k) a.coeffRef(k, k) += grid_.areas()(k);
  factor_.compute(a);
  if (factor_.info() != Eigen::Success)
    throw NumericalError("HeatSolver: factorization of the backward Euler matrix failed");
}

Vector HeatSolver::source(const VectorRef& theta) const {
  require(theta.size() == 2, "HeatSolver: source location must be 2-D");
  const double h2 = src_.width * src_.width;
  const double scale = src_.amplitude / (2.0 * std::numbers::pi * h2);
  Vector s(grid_.node_count());
  for (Index j = 0; j <= grid_.ny(); ++j)
    for (Index i = 0; i <= grid_.nx(); ++i) {
      const double dx = grid_.x(i) - theta(0);
      const double dy = grid_.y(j) - theta(1);
      s(grid_.node(i, j)) = scale * std::exp(-(dx * dx + dy * dy) / (2.0 * h2));
    }
  return s;
}

std::vector<Vector> HeatSolver::solve(const VectorRef& theta,
                                      const std::vector<double>& times) const {
  std::vector<Index> marks;
  for (double t : times) marks.push_back(steps_for(t, cfg_.dt));
  require(std::is_sorted(marks.begin(), marks.end()), "HeatSolver: times must ascend");
  const Index last = std::max(marks.empty() ? 0 : marks.back(), steps_for(cfg_.t_end, cfg_.dt));

  const Vector load = (grid_.areas().array() * source(theta).array()).matrix() * cfg_.dt;
  Vector u = Vector::Zero(grid_.node_count());
  std::vector<Vector> out;
  std::size_t next = 0;
  while (next < marks.size() && marks[next] == 0) {
    out.push_back(u);
    ++next;
  }
  for (Index n = 1; n <= last && next < marks.size(); ++n) {
    Vector rhs = grid_.areas().cwiseProduct(u);
    if (static_cast<double>(n) * cfg_.dt <= src_.duration + 1e-12) rhs += load;
    u = factor_.solve(rhs);
    if (factor_.info() != Eigen::Success) throw NumericalError("HeatSolver: solve failed");
    while (next < marks.size() && marks[next] == n) {
      out.push_back(u);
      ++next;
    }
  }
  return out;
}

HeatSourceModel::HeatSourceModel(GridSolverConfig coarse, GridSolverConfig fine,
                                 SensorLayout layout)
    : coarse_(std::make_shared<const HeatSolver>(coarse)),
      fine_(std::make_shared<const HeatSolver>(fine)),
      sensors_(sensor_coordinates(3, layout)) {}

Vector HeatSourceModel::sample(const HeatSolver& solver, const VectorRef& theta) const {
  require(theta.size() == 2, "heat_source_2d: expects a 2-vector");
  const auto fields = solver.solve(theta, kMeasurementTimes);
  Vector out(18);
  Index k = 0;
  for (const auto& f : fields)
    for (double sy : sensors_)
      for (double sx : sensors_) out(k++) = solver.grid().interpolate(f, sx, sy);
  return out;
}

Vector HeatSourceModel::evaluate(const VectorRef& theta) const { return sample(*coarse_, theta); }

Vector HeatSourceModel::evaluate_fine(const VectorRef& theta) const {
  return sample(*fine_, theta);
}

namespace {

constexpr std::array<std::array<double, 2>, 9> kPermeabilityCenters{{{0.5, 0.5},
                                                                     {0.25, 0.25},
                                                                     {0.75, 0.25},
                                                                     {0.75, 0.75},
                                                                     {0.25, 0.75},
                                                                     {0.0, 0.5},
                                                                     {0.5, 0.0},
                                                                     {1.0, 0.5},
                                                                     {0.5, 1.0}}};
constexpr double kPermeabilityWidth = 0.15;

constexpr std::array<std::array<double, 2>, 4> kSourceCenters{
    {{0.3, 0.3}, {0.7, 0.3}, {0.7, 0.7}, {0.3, 0.7}}};
constexpr std::array<double, 4> kSourceWeights{2.0, -3.0, 3.0, -2.0};
constexpr double kSourceWidth = 0.05;

}  // namespace

DarcySolver::DarcySolver(Index nx, Index ny, bool normalized_sources) : grid_(nx, ny) {
  require(nx >= 8 && ny >= 8, "DarcySolver: need at least 8 cells per side");
  const double s2 = kSourceWidth * kSourceWidth;
  const double scale = normalized_sources ? 1.0 / (2.0 * std::numbers::pi * s2) : 1.0;
  source_.resize(grid_.node_count());
  for (Index j = 0; j <= ny; ++j)
    for (Index i = 0; i <= nx; ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k < kSourceCenters.size(); ++k) {
        const double dx = grid_.x(i) - kSourceCenters[k][0];
        const double dy = grid_.y(j) - kSourceCenters[k][1];
        v += kSourceWeights[k] * scale * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
      }
      source_(grid_.node(i, j)) = v;
    }
}

Vector DarcySolver::permeability_basis(double x, double y) {
  Vector b(9);
  const double w2 = 2.0 * kPermeabilityWidth * kPermeabilityWidth;
  for (Index i = 0; i < 9; ++i) {
    const double dx = x - kPermeabilityCenters[i][0];
    const double dy = y - kPermeabilityCenters[i][1];
    b(i) = std::exp(-(dx * dx + dy * dy) / w2);
  }
  return b;
}

Vector DarcySolver::permeability(const VectorRef& theta) const {
  require(theta.size() == 9, "darcy_2d: expects 9 permeability weights");
  Vector kappa(grid_.node_count());
  for (Index j = 0; j <= grid_.ny(); ++j)
    for (Index i = 0; i <= grid_.nx(); ++i)
      kappa(grid_.node(i, j)) = permeability_basis(grid_.x(i), grid_.y(j)).dot(theta);
  return kappa;
}

SparseMatrix DarcySolver::stiffness(const VectorRef& kappa) const {
  return assemble_laplacian(grid_, [&](Index a, Index b) {
    return 2.0 * kappa(a) * kappa(b) / (kappa(a) + kappa(b));
  });
}

Vector DarcySolver::solve(const VectorRef& theta) const {
  const Vector kappa = permeability(theta);
  if (!((kappa.array() > 0.0).all() && kappa.allFinite()))
    throw ContractError("darcy_2d: permeability is not positive everywhere on the grid");
  const SparseMatrix k = stiffness(kappa);
  const Index n = grid_.node_count();

  // [K a; a^T 0] [u; lambda] = [M s; 0] enforces sum_k area_k u_k = 0.
  std::vector<Triplet> t;
  t.reserve(k.nonZeros() + 2 * n);
  for (Index col = 0; col < k.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(k, col); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  const Vector& a = grid_.areas();
  const double scale = 1.0 / a.maxCoeff();
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, n, a(i) * scale);
    t.emplace_back(n, i, a(i) * scale);
  }
  SparseMatrix aug(n + 1, n + 1);
  aug.setFromTriplets(t.begin(), t.end());
  aug.makeCompressed();

  Vector rhs = Vector::Zero(n + 1);
  rhs.head(n) = a.cwiseProduct(source_);

  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(aug);
  if (lu.info() != Eigen::Success) throw NumericalError("darcy_2d: singular system");
  const Vector sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite())
    throw NumericalError("darcy_2d: linear solve failed");
  Vector u = sol.head(n);
  // Remove round-off drift from the constraint.
  u.array() -= grid_.integrate(u) / a.sum();
  return u;
}

DarcyModel::DarcyModel(Index coarse_n, Index fine_n, SensorLayout layout, bool normalized_sources)
    : coarse_(coarse_n, coarse_n, normalized_sources),
      fine_(fine_n, fine_n, normalized_sources),
      sensors_(sensor_coordinates(5, layout)) {}

Vector DarcyModel::sample(const DarcySolver& solver, const VectorRef& theta) const {
  const Vector u = solver.solve(theta);
  Vector out(25);
  Index k = 0;
  for (double sy : sensors_)
    for (double sx : sensors_) out(k++) = solver.grid().interpolate(u, sx, sy);
  return out;
}

Vector DarcyModel::evaluate(const VectorRef& theta) const { return sample(coarse_, theta); }

Vector DarcyModel::evaluate_fine(const VectorRef& theta) const { return sample(fine_, theta); }

MeasurementModel generate_measurements(const ForwardModel& model, const VectorRef& theta_true,
                                       const VectorRef& noise_vars, std::uint64_t seed) {
  require(noise_vars.size() == model.output_dim(), "generate_measurements: noise dimension");
  Vector z = model.has_fine() ? model.evaluate_fine(theta_true) : model.evaluate(theta_true);
  std::mt19937_64 rng(seed);
  for (Index i = 0; i < z.size(); ++i) z(i) += std::sqrt(noise_vars(i)) * standard_normal(rng);
  return MeasurementModel(std::move(z), noise_vars);
}

}  // namespace adgp
