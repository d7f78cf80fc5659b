#pragma once

#include <memory>
#include <random>

#include "adgp/gp.hpp"

namespace testing {

using adgp::Index;
using adgp::Matrix;
using adgp::Vector;

inline Matrix uniform_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = lo + (hi - lo) * adgp::uniform01(rng);
  return m;
}

inline Vector uniform_vector(std::mt19937_64& rng, Index n, double lo, double hi) {
  return uniform_matrix(rng, n, 1, lo, hi).col(0);
}

/// Random design in [0,1]^p with smooth random outputs.
inline std::shared_ptr<const adgp::TrainingSet> random_training(std::mt19937_64& rng, Index n,
                                                                Index p, Index q) {
  Matrix x = uniform_matrix(rng, n, p, 0.0, 1.0);
  Matrix w = uniform_matrix(rng, p, q, -2.0, 2.0);
  Matrix y = (x * w).array().sin().matrix();
  return std::make_shared<const adgp::TrainingSet>(std::move(x), std::move(y));
}

inline adgp::HyperParams random_psi(std::mt19937_64& rng, Index p) {
  adgp::HyperParams psi;
  psi.sigma_c = 0.5 + 1.5 * adgp::uniform01(rng);
  psi.lengthscales = uniform_vector(rng, p, 0.3, 1.2);
  return psi;
}

/// Central differences of a scalar function.
template <typename F>
Vector central_diff(F&& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// Relative error with an absolute floor for near-zero gradients.
inline double rel_err(const Vector& a, const Vector& b, double floor = 1e-6) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

}  // namespace testing
