#include "adgp/optimize.hpp"

#include <cmath>

namespace adgp {

const char* to_string(OptStatus s) {
  switch (s) {
    case OptStatus::projected_gradient: return "projected_gradient";
    case OptStatus::value_change: return "value_change";
    case OptStatus::step_size: return "step_size";
    case OptStatus::max_iterations: return "max_iterations";
    case OptStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

namespace {

// Internally minimizes f = -objective.
struct Point {
  Vector x;
  double f;
  Vector g;
};

Vector projected_gradient(const Point& p, const DesignBox& box) {
  Vector pg = p.g;
  for (Index i = 0; i < pg.size(); ++i) {
    if (p.x(i) <= box.lower(i) && pg(i) > 0.0) pg(i) = 0.0;
    if (p.x(i) >= box.upper(i) && pg(i) < 0.0) pg(i) = 0.0;
  }
  return pg;
}

}  // namespace

BoxOptResult maximize_box(const SmoothObjective& objective, const VectorRef& x0,
                          const DesignBox& box, const BoxOptOptions& opts) {
  require(x0.size() == box.dim(), "maximize_box: start dimension");
  const Index p = box.dim();
  BoxOptResult res;
  const auto eval = [&](const Vector& x) {
    ++res.evaluations;
    ObjectiveValue ov = objective(x);
    return Point{x, -ov.value, -ov.gradient};
  };

  Point cur = eval(box.project(x0));
  Matrix h = Matrix::Identity(p, p);
  bool fresh_h = true;
  const double diag = (box.upper - box.lower).norm();

  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    const Vector pg = projected_gradient(cur, box);
    if (pg.norm() < opts.projected_gradient_tol) {
      res.status = OptStatus::projected_gradient;
      break;
    }

    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    std::vector<Index> free_idx;
    for (Index i = 0; i < p; ++i)
      if (pg(i) != 0.0 || (cur.x(i) > box.lower(i) && cur.x(i) < box.upper(i))) free_idx.push_back(i);

    Vector d = Vector::Zero(p);
    for (Index a : free_idx)
      for (Index b : free_idx) d(a) -= h(a, b) * cur.g(b);
    bool steepest = false;
    if (!(cur.g.dot(d) < 0.0)) {
      d = -pg;
      h.setIdentity();
      fresh_h = true;
      steepest = true;
    }

    Point next;
    bool found = false;
    for (int attempt = 0; attempt < 2 && !found; ++attempt) {
      double alpha = 1.0;
      if (fresh_h) alpha = std::min(1.0, opts.initial_step_fraction * diag / d.norm());
      for (int ls = 0; ls < 60; ++ls) {
        const Vector xn = box.project(cur.x + alpha * d);
        const Vector s = xn - cur.x;
        if (s.norm() == 0.0) break;
        Point cand = eval(xn);
        if (std::isfinite(cand.f) && cand.f <= cur.f + 1e-4 * cur.g.dot(s)) {
          next = std::move(cand);
          found = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!found && !steepest) {
        d = -pg;
        h.setIdentity();
        fresh_h = true;
        steepest = true;
      } else {
        break;
      }
    }
    if (!found) {
      res.status = OptStatus::line_search_failed;
      break;
    }

    const Vector s = next.x - cur.x;
    const Vector y = next.g - cur.g;
    const double df = std::abs(next.f - cur.f);
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh_h) h *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Matrix v = Matrix::Identity(p, p) - rho * s * y.transpose();
      h = v * h * v.transpose() + rho * s * s.transpose();
      fresh_h = false;
    }
    cur = std::move(next);
    if (df < opts.value_tol) {
      res.status = OptStatus::value_change;
      ++res.iterations;
      break;
    }
    if (s.norm() < opts.step_tol) {
      res.status = OptStatus::step_size;
      ++res.iterations;
      break;
    }
  }
  res.x = cur.x;
  res.value = -cur.f;
  return res;
}

}  // namespace adgp
