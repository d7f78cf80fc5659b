#pragma once

#include <cstdint>
#include <iosfwd>

#include "adgp/common.hpp"

namespace adgp {

/// Closed search box B_theta.
struct DesignBox {
  Vector lower;
  Vector upper;

  DesignBox() = default;
  DesignBox(Vector lo, Vector hi);

  Index dim() const { return lower.size(); }
  bool contains(const VectorRef& x) const;
  Vector project(const VectorRef& x) const;
  /// Maps a point of [0,1]^p affinely into the box.
  Vector from_unit(const VectorRef& u) const;
};

/// Randomized Latin hypercube: in every dimension each stratum [k/n,(k+1)/n)
/// holds exactly one point, placed uniformly inside it. Row per point.
Matrix latin_hypercube(Index n, const DesignBox& box, std::uint64_t seed);

/// Largest dimension supported by the built-in direction numbers.
inline constexpr Index kSobolMaxDim = 21;

/// Unscrambled Sobol points (Joe-Kuo direction numbers, Gray-code order)
/// starting at sequence index `skip`; index 0 is the origin. Row per point.
Matrix sobol(Index n, const DesignBox& box, Index skip = 0);

/// `count` equally spaced points per axis on a 1-D box, endpoints included.
Matrix uniform_grid_1d(Index count, const DesignBox& box);

/// CSV with header x1..xp.
void write_points_csv(std::ostream& os, const Matrix& points);

}  // namespace adgp
