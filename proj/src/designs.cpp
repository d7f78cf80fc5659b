#include "adgp/designs.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

namespace adgp {

DesignBox::DesignBox(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  require(lower.size() == upper.size() && lower.size() > 0, "DesignBox: bound dimensions");
  require((lower.array() < upper.array()).all(), "DesignBox: need lower < upper");
}

bool DesignBox::contains(const VectorRef& x) const {
  return x.size() == dim() && (x.array() >= lower.array()).all() &&
         (x.array() <= upper.array()).all();
}

Vector DesignBox::project(const VectorRef& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

Vector DesignBox::from_unit(const VectorRef& u) const {
  return (lower.array() + u.array() * (upper - lower).array()).matrix();
}

Matrix latin_hypercube(Index n, const DesignBox& box, std::uint64_t seed) {
  require(n >= 1, "latin_hypercube: need at least one point");
  std::mt19937_64 rng(seed);
  const Index p = box.dim();
  Matrix unit(n, p);
  std::vector<Index> perm(n);
  for (Index d = 0; d < p; ++d) {
    std::iota(perm.begin(), perm.end(), Index{0});
    // Fisher-Yates with our own uniform draws for cross-platform streams.
    for (Index i = n - 1; i > 0; --i) {
      const Index j = std::min<Index>(static_cast<Index>(uniform01(rng) * (i + 1)), i);
      std::swap(perm[i], perm[j]);
    }
    for (Index i = 0; i < n; ++i)
      unit(i, d) = (static_cast<double>(perm[i]) + uniform01(rng)) / static_cast<double>(n);
  }
  Matrix out(n, p);
  for (Index i = 0; i < n; ++i) out.row(i) = box.from_unit(unit.row(i).transpose()).transpose();
  return out;
}

namespace {

struct DirectionSpec {
  unsigned degree;
  unsigned poly;
  std::array<std::uint32_t, 7> m;
};

// Joe & Kuo (new-joe-kuo-6.21201), dimensions 2..21.
constexpr std::array<DirectionSpec, kSobolMaxDim - 1> kJoeKuo = {{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
}};

constexpr int kBits = 32;

std::vector<std::array<std::uint32_t, kBits>> direction_numbers(Index p) {
  std::vector<std::array<std::uint32_t, kBits>> v(p);
  for (int k = 0; k < kBits; ++k) v[0][k] = std::uint32_t{1} << (kBits - 1 - k);
  for (Index d = 1; d < p; ++d) {
    const DirectionSpec& spec = kJoeKuo[d - 1];
    const int s = static_cast<int>(spec.degree);
    for (int k = 0; k < s; ++k) v[d][k] = spec.m[k] << (kBits - 1 - k);
    for (int k = s; k < kBits; ++k) {
      std::uint32_t x = v[d][k - s] ^ (v[d][k - s] >> s);
      for (int i = 1; i < s; ++i)
        if ((spec.poly >> (s - 1 - i)) & 1u) x ^= v[d][k - i];
      v[d][k] = x;
    }
  }
  return v;
}

}  // namespace

Matrix sobol(Index n, const DesignBox& box, Index skip) {
  const Index p = box.dim();
  if (p > kSobolMaxDim)
    throw CapabilityError("sobol: dimension " + std::to_string(p) + " exceeds the supported " +
                          std::to_string(kSobolMaxDim));
  require(n >= 0 && skip >= 0, "sobol: negative count");
  const auto v = direction_numbers(p);
  std::vector<std::uint32_t> x(p, 0u);
  Matrix out(n, p);
  Vector u(p);
  for (Index idx = 0; idx < skip + n; ++idx) {
    if (idx >= skip) {
      for (Index d = 0; d < p; ++d) u(d) = static_cast<double>(x[d]) * 0x1.0p-32;
      out.row(idx - skip) = box.from_unit(u).transpose();
    }
    // Gray code: flip the direction number at the lowest zero bit of idx.
    int c = 0;
    for (auto m = static_cast<std::uint64_t>(idx); m & 1u; m >>= 1) ++c;
    if (c >= kBits) throw CapabilityError("sobol: sequence index exceeds 2^32");
    for (Index d = 0; d < p; ++d) x[d] ^= v[d][c];
  }
  return out;
}

Matrix uniform_grid_1d(Index count, const DesignBox& box) {
  require(box.dim() == 1 && count >= 2, "uniform_grid_1d: need a 1-D box and >= 2 points");
  Matrix out(count, 1);
  for (Index i = 0; i < count; ++i)
    out(i, 0) = box.lower(0) + (box.upper(0) - box.lower(0)) * static_cast<double>(i) /
                                   static_cast<double>(count - 1);
  return out;
}

void write_points_csv(std::ostream& os, const Matrix& points) {
  for (Index d = 0; d < points.cols(); ++d) os << (d ? "," : "") << "x" << (d + 1);
  os << '\n';
  os.precision(17);
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index d = 0; d < points.cols(); ++d) os << (d ? "," : "") << points(i, d);
    os << '\n';
  }
}

}  // namespace adgp
