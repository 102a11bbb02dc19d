#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "sbss/rng.hpp"
#include "sbss/types.hpp"

namespace sbss {

struct LocationOptions {
  /// Reject pairs of points closer than duplicate_tolerance.
  bool check_duplicates = true;
  double duplicate_tolerance = 1e-12;
  /// Declared minimum separation; every pairwise distance must reach it.
  std::optional<double> min_separation;
};

/// n points in R^d. Immutable once constructed.
class LocationSet {
 public:
  LocationSet() = default;
  explicit LocationSet(Matrix coords, const LocationOptions& options = {});

  Index size() const noexcept { return coords_.rows(); }
  int dim() const noexcept { return static_cast<int>(coords_.cols()); }
  const Matrix& coords() const noexcept { return coords_; }
  std::optional<double> min_separation() const noexcept { return min_separation_; }

  /// The first n points, in insertion order.
  LocationSet head(Index n) const;

 private:
  Matrix coords_;
  std::optional<double> min_separation_;
};

/// Values observed (or simulated) at a set of locations; row i belongs to
/// location i.
class FieldSample {
 public:
  FieldSample() = default;
  FieldSample(LocationSet locations, Matrix values);

  const LocationSet& locations() const noexcept { return locations_; }
  const Matrix& values() const noexcept { return values_; }
  Index size() const noexcept { return values_.rows(); }
  int variables() const noexcept { return static_cast<int>(values_.cols()); }

 private:
  LocationSet locations_;
  Matrix values_;
};

/// Symmetric n x n matrix of Euclidean distances with an exact zero diagonal.
Matrix distance_matrix(const LocationSet& locations);

/// Nested squares design: base_count uniform points in the origin-centered
/// square of side sqrt(base_count), then each further layer scales the side by
/// sqrt(2) and draws as many points as already exist on the new annulus.
/// Points come back layer by layer, so every prefix of size
/// base_count * 2^(j-1) fills exactly the j innermost squares.
LocationSet gen_nested_squares(int base_count, int layers, Rng& rng);

/// Side length of square j (1-based) of the nested squares design.
double nested_square_side(int base_count, int layer);

/// Integer lattice points with |x| + |y| <= radius.
LocationSet gen_diamond_grid(int radius);

/// Integer lattice of width 2 * radius + 1 and height radius + 1.
LocationSet gen_rectangle_grid(int radius);

/// n independent uniform points in the box [lower, upper].
LocationSet gen_uniform_rect(Index n, const Vector& lower, const Vector& upper, Rng& rng);

/// Simple polygon in the plane (vertices in order, implicitly closed).
class Polygon {
 public:
  explicit Polygon(std::vector<std::array<double, 2>> vertices);

  bool contains(double x, double y) const noexcept;
  const std::vector<std::array<double, 2>>& vertices() const noexcept { return vertices_; }
  std::array<double, 2> lower() const noexcept { return lower_; }
  std::array<double, 2> upper() const noexcept { return upper_; }

 private:
  std::vector<std::array<double, 2>> vertices_;
  std::array<double, 2> lower_{}, upper_{};
};

using Density2d = std::function<double(double, double)>;

/// Rejection sampler: n points distributed proportionally to `density`
/// restricted to `region`. `density_bound` must dominate the density on the
/// region; max_attempts = 0 picks 1000 * n + 100000.
LocationSet gen_weighted_region(Index n, const Polygon& region, const Density2d& density,
                                double density_bound, Rng& rng,
                                std::size_t max_attempts = 0);

}  // namespace sbss
