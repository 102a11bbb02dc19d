#include "sbss/spatial.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sbss/error.hpp"

namespace sbss {

LocationSet::LocationSet(Matrix coords, const LocationOptions& options)
    : coords_(std::move(coords)), min_separation_(options.min_separation) {
  if (coords_.cols() < 1) throw InvalidArgument("locations need at least one coordinate");
  if (!coords_.allFinite()) throw InvalidArgument("location coordinates must be finite");
  if (min_separation_ && !(*min_separation_ > 0.0))
    throw InvalidArgument("declared separation must be positive");

  if (!options.check_duplicates && !min_separation_) return;
  const Index n = coords_.rows();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double dist = (coords_.row(i) - coords_.row(j)).norm();
      if (options.check_duplicates && dist <= options.duplicate_tolerance)
        throw InvalidArgument("duplicate locations at rows " + std::to_string(i) + " and " +
                              std::to_string(j));
      if (min_separation_ && dist < *min_separation_)
        throw InvalidArgument("locations " + std::to_string(i) + " and " + std::to_string(j) +
                              " violate the declared separation");
    }
  }
}

LocationSet LocationSet::head(Index n) const {
  if (n < 0 || n > size()) throw InvalidArgument("prefix size out of range");
  LocationSet out;
  out.coords_ = coords_.topRows(n);
  out.min_separation_ = min_separation_;
  return out;
}

FieldSample::FieldSample(LocationSet locations, Matrix values)
    : locations_(std::move(locations)), values_(std::move(values)) {
  if (values_.rows() != locations_.size())
    throw InvalidArgument("value rows must match the number of locations");
  if (!values_.allFinite()) throw InvalidArgument("field values must be finite");
}

Matrix distance_matrix(const LocationSet& locations) {
  const Index n = locations.size();
  const Matrix& c = locations.coords();
  Matrix d = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      const double dist = (c.row(i) - c.row(j)).norm();
      d(i, j) = dist;
      d(j, i) = dist;
    }
  }
  return d;
}

double nested_square_side(int base_count, int layer) {
  return std::sqrt(static_cast<double>(base_count)) * std::pow(std::sqrt(2.0), layer - 1);
}

LocationSet gen_nested_squares(int base_count, int layers, Rng& rng) {
  if (base_count < 1 || layers < 1) throw InvalidArgument("nested squares need base >= 1, layers >= 1");
  const Index total = static_cast<Index>(base_count) << (layers - 1);
  Matrix coords(total, 2);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);

  Index filled = 0;
  for (int layer = 1; layer <= layers; ++layer) {
    const double side = nested_square_side(base_count, layer);
    const double inner_half = layer == 1 ? 0.0 : nested_square_side(base_count, layer - 1) / 2.0;
    const Index target = layer == 1 ? base_count : filled * 2;
    while (filled < target) {
      const double x = unit(rng) * side;
      const double y = unit(rng) * side;
      if (std::abs(x) < inner_half && std::abs(y) < inner_half) continue;
      coords(filled, 0) = x;
      coords(filled, 1) = y;
      ++filled;
    }
  }
  return LocationSet(std::move(coords));
}

LocationSet gen_diamond_grid(int radius) {
  if (radius < 0) throw InvalidArgument("grid radius must be nonnegative");
  const Index count = 2 * static_cast<Index>(radius) * radius + 2 * radius + 1;
  Matrix coords(count, 2);
  Index k = 0;
  for (int y = -radius; y <= radius; ++y) {
    const int span = radius - std::abs(y);
    for (int x = -span; x <= span; ++x) {
      coords(k, 0) = x;
      coords(k, 1) = y;
      ++k;
    }
  }
  return LocationSet(std::move(coords), {.check_duplicates = false, .min_separation = 1.0});
}

LocationSet gen_rectangle_grid(int radius) {
  if (radius < 0) throw InvalidArgument("grid radius must be nonnegative");
  const Index width = 2 * static_cast<Index>(radius) + 1;
  const Index height = static_cast<Index>(radius) + 1;
  Matrix coords(width * height, 2);
  Index k = 0;
  for (Index y = 0; y < height; ++y) {
    for (Index x = -radius; x <= radius; ++x) {
      coords(k, 0) = static_cast<double>(x);
      coords(k, 1) = static_cast<double>(y);
      ++k;
    }
  }
  return LocationSet(std::move(coords), {.check_duplicates = false, .min_separation = 1.0});
}

LocationSet gen_uniform_rect(Index n, const Vector& lower, const Vector& upper, Rng& rng) {
  if (n < 1) throw InvalidArgument("need at least one point");
  if (lower.size() < 1 || lower.size() != upper.size())
    throw InvalidArgument("box bounds must have equal positive dimension");
  if (!((upper - lower).array() > 0.0).all()) throw InvalidArgument("degenerate box");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix coords(n, lower.size());
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < lower.size(); ++k)
      coords(i, k) = lower(k) + unit(rng) * (upper(k) - lower(k));
  return LocationSet(std::move(coords));
}

Polygon::Polygon(std::vector<std::array<double, 2>> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) throw InvalidArgument("polygon needs at least three vertices");
  lower_ = upper_ = vertices_.front();
  for (const auto& v : vertices_) {
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]))
      throw InvalidArgument("polygon vertices must be finite");
    for (int k = 0; k < 2; ++k) {
      lower_[k] = std::min(lower_[k], v[k]);
      upper_[k] = std::max(upper_[k], v[k]);
    }
  }
  if (!(upper_[0] > lower_[0] && upper_[1] > lower_[1]))
    throw InvalidArgument("polygon has empty interior");
}

bool Polygon::contains(double x, double y) const noexcept {
  // Even-odd ray casting.
  bool inside = false;
  const std::size_t m = vertices_.size();
  for (std::size_t i = 0, j = m - 1; i < m; j = i++) {
    const auto& a = vertices_[i];
    const auto& b = vertices_[j];
    if ((a[1] > y) != (b[1] > y)) {
      const double cross = (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0];
      if (x < cross) inside = !inside;
    }
  }
  return inside;
}

LocationSet gen_weighted_region(Index n, const Polygon& region, const Density2d& density,
                                double density_bound, Rng& rng, std::size_t max_attempts) {
  if (n < 1) throw InvalidArgument("need at least one point");
  if (!(density_bound > 0.0) || !std::isfinite(density_bound))
    throw InvalidArgument("density bound must be positive and finite");
  if (max_attempts == 0) max_attempts = 1000 * static_cast<std::size_t>(n) + 100000;

  const auto lo = region.lower();
  const auto hi = region.upper();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix coords(n, 2);
  Index accepted = 0;
  for (std::size_t attempt = 0; attempt < max_attempts && accepted < n; ++attempt) {
    const double x = lo[0] + unit(rng) * (hi[0] - lo[0]);
    const double y = lo[1] + unit(rng) * (hi[1] - lo[1]);
    const double u = unit(rng);
    if (!region.contains(x, y)) continue;
    const double w = density(x, y);
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("density must be finite and nonnegative");
    if (w > density_bound) throw InvalidArgument("density exceeds its declared bound");
    if (u * density_bound < w) {
      coords(accepted, 0) = x;
      coords(accepted, 1) = y;
      ++accepted;
    }
  }
  if (accepted < n)
    throw NumericalError("rejection sampling exhausted its attempts; density is degenerate on the region");
  return LocationSet(std::move(coords));
}

}  // namespace sbss
