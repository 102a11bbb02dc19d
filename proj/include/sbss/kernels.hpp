#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/SparseCore>

#include "sbss/spatial.hpp"
#include "sbss/types.hpp"

namespace sbss {

namespace kernel {

/// f0(s) = 1 if s = 0.
struct Identity {
  bool operator==(const Identity&) const = default;
};
/// B(h)(s) = 1 if |s| <= h.
struct Ball {
  double radius;
  bool operator==(const Ball&) const = default;
};
/// R(h1, h2)(s) = 1 if h1 <= |s| <= h2.
struct Ring {
  double inner;
  double outer;
  bool operator==(const Ring&) const = default;
};
/// G(r)(s) = exp(-0.5 (q s / r)^2), q the standard normal 0.95 quantile, so
/// that 90% of the mass lies inside the radius-r ball.
struct Gauss {
  double radius;
  bool operator==(const Gauss&) const = default;
};

}  // namespace kernel

/// Radially symmetric lag-weight function.
class Kernel {
 public:
  using Variant = std::variant<kernel::Identity, kernel::Ball, kernel::Ring, kernel::Gauss>;

  Kernel() = default;
  Kernel(Variant v);  // NOLINT(google-explicit-constructor)

  static Kernel identity() { return Kernel(kernel::Identity{}); }
  static Kernel ball(double radius) { return Kernel(kernel::Ball{radius}); }
  static Kernel ring(double inner, double outer) { return Kernel(kernel::Ring{inner, outer}); }
  static Kernel gauss(double radius) { return Kernel(kernel::Gauss{radius}); }

  /// Parses `id`, `ball:h`, `ring:h1:h2`, `gauss:r`. The one-argument form
  /// `ring:r` stands for ring:(r-10):r, clamped at zero.
  static Kernel parse(std::string_view spec);

  double operator()(double distance) const;

  const Variant& variant() const noexcept { return v_; }
  bool is_identity() const noexcept { return std::holds_alternative<kernel::Identity>(v_); }

  /// Round-trippable spec string.
  std::string spec() const;

  bool operator==(const Kernel&) const = default;

 private:
  Variant v_{kernel::Identity{}};
};

double eval(const Kernel& k, double distance);

/// Comma-separated kernel specs, e.g. `ball:1,ring:1:2`.
std::vector<Kernel> parse_kernel_list(std::string_view specs);
std::string kernel_list_spec(const std::vector<Kernel>& kernels);

/// Phi^{-1}(0.95).
double normal_quantile_095();

/// Dense n x n matrix of weights f(s_i - s_j).
Matrix weight_matrix(const Kernel& k, const LocationSet& locations);
Matrix weight_matrix(const Kernel& k, const Matrix& distances);

using SparseWeights = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Nonzero weights only; used by the scatter and trace computations.
SparseWeights sparse_weights(const Kernel& k, const Matrix& distances);

}  // namespace sbss
