#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sbss/rng.hpp"
#include "sbss/spatial.hpp"
#include "sbss/types.hpp"

namespace sbss {

struct MaternParams {
  double kappa;  ///< shape
  double phi;    ///< range, in location units

  void validate() const;
  bool operator==(const MaternParams&) const = default;
};

/// Matern correlation 2^(1-kappa) / Gamma(kappa) (h/phi)^kappa K_kappa(h/phi),
/// exactly 1 at h = 0.
double matern(double h, const MaternParams& params);

/// Independent unit-variance latent fields, one Matern correlation each.
struct LatentSpec {
  std::vector<MaternParams> components;

  int p() const noexcept { return static_cast<int>(components.size()); }
  double correlation(int component, double h) const { return matern(h, components.at(component)); }
  void validate() const;

  /// (6, 1.2), (1, 1.5), (0.25, 1).
  static LatentSpec sim1();
  /// Shapes (2, 1, 0.25) sharing the range phi.
  static LatentSpec sim2(double phi = 1.0);
  /// Shapes (6, 1, 0.25), range 20.
  static LatentSpec sim3();
  /// "sim1", "sim2", "sim2:phi", "sim3", or "matern:k:phi,matern:k:phi,...".
  static LatentSpec parse(std::string_view text);

  std::string spec() const;
};

/// n x n correlation matrix of one component at the given pairwise distances.
Matrix correlation_matrix(const Matrix& distances, const MaternParams& params);

/// Cholesky factors of the latent correlation matrices, computed once for a
/// fixed location set and reused for every draw.
///
/// Each factorization first tries no jitter, then adds 1e-12 * 2^m to the
/// diagonal (m = 0, 1, ...) up to 1e-8. The jitter that succeeded is kept per
/// component; NotPositiveDefinite carries the component index otherwise.
class LatentSimulator {
 public:
  LatentSimulator(LocationSet locations, LatentSpec spec);

  /// n x p matrix of latent values. Component k uses its own generator seeded
  /// from the k-th draw of `rng`.
  Matrix draw_values(Rng& rng) const;
  FieldSample draw(Rng& rng) const;

  const LocationSet& locations() const noexcept { return locations_; }
  const LatentSpec& spec() const noexcept { return spec_; }
  const std::vector<double>& jitter() const noexcept { return jitter_; }

  static constexpr double kMaxJitter = 1e-8;

 private:
  LocationSet locations_;
  LatentSpec spec_;
  std::vector<Matrix> factors_;
  std::vector<double> jitter_;
};

FieldSample simulate_latent(const LocationSet& locations, const LatentSpec& spec, Rng& rng);

/// Throws SingularMatrix when omega is not numerically invertible.
void require_invertible(const Matrix& omega);

/// X(s_i) = omega Z(s_i) for every row.
FieldSample mix(const FieldSample& latent, const Matrix& omega);

/// Matrix with standard normal entries, redrawn until its condition number
/// is below max_condition.
Matrix random_mixing(int p, Rng& rng, double max_condition = 100.0);

}  // namespace sbss
