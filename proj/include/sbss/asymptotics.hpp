#pragma once

#include <optional>
#include <vector>

#include "sbss/field_sim.hpp"
#include "sbss/kernels.hpp"
#include "sbss/rng.hpp"
#include "sbss/spatial.hpp"
#include "sbss/types.hpp"

namespace sbss {

/// Fixed design quantities for the limiting covariances: locations, latent
/// correlations K_1..K_p at every pair of locations, and the mixing matrix.
/// The np x np covariance matrices are formed only on request.
class AsymptoticWorkspace {
 public:
  AsymptoticWorkspace(LocationSet locations, LatentSpec latent, Matrix omega);

  Index n() const noexcept { return locations_.size(); }
  int p() const noexcept { return latent_.p(); }
  const LocationSet& locations() const noexcept { return locations_; }
  const LatentSpec& latent() const noexcept { return latent_; }
  const Matrix& omega() const noexcept { return omega_; }
  const Matrix& distances() const noexcept { return distances_; }
  /// n x n matrix K_m(s_i - s_j).
  const Matrix& correlation(int m) const { return correlations_.at(m); }

  /// Covariance of z, index (i - 1) p + j for component j at s_i.
  Matrix r_z() const;
  /// Covariance of the observed vector, (I_n kron Omega) R_z (I_n kron Omega)^T.
  Matrix r() const;

  /// Diagonal of Omega^-1 M(f) Omega^-T: c_m = n^-1 sum_ij f(s_i - s_j) K_m(s_i - s_j).
  Vector population_diagonal(const Kernel& f) const;

 private:
  LocationSet locations_;
  LatentSpec latent_;
  Matrix omega_;
  Matrix distances_;
  std::vector<Matrix> correlations_;
};

enum class TraceMethod {
  /// Reduces every trace to sums over n x n products; no np x np matrix.
  Structured,
  /// Materializes R and the T blocks; meant for small oracle checks.
  Dense,
};

/// p^2 x p^2 matrix Sigma(f, g) with entries 2 n^-1 tr{R T(f)_st R T(g)_uv}
/// for row (s - 1) p + t and column (u - 1) p + v. use_r_z replaces R by R_z.
Matrix sigma_pair(const AsymptoticWorkspace& ws, const Kernel& f, const Kernel& g, bool use_r_z,
                  TraceMethod method = TraceMethod::Structured);

/// All blocks Sigma(f_i, f_j) for a list of kernels in one pass; block (i, j)
/// occupies rows i p^2.. and columns j p^2...
Matrix sigma_blocks(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels, bool use_r_z,
                    TraceMethod method = TraceMethod::Structured);

/// [[Sigma(f), Sigma(f, g)], [Sigma(g, f), Sigma(g)]] over R.
Matrix v_matrix(const AsymptoticWorkspace& ws, const Kernel& f, const Kernel& g,
                TraceMethod method = TraceMethod::Structured);
/// V(f, f_0).
Matrix v_matrix(const AsymptoticWorkspace& ws, const Kernel& f,
                TraceMethod method = TraceMethod::Structured);

struct F1Result {
  /// (p^2 + p) x (p^2 + p): limiting covariance of n^1/2 (vect(Gamma - Omega'^-1), diag(Lambda - Lambda)).
  Matrix f1;
  /// Components sorted by decreasing population eigenvalue; Omega' has
  /// column r equal to column order[r] of Omega.
  std::vector<int> order;
  /// Sorted population eigenvalues lambda_1 > ... > lambda_p.
  Vector lambdas;
};

/// Minimum gap between population eigenvalues accepted by f1_matrix and
/// fk_matrix.
inline constexpr double kMinEigGap = 1e-8;

/// Limiting covariance of the two-matrix estimator. Throws EigGapTooSmall.
F1Result f1_matrix(const AsymptoticWorkspace& ws, const Kernel& f);

/// Limiting covariance of n^1/2 vect(Gamma - Omega^-1) for the joint
/// estimator over f_1..f_k. Throws EigGapTooSmall.
Matrix fk_matrix(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels);

/// fk_matrix evaluated as if Omega = I, which is all the MDI limit needs.
Matrix fk_matrix_unmixed(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels);

struct LimitSpectrum {
  /// p^2 - p eigenvalues, descending, clipped at zero.
  Vector deltas;
  double expected_nmdi = 0.0;
};

/// Eigenvalues of (I - D_pp) Sigma (I - D_pp) on the off-diagonal positions.
LimitSpectrum mdi_limit_spectrum(const Matrix& sigma);

/// Limit spectrum of n (p - 1) MDI^2 for a kernel set; the mixing matrix of
/// the workspace is irrelevant.
LimitSpectrum limit_spectrum(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels);

/// Draws of sum_i delta_i N_i^2.
Vector sample_limit_nmdi(const LimitSpectrum& spectrum, Index draws, Rng& rng);

struct KernelSelection {
  std::size_t best = 0;
  /// Per candidate set; empty when the set is not identifiable.
  std::vector<std::optional<LimitSpectrum>> spectra;
};

/// Candidate with the smallest expected limit; the first one wins ties.
KernelSelection select_kernels(const AsymptoticWorkspace& ws,
                               const std::vector<std::vector<Kernel>>& candidates);

}  // namespace sbss
