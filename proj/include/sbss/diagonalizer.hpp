#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sbss/local_cov.hpp"
#include "sbss/types.hpp"

namespace sbss {

struct JointDiagConfig {
  int max_sweeps = 100;
  /// Stop once the relative criterion increase of a sweep drops below tol.
  double tol = 1e-12;
  /// Rotations with a smaller angle are skipped.
  double rotation_threshold = 1e-14;

  void validate() const;
};

enum class SolverStatus { Converged, MaxSweeps };

struct UnmixingResult {
  Matrix gamma;
  /// lambdas[l](j) = gamma_j^T M_l gamma_j.
  std::vector<Vector> lambdas;
  double criterion = 0.0;
  int sweeps = 0;
  /// Row r of the output is row canonical_perm[r] of the raw solver output,
  /// multiplied by canonical_signs(r).
  std::vector<Index> canonical_perm;
  Vector canonical_signs;
  SolverStatus status = SolverStatus::Converged;
  /// Some ordering keys coincide to within 1e-10 relative; the rows involved
  /// are not identifiable.
  bool ties = false;
  /// Criterion after each sweep; entry 0 is the starting value.
  std::vector<double> criterion_trace;
};

/// Exact generalized eigen solution of (M0, Mf).
UnmixingResult pair_diagonalize(const Matrix& m0, const Matrix& mf);
UnmixingResult pair_diagonalize(const LocalCovariance& m0, const LocalCovariance& mf);

/// Approximate joint diagonalization of the whitened matrices by cyclic Givens
/// sweeps. Does not throw on non-convergence; see status.
UnmixingResult joint_diagonalize(const Matrix& m0, std::span<const Matrix> ms,
                                 const JointDiagConfig& cfg = {});
UnmixingResult joint_diagonalize(const LocalCovariance& m0,
                                 std::span<const LocalCovariance> ms,
                                 const JointDiagConfig& cfg = {});

/// sum_l sum_j (gamma_j^T M_l gamma_j)^2.
double criterion(const Matrix& gamma, std::span<const Matrix> ms);

struct Identifiability {
  bool ok = true;
  /// First 0-based pair (i, j), i < j, separated by less than delta in every
  /// matrix.
  std::optional<std::pair<int, int>> offending;
};

/// Checks that every pair of diagonal positions differs by at least delta in
/// at least one of the matrices.
Identifiability identifiability_check(std::span<const Matrix> ds, double delta);

/// Fixes signs (nonnegative row sums, else first nonzero entry positive) and
/// orders rows: by gamma_j^T M_1 gamma_j descending for one matrix, by
/// sum_l (gamma_j^T M_l gamma_j)^2 descending otherwise. Equal keys fall back
/// to lexicographic descending rows. Idempotent.
UnmixingResult canonicalize(const Matrix& gamma, std::span<const Matrix> ms);

}  // namespace sbss
