#pragma once

#include <vector>

#include "sbss/types.hpp"

namespace sbss {

/// Minimum-cost perfect matching for a square cost matrix. Entry i of the
/// result is the column assigned to row i.
std::vector<Index> linear_assignment(const Matrix& cost);

struct MdiValue {
  double value = 0.0;
  /// Row i of gamma_hat * omega is matched to column assignment[i].
  std::vector<Index> assignment;
  /// Optimal scale applied to row i.
  Vector scales;
};

/// Minimum distance index of gamma_hat with respect to the mixing omega.
MdiValue mdi(const Matrix& gamma_hat, const Matrix& omega);

/// n (p - 1) mdi^2.
double nmdi(const Matrix& gamma_hat, const Matrix& omega, Index n);
double nmdi_from_mdi(double mdi_value, Index n, Index p);

struct CorrelationMatch {
  /// values(j) = |corr(z_ref_j, z_hat_match[j])|.
  Vector values;
  std::vector<Index> match;
};

/// For every reference column, the largest absolute Pearson correlation with
/// any column of z_hat. With one_to_one, each z_hat column is used at most
/// once and the total is maximized.
CorrelationMatch max_abs_correlations(const Matrix& z_hat, const Matrix& z_ref,
                                      bool one_to_one = false);

/// Reorders and sign-flips the rows of `gamma` to be closest to `reference`
/// in Frobenius norm.
Matrix match_rows(const Matrix& gamma, const Matrix& reference);

}  // namespace sbss
