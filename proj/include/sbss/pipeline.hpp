#pragma once

#include <vector>

#include "sbss/diagonalizer.hpp"
#include "sbss/kernels.hpp"
#include "sbss/spatial.hpp"

namespace sbss {

struct SbssFit {
  UnmixingResult unmixing;
  /// f_1..f_k; the covariance anchor f_0 is implicit.
  std::vector<Kernel> kernels;
  /// Zero unless centered.
  Vector column_means;
  /// (values - column_means) * gamma^T.
  Matrix scores;
  bool centered = false;
};

/// Pair solution for one matrix, joint diagonalization for several.
UnmixingResult unmix(const Matrix& m0, const std::vector<Matrix>& ms, const JointDiagConfig& cfg = {});

/// Estimates the unmixing matrix from M(f_0) and M(f_1), ..., M(f_k): the
/// exact pair solution for k = 1, joint diagonalization otherwise.
SbssFit fit(const FieldSample& sample, const std::vector<Kernel>& kernels, bool centered,
            const JointDiagConfig& cfg = {});

/// Same, reusing precomputed kernel weights; `op` must hold f_0 first and
/// then f_1..f_k for the sample's locations.
SbssFit fit(const ScatterOperator& op, const Matrix& values, bool centered,
            const JointDiagConfig& cfg = {});

/// Scores of new observations under a fitted unmixing matrix.
Matrix transform(const SbssFit& fit, const FieldSample& sample);
Matrix transform(const SbssFit& fit, const Matrix& values);

}  // namespace sbss
