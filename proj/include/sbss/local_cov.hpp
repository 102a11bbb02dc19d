#pragma once

#include <span>
#include <vector>

#include "sbss/field_sim.hpp"
#include "sbss/kernels.hpp"
#include "sbss/spatial.hpp"
#include "sbss/types.hpp"

namespace sbss {

/// Local covariance (scatter) matrix
///   M(f) = n^-1 sum_i sum_j f(s_i - s_j) X(s_i) X(s_j)^T,
/// symmetrized as (M + M^T) / 2.
struct LocalCovariance {
  Matrix matrix;
  Kernel kernel;
  Index n = 0;
  bool centered = false;
};

/// Kernel weights for a fixed location set, reusable across many samples
/// observed at those locations.
class ScatterOperator {
 public:
  ScatterOperator(const LocationSet& locations, std::vector<Kernel> kernels);
  ScatterOperator(const Matrix& distances, std::vector<Kernel> kernels);

  /// One local covariance per kernel, in kernel order. With `centered` the
  /// column means are subtracted first.
  std::vector<LocalCovariance> apply(const Matrix& values, bool centered) const;

  const std::vector<Kernel>& kernels() const noexcept { return kernels_; }
  const SparseWeights& weights(std::size_t k) const { return weights_.at(k); }
  Index size() const noexcept { return n_; }

 private:
  Index n_ = 0;
  std::vector<Kernel> kernels_;
  std::vector<SparseWeights> weights_;
};

LocalCovariance local_covariance(const FieldSample& sample, const Kernel& k, bool centered);

/// Elementwise identical to repeated local_covariance calls; the distance
/// matrix is computed once.
std::vector<LocalCovariance> local_cov_batch(const FieldSample& sample,
                                             std::span<const Kernel> kernels, bool centered);

/// Double sum with given weights, accumulated with compensated summation over
/// fixed row blocks so the result does not depend on the thread count.
Matrix weighted_scatter(const SparseWeights& weights, const Matrix& values);

/// Expected value of the uncentered local covariance for latent fields `latent`
/// mixed by `omega`: Omega diag(c) Omega^T with
/// c_k = n^-1 sum_ij f(s_i - s_j) K_k(s_i - s_j).
Matrix population_local_cov(const LocationSet& locations, const LatentSpec& latent,
                            const Matrix& omega, const Kernel& k);

/// The diagonal c above, for precomputed distances.
Vector population_diagonal(const Matrix& distances, const LatentSpec& latent, const Kernel& k);

/// Symmetric W = M0^{-1/2}. Throws NotPositiveDefinite when the smallest
/// eigenvalue is at most 1e-10 times the largest.
Matrix whitener(const Matrix& m0);
inline Matrix whitener(const LocalCovariance& m0) { return whitener(m0.matrix); }

}  // namespace sbss
