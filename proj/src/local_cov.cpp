#include "sbss/local_cov.hpp"

#include <cmath>

#include "sbss/error.hpp"
#include "sbss/parallel.hpp"

namespace sbss {

namespace {

constexpr Index kRowBlock = 256;

// Neumaier's variant of Kahan summation.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) noexcept {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      carry += (sum - t) + x;
    else
      carry += (x - t) + sum;
    sum = t;
  }
  double value() const noexcept { return sum + carry; }
};

}  // namespace

Matrix weighted_scatter(const SparseWeights& weights, const Matrix& values) {
  const Index n = values.rows();
  const Index p = values.cols();
  if (weights.rows() != n || weights.cols() != n)
    throw InvalidArgument("weights do not match the number of observations");

  const Index blocks = (n + kRowBlock - 1) / kRowBlock;
  std::vector<Matrix> partial(static_cast<std::size_t>(blocks));

  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    const Index begin = static_cast<Index>(b) * kRowBlock;
    const Index end = std::min(n, begin + kRowBlock);
    std::vector<CompensatedSum> acc(static_cast<std::size_t>(p * p));
    std::vector<CompensatedSum> inner(static_cast<std::size_t>(p));
    for (Index i = begin; i < end; ++i) {
      for (auto& s : inner) s = {};
      for (SparseWeights::InnerIterator it(weights, i); it; ++it) {
        const double w = it.value();
        const Index j = it.col();
        for (Index c = 0; c < p; ++c) inner[c].add(w * values(j, c));
      }
      for (Index c = 0; c < p; ++c) {
        const double y = inner[c].value();
        for (Index a = 0; a < p; ++a) acc[a + c * p].add(values(i, a) * y);
      }
    }
    Matrix m(p, p);
    for (Index c = 0; c < p; ++c)
      for (Index a = 0; a < p; ++a) m(a, c) = acc[a + c * p].value();
    partial[b] = std::move(m);
  });

  Matrix out(p, p);
  for (Index c = 0; c < p; ++c)
    for (Index a = 0; a < p; ++a) {
      CompensatedSum s;
      for (const auto& m : partial) s.add(m(a, c));
      out(a, c) = s.value();
    }
  return out;
}

ScatterOperator::ScatterOperator(const LocationSet& locations, std::vector<Kernel> kernels)
    : ScatterOperator(distance_matrix(locations), std::move(kernels)) {}

ScatterOperator::ScatterOperator(const Matrix& distances, std::vector<Kernel> kernels)
    : n_(distances.rows()), kernels_(std::move(kernels)) {
  weights_.reserve(kernels_.size());
  for (const auto& k : kernels_) weights_.push_back(sparse_weights(k, distances));
}

std::vector<LocalCovariance> ScatterOperator::apply(const Matrix& values, bool centered) const {
  if (values.rows() != n_) throw InvalidArgument("sample size does not match the locations");
  if (centered && n_ < 2) throw InvalidArgument("centering needs at least two observations");

  Matrix x = values;
  if (centered) x.rowwise() -= values.colwise().mean();

  std::vector<LocalCovariance> out;
  out.reserve(kernels_.size());
  for (std::size_t k = 0; k < kernels_.size(); ++k) {
    Matrix m = weighted_scatter(weights_[k], x) / static_cast<double>(n_);
    if (!m.allFinite()) throw NumericalError("local covariance accumulation is not finite");
    Matrix sym = 0.5 * (m + m.transpose());
    out.push_back({std::move(sym), kernels_[k], n_, centered});
  }
  return out;
}

std::vector<LocalCovariance> local_cov_batch(const FieldSample& sample,
                                             std::span<const Kernel> kernels, bool centered) {
  ScatterOperator op(sample.locations(), std::vector<Kernel>(kernels.begin(), kernels.end()));
  return op.apply(sample.values(), centered);
}

LocalCovariance local_covariance(const FieldSample& sample, const Kernel& k, bool centered) {
  return local_cov_batch(sample, std::span<const Kernel>(&k, 1), centered).front();
}

Vector population_diagonal(const Matrix& distances, const LatentSpec& latent, const Kernel& k) {
  latent.validate();
  const Index n = distances.rows();
  Vector c(latent.p());
  for (int m = 0; m < latent.p(); ++m) {
    CompensatedSum s;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) {
        const double w = k.is_identity() ? (i == j ? 1.0 : 0.0) : k(distances(i, j));
        if (w != 0.0) s.add(w * latent.correlation(m, distances(i, j)));
      }
    c(m) = s.value() / static_cast<double>(n);
  }
  return c;
}

Matrix population_local_cov(const LocationSet& locations, const LatentSpec& latent,
                            const Matrix& omega, const Kernel& k) {
  require_invertible(omega);
  if (omega.cols() != latent.p()) throw InvalidArgument("mixing matrix does not match the latent spec");
  const Vector c = population_diagonal(distance_matrix(locations), latent, k);
  Matrix m = omega * c.asDiagonal() * omega.transpose();
  return 0.5 * (m + m.transpose());
}

Matrix whitener(const Matrix& m0) {
  if (m0.rows() != m0.cols() || m0.rows() == 0) throw InvalidArgument("whitener needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m0 + m0.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();
  const double largest = ev.cwiseAbs().maxCoeff();
  if (!(ev(0) > 1e-10 * largest)) throw NotPositiveDefinite("covariance matrix is not positive definite");
  const Matrix& v = eig.eigenvectors();
  Matrix w = v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  return 0.5 * (w + w.transpose());
}

}  // namespace sbss
