#include "sbss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sbss/error.hpp"

namespace sbss {

std::vector<Index> linear_assignment(const Matrix& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n) throw InvalidArgument("assignment needs a square cost matrix");
  if (!cost.allFinite()) throw InvalidArgument("assignment costs must be finite");

  // Shortest augmenting path Hungarian method with potentials; 1-based
  // internal indexing, column 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> owner(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    owner[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = owner[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const Index j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Index> out(static_cast<std::size_t>(n));
  for (Index j = 1; j <= n; ++j) out[owner[j] - 1] = j - 1;
  return out;
}

MdiValue mdi(const Matrix& gamma_hat, const Matrix& omega) {
  if (gamma_hat.cols() != omega.rows() || omega.rows() != omega.cols() ||
      gamma_hat.rows() != gamma_hat.cols())
    throw InvalidArgument("mdi needs square matrices of equal size");
  const Matrix g = gamma_hat * omega;
  const Index p = g.rows();

  Matrix cost(p, p);
  Vector norms(p);
  for (Index i = 0; i < p; ++i) {
    norms(i) = g.row(i).squaredNorm();
    if (!(norms(i) > 0.0)) throw InvalidArgument("gamma_hat * omega has a zero row " + std::to_string(i));
    for (Index j = 0; j < p; ++j) cost(i, j) = 1.0 - g(i, j) * g(i, j) / norms(i);
  }

  MdiValue out;
  out.assignment = linear_assignment(cost);
  out.scales.resize(p);
  double total = 0.0;
  for (Index i = 0; i < p; ++i) {
    const Index j = out.assignment[i];
    total += cost(i, j);
    out.scales(i) = g(i, j) / norms(i);
  }
  out.value = p > 1 ? std::sqrt(std::clamp(total, 0.0, static_cast<double>(p - 1)) / (p - 1)) : 0.0;
  return out;
}

double nmdi_from_mdi(double mdi_value, Index n, Index p) {
  return static_cast<double>(n) * static_cast<double>(p - 1) * mdi_value * mdi_value;
}

double nmdi(const Matrix& gamma_hat, const Matrix& omega, Index n) {
  return nmdi_from_mdi(mdi(gamma_hat, omega).value, n, gamma_hat.rows());
}

CorrelationMatch max_abs_correlations(const Matrix& z_hat, const Matrix& z_ref, bool one_to_one) {
  const Index n = z_hat.rows();
  if (z_ref.rows() != n) throw InvalidArgument("score matrices need the same number of rows");
  if (n < 3) throw InvalidArgument("correlations need at least three rows");

  auto standardize = [](const Matrix& z, const char* name) {
    Matrix c = z.rowwise() - z.colwise().mean();
    for (Index j = 0; j < c.cols(); ++j) {
      const double norm = c.col(j).norm();
      if (!(norm > 0.0))
        throw InvalidArgument(std::string(name) + " column " + std::to_string(j) + " is constant");
      c.col(j) /= norm;
    }
    return c;
  };
  const Matrix a = standardize(z_ref, "reference");
  const Matrix b = standardize(z_hat, "score");
  const Matrix corr = (a.transpose() * b).cwiseAbs().cwiseMin(1.0);  // q x p

  CorrelationMatch out;
  const Index q = corr.rows();
  out.values.resize(q);
  out.match.resize(static_cast<std::size_t>(q));
  if (!one_to_one) {
    for (Index j = 0; j < q; ++j) {
      Index best = 0;
      out.values(j) = corr.row(j).maxCoeff(&best);
      out.match[j] = best;
    }
    return out;
  }

  const Index p = corr.cols();
  if (p < q) throw InvalidArgument("one-to-one matching needs at least as many score columns as references");
  Matrix cost = Matrix::Zero(p, p);
  cost.topRows(q) = 1.0 - corr.array();
  const auto assignment = linear_assignment(cost);
  for (Index j = 0; j < q; ++j) {
    out.match[j] = assignment[j];
    out.values(j) = corr(j, assignment[j]);
  }
  return out;
}

Matrix match_rows(const Matrix& gamma, const Matrix& reference) {
  if (gamma.rows() != reference.rows() || gamma.cols() != reference.cols())
    throw InvalidArgument("matrices to match must have the same shape");
  const Index p = gamma.rows();
  Matrix cost(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      cost(i, j) = std::min((reference.row(i) - gamma.row(j)).squaredNorm(),
                            (reference.row(i) + gamma.row(j)).squaredNorm());
  const auto assignment = linear_assignment(cost);
  Matrix out(p, gamma.cols());
  for (Index i = 0; i < p; ++i) {
    const auto row = gamma.row(assignment[i]);
    out.row(i) = (reference.row(i) - row).squaredNorm() <= (reference.row(i) + row).squaredNorm() ? Matrix(row)
                                                                                                  : Matrix(-row);
  }
  return out;
}

}  // namespace sbss
