#include "sbss/diagonalizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sbss/error.hpp"

namespace sbss {

namespace {

double quad_form(const Matrix& m, const Matrix& gamma, Index row) {
  const Index p = gamma.cols();
  double total = 0.0;
  for (Index a = 0; a < p; ++a) {
    double inner = 0.0;
    for (Index b = 0; b < p; ++b) inner += m(a, b) * gamma(row, b);
    total += gamma(row, a) * inner;
  }
  return total;
}

void check_square(const Matrix& m, Index p, const char* what) {
  if (m.rows() != p || m.cols() != p) throw InvalidArgument(std::string(what) + " has the wrong shape");
  if (!m.allFinite()) throw InvalidArgument(std::string(what) + " is not finite");
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double row_sign(const Matrix& gamma, Index r) {
  double sum = 0.0;
  for (Index c = 0; c < gamma.cols(); ++c) sum += gamma(r, c);
  if (sum > 0.0) return 1.0;
  if (sum < 0.0) return -1.0;
  for (Index c = 0; c < gamma.cols(); ++c)
    if (gamma(r, c) != 0.0) return gamma(r, c) > 0.0 ? 1.0 : -1.0;
  return 1.0;
}

}  // namespace

void JointDiagConfig::validate() const {
  if (max_sweeps < 1 || !(tol > 0.0) || !(rotation_threshold > 0.0))
    throw InvalidArgument("joint diagonalization settings must be positive");
}

double criterion(const Matrix& gamma, std::span<const Matrix> ms) {
  double total = 0.0;
  for (const auto& m : ms)
    for (Index j = 0; j < gamma.rows(); ++j) {
      const double q = quad_form(m, gamma, j);
      total += q * q;
    }
  return total;
}

UnmixingResult canonicalize(const Matrix& gamma, std::span<const Matrix> ms) {
  if (ms.empty()) throw InvalidArgument("canonicalization needs at least one matrix");
  const Index p = gamma.rows();

  Matrix signed_gamma = gamma;
  Vector signs(p);
  for (Index r = 0; r < p; ++r) {
    signs(r) = row_sign(gamma, r);
    signed_gamma.row(r) *= signs(r);
  }

  Vector key(p);
  for (Index r = 0; r < p; ++r) {
    if (ms.size() == 1) {
      key(r) = quad_form(ms[0], signed_gamma, r);
    } else {
      double s = 0.0;
      for (const auto& m : ms) {
        const double q = quad_form(m, signed_gamma, r);
        s += q * q;
      }
      key(r) = s;
    }
  }

  std::vector<Index> perm(static_cast<std::size_t>(p));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) {
    if (key(a) != key(b)) return key(a) > key(b);
    for (Index c = 0; c < p; ++c)
      if (signed_gamma(a, c) != signed_gamma(b, c)) return signed_gamma(a, c) > signed_gamma(b, c);
    return false;
  });

  UnmixingResult out;
  out.gamma.resize(p, gamma.cols());
  out.canonical_signs.resize(p);
  for (Index r = 0; r < p; ++r) {
    out.gamma.row(r) = signed_gamma.row(perm[r]);
    out.canonical_signs(r) = signs(perm[r]);
  }
  out.canonical_perm = perm;

  const double scale = key.cwiseAbs().maxCoeff();
  for (Index r = 1; r < p; ++r)
    if (std::abs(key(perm[r - 1]) - key(perm[r])) <= 1e-10 * scale) out.ties = true;

  for (const auto& m : ms) {
    Vector lam(p);
    for (Index r = 0; r < p; ++r) lam(r) = quad_form(m, out.gamma, r);
    out.lambdas.push_back(std::move(lam));
  }
  out.criterion = criterion(out.gamma, ms);
  return out;
}

UnmixingResult pair_diagonalize(const Matrix& m0, const Matrix& mf) {
  const Index p = m0.rows();
  check_square(m0, p, "M0");
  check_square(mf, p, "Mf");
  const Matrix w = whitener(m0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(w * mf * w));
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Matrix gamma = eig.eigenvectors().transpose() * w;
  const Matrix ms[] = {mf};
  UnmixingResult out = canonicalize(gamma, ms);
  out.criterion_trace = {out.criterion};
  return out;
}

UnmixingResult pair_diagonalize(const LocalCovariance& m0, const LocalCovariance& mf) {
  return pair_diagonalize(m0.matrix, mf.matrix);
}

UnmixingResult joint_diagonalize(const Matrix& m0, std::span<const Matrix> ms,
                                 const JointDiagConfig& cfg) {
  cfg.validate();
  if (ms.empty()) throw InvalidArgument("joint diagonalization needs at least one matrix");
  const Index p = m0.rows();
  check_square(m0, p, "M0");
  for (const auto& m : ms) check_square(m, p, "local covariance");

  const Matrix w = whitener(m0);
  std::vector<Matrix> r;
  r.reserve(ms.size());
  for (const auto& m : ms) r.push_back(symmetrized(w * m * w));

  auto diag_criterion = [&] {
    double total = 0.0;
    for (const auto& rl : r)
      for (Index j = 0; j < p; ++j) total += rl(j, j) * rl(j, j);
    return total;
  };

  Matrix v = Matrix::Identity(p, p);
  std::vector<double> trace{diag_criterion()};
  int sweeps = 0;
  SolverStatus status = SolverStatus::MaxSweeps;

  while (sweeps < cfg.max_sweeps) {
    ++sweeps;
    bool rotated = false;
    for (Index i = 0; i + 1 < p; ++i) {
      for (Index j = i + 1; j < p; ++j) {
        double g11 = 0.0, g12 = 0.0, g22 = 0.0;
        for (const auto& rl : r) {
          const double h1 = rl(i, i) - rl(j, j);
          const double h2 = rl(i, j) + rl(j, i);
          g11 += h1 * h1;
          g12 += h1 * h2;
          g22 += h2 * h2;
        }
        const double ton = g11 - g22;
        const double toff = 2.0 * g12;
        const double theta = 0.5 * std::atan2(toff, ton + std::hypot(ton, toff));
        if (!(std::abs(theta) > cfg.rotation_threshold)) continue;
        rotated = true;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (auto& rl : r) {
          for (Index k = 0; k < p; ++k) {
            const double a = rl(i, k), b = rl(j, k);
            rl(i, k) = c * a + s * b;
            rl(j, k) = -s * a + c * b;
          }
          for (Index k = 0; k < p; ++k) {
            const double a = rl(k, i), b = rl(k, j);
            rl(k, i) = c * a + s * b;
            rl(k, j) = -s * a + c * b;
          }
        }
        for (Index k = 0; k < p; ++k) {
          const double a = v(i, k), b = v(j, k);
          v(i, k) = c * a + s * b;
          v(j, k) = -s * a + c * b;
        }
      }
    }
    const double prev = trace.back();
    const double now = diag_criterion();
    trace.push_back(now);
    if (!rotated || (now - prev) <= cfg.tol * std::max(std::abs(prev), 1e-300)) {
      status = SolverStatus::Converged;
      break;
    }
  }

  UnmixingResult out = canonicalize(v * w, ms);
  out.sweeps = sweeps;
  out.status = status;
  out.criterion_trace = std::move(trace);
  return out;
}

UnmixingResult joint_diagonalize(const LocalCovariance& m0, std::span<const LocalCovariance> ms,
                                 const JointDiagConfig& cfg) {
  std::vector<Matrix> mats;
  mats.reserve(ms.size());
  for (const auto& m : ms) mats.push_back(m.matrix);
  return joint_diagonalize(m0.matrix, mats, cfg);
}

Identifiability identifiability_check(std::span<const Matrix> ds, double delta) {
  if (ds.empty()) throw InvalidArgument("identifiability check needs at least one matrix");
  const Index p = ds[0].rows();
  for (const auto& d : ds) check_square(d, p, "diagonal matrix");
  Identifiability out;
  for (Index i = 0; i < p && out.ok; ++i)
    for (Index j = i + 1; j < p; ++j) {
      bool separated = false;
      for (const auto& d : ds)
        if (std::abs(d(i, i) - d(j, j)) >= delta) {
          separated = true;
          break;
        }
      if (!separated) {
        out.ok = false;
        out.offending = std::make_pair(static_cast<int>(i), static_cast<int>(j));
        break;
      }
    }
  return out;
}

}  // namespace sbss
