#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "sbss/diagonalizer.hpp"
#include "sbss/error.hpp"
#include "test_util.hpp"

using namespace sbss;
using sbss::test::random_matrix;
using sbss::test::random_spd;
using sbss::test::random_symmetric;

namespace {

Matrix diag3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v.asDiagonal();
}

double off_diagonal_max(const Matrix& m) {
  Matrix o = m;
  o.diagonal().setZero();
  return o.cwiseAbs().maxCoeff();
}

void check_sign_convention(const Matrix& gamma) {
  for (Index i = 0; i < gamma.rows(); ++i) {
    const double sum = gamma.row(i).sum();
    CHECK(sum >= 0.0);
  }
}

}  // namespace

TEST_CASE("pair diagonalization examples") {
  const Matrix id = Matrix::Identity(3, 3);
  SUBCASE("already solved") {
    const UnmixingResult r = pair_diagonalize(id, diag3(3, 2, 1));
    CHECK(r.gamma == id);
    REQUIRE(r.lambdas.size() == 1);
    CHECK(r.lambdas[0](0) == 3.0);
    CHECK(r.lambdas[0](1) == 2.0);
    CHECK(r.lambdas[0](2) == 1.0);
    CHECK_FALSE(r.ties);
  }
  SUBCASE("reversed") {
    const UnmixingResult r = pair_diagonalize(id, diag3(1, 2, 3));
    Matrix rev = Matrix::Zero(3, 3);
    rev(0, 2) = rev(1, 1) = rev(2, 0) = 1.0;
    CHECK(r.gamma == rev);
    CHECK(r.lambdas[0](0) == 3.0);
    CHECK(r.lambdas[0](2) == 1.0);
    CHECK(r.canonical_perm.size() == 3);
  }
  SUBCASE("ties are flagged") {
    CHECK(pair_diagonalize(id, diag3(2, 2, 1)).ties);
  }
  SUBCASE("not positive definite") {
    CHECK_THROWS_AS(pair_diagonalize(diag3(1, 0, 1), id), NotPositiveDefinite);
  }
}

TEST_CASE("pair diagonalization residuals on random inputs") {
  Rng rng = substream(30, {});
  for (int t = 0; t < 200; ++t) {
    const Index p = 2 + t % 4;
    const Matrix m0 = random_spd(p, rng);
    const Matrix mf = random_symmetric(p, rng);
    const UnmixingResult r = pair_diagonalize(m0, mf);
    CHECK((r.gamma * m0 * r.gamma.transpose() - Matrix::Identity(p, p)).norm() < 1e-8);
    const Matrix d = r.gamma * mf * r.gamma.transpose();
    CHECK(off_diagonal_max(d) < 1e-8);
    for (Index j = 0; j + 1 < p; ++j) CHECK(r.lambdas[0](j) >= r.lambdas[0](j + 1));
    for (Index j = 0; j < p; ++j) CHECK(std::abs(d(j, j) - r.lambdas[0](j)) < 1e-8);
    check_sign_convention(r.gamma);
  }
}

TEST_CASE("criterion") {
  const Matrix id = Matrix::Identity(2, 2);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1.5;
  d(1, 1) = -2.0;
  std::vector<Matrix> ms{d};
  CHECK(criterion(id, ms) == 1.5 * 1.5 + 4.0);
  std::vector<Matrix> ones{Matrix::Identity(4, 4)};
  CHECK(criterion(Matrix::Identity(4, 4), ones) == 4.0);
  Rng rng = substream(31, {});
  const Matrix g = random_matrix(3, 3, rng);
  const Matrix m = random_symmetric(3, rng);
  std::vector<Matrix> one{m};
  CHECK(criterion(g, one) == doctest::Approx((g * m * g.transpose()).diagonal().squaredNorm()).epsilon(1e-13));
}

TEST_CASE("joint diagonalization of commuting matrices") {
  const std::vector<Matrix> ms{diag3(3, 2, 1), diag3(9, 4, 1)};
  const UnmixingResult r = joint_diagonalize(Matrix::Identity(3, 3), ms);
  CHECK(r.gamma == Matrix::Identity(3, 3));
  CHECK(r.criterion == 112.0);
  CHECK(r.status == SolverStatus::Converged);
  REQUIRE(r.lambdas.size() == 2);
  CHECK(r.lambdas[1](0) == 9.0);
}

TEST_CASE("joint diagonalization reaches the brute-force maximum") {
  Rng rng = substream(32, {});
  for (int t = 0; t < 3; ++t) {
    // Perturbed commuting family, whitened already (M0 = I).
    const Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(3, 3, rng)).householderQ();
    std::vector<Matrix> ms;
    for (int l = 0; l < 3; ++l) {
      Vector d = random_matrix(3, 1, rng).col(0) * 2.0;
      Matrix m = q * d.asDiagonal() * q.transpose() + 0.05 * random_symmetric(3, rng);
      ms.push_back(0.5 * (m + m.transpose()));
    }
    const UnmixingResult r = joint_diagonalize(Matrix::Identity(3, 3), ms, {.max_sweeps = 500, .tol = 1e-15});
    const double brute = sbss::test::euler_grid_maximum(ms, 1e-3);
    CHECK(r.criterion >= brute - 1e-9);
    CHECK(r.criterion <= brute + 1e-9);
    CHECK((r.gamma * r.gamma.transpose() - Matrix::Identity(3, 3)).norm() < 1e-8);
  }
}

TEST_CASE("joint diagonalization invariants") {
  Rng rng = substream(33, {});
  for (int t = 0; t < 100; ++t) {
    const Index p = 2 + t % 4;
    const int k = 2 + t % 3;
    const Matrix m0 = random_spd(p, rng);
    std::vector<Matrix> ms;
    for (int l = 0; l < k; ++l) ms.push_back(random_symmetric(p, rng));
    const UnmixingResult r = joint_diagonalize(m0, ms);
    CHECK((r.gamma * m0 * r.gamma.transpose() - Matrix::Identity(p, p)).norm() < 1e-8);
    check_sign_convention(r.gamma);
    REQUIRE(r.criterion_trace.size() == static_cast<std::size_t>(r.sweeps) + 1);
    for (std::size_t s = 1; s < r.criterion_trace.size(); ++s)
      CHECK(r.criterion_trace[s] >= r.criterion_trace[s - 1] - 1e-13);
    const Matrix w = whitener(m0);
    double bound = 0.0;
    for (const auto& m : ms) bound += (w * m * w).squaredNorm();
    CHECK(r.criterion <= bound + 1e-9);
    CHECK(r.criterion == doctest::Approx(criterion(r.gamma, ms)).epsilon(1e-12));
    // Rows ordered by their criterion contribution.
    for (Index j = 0; j + 1 < p; ++j) {
      double a = 0.0, b = 0.0;
      for (const auto& lam : r.lambdas) a += lam(j) * lam(j), b += lam(j + 1) * lam(j + 1);
      CHECK(a >= b);
    }
  }
}

TEST_CASE("exact joint diagonalizability attains the Frobenius bound") {
  Rng rng = substream(34, {});
  const Matrix a = random_matrix(4, 4, rng);
  const Matrix m0 = a * a.transpose();
  std::vector<Matrix> ms;
  for (int l = 0; l < 3; ++l) {
    const Vector d = random_matrix(4, 1, rng).col(0);
    ms.push_back(a * d.asDiagonal() * a.transpose());
  }
  const UnmixingResult r = joint_diagonalize(m0, ms, {.tol = 1e-15});
  const Matrix w = whitener(m0);
  double bound = 0.0;
  for (const auto& m : ms) bound += (w * m * w).squaredNorm();
  CHECK(r.criterion == doctest::Approx(bound).epsilon(1e-10));
  // Recovers a^{-1} up to row signs and order.
  const Matrix prod = r.gamma * a;
  for (Index i = 0; i < 4; ++i) CHECK(prod.row(i).cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("canonicalization is idempotent") {
  Rng rng = substream(35, {});
  for (int t = 0; t < 50; ++t) {
    const Index p = 2 + t % 3;
    std::vector<Matrix> ms{random_symmetric(p, rng), random_symmetric(p, rng)};
    const UnmixingResult once = canonicalize(random_matrix(p, p, rng), ms);
    const UnmixingResult twice = canonicalize(once.gamma, ms);
    CHECK(twice.gamma == once.gamma);
    for (Index i = 0; i < p; ++i) {
      CHECK(twice.canonical_perm[i] == i);
      CHECK(twice.canonical_signs(i) == 1.0);
    }
  }
  SUBCASE("zero row sum falls back to the first nonzero entry") {
    Matrix g(2, 2);
    g << -1, 1, 0, 2;
    std::vector<Matrix> ms{Matrix::Identity(2, 2)};
    const UnmixingResult r = canonicalize(g, ms);
    for (Index i = 0; i < 2; ++i) {
      const Index first = r.gamma(i, 0) != 0.0 ? 0 : 1;
      CHECK(r.gamma(i, first) > 0.0);
    }
  }
}

TEST_CASE("pair and joint agree for a single matrix") {
  Rng rng = substream(36, {});
  for (int t = 0; t < 100; ++t) {
    const Index p = 2 + t % 3;
    const Matrix m0 = random_spd(p, rng);
    const Matrix mf = random_symmetric(p, rng);
    const std::vector<Matrix> ms{mf};
    const UnmixingResult pair = pair_diagonalize(m0, mf);
    const UnmixingResult joint = joint_diagonalize(m0, ms, {.max_sweeps = 200});
    CHECK(sbss::test::rel_diff(pair.gamma, joint.gamma) < 1e-6);
  }
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(JointDiagConfig{.max_sweeps = 0}.validate(), InvalidArgument);
  CHECK_THROWS_AS(JointDiagConfig{.tol = 0.0}.validate(), InvalidArgument);
  CHECK_THROWS_AS(JointDiagConfig{.rotation_threshold = -1.0}.validate(), InvalidArgument);
  CHECK_NOTHROW(JointDiagConfig{}.validate());
}

TEST_CASE("identifiability") {
  auto d = [](double a, double b, double c) { return diag3(a, b, c); };
  std::vector<Matrix> one{d(3, 2, 1)};
  CHECK(identifiability_check(one, 0.5).ok);
  std::vector<Matrix> fail{d(1, 1, 2), d(1, 1, 3)};
  const Identifiability bad = identifiability_check(fail, 1e-6);
  CHECK_FALSE(bad.ok);
  REQUIRE(bad.offending.has_value());
  CHECK(bad.offending->first == 0);
  CHECK(bad.offending->second == 1);
  std::vector<Matrix> pass{d(1, 1, 2), d(1, 4, 3)};
  CHECK(identifiability_check(pass, 1.0).ok);
  CHECK_FALSE(identifiability_check(pass, 1.5).ok);
}
