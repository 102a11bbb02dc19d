#include "doctest.h"

#include <cmath>

#include "sbss/error.hpp"
#include "sbss/field_sim.hpp"
#include "sbss/metrics.hpp"
#include "sbss/pipeline.hpp"
#include "test_util.hpp"

using namespace sbss;
using sbss::test::random_matrix;

namespace {

FieldSample latent_sample(std::uint64_t seed) {
  Rng rng = substream(seed, {1});
  const LocationSet locs = gen_nested_squares(200, 2, rng);
  Rng draw = substream(seed, {2});
  return simulate_latent(locs, LatentSpec::sim1(), draw);
}

}  // namespace

TEST_CASE("affine equivariance") {
  const FieldSample z = latent_sample(60);
  Rng rng = substream(61, {});
  for (const std::vector<Kernel>& ks :
       {std::vector<Kernel>{Kernel::ring(1, 2)}, std::vector<Kernel>{Kernel::ball(1), Kernel::ring(1, 2)}}) {
    for (bool centered : {false, true}) {
      const SbssFit fz = fit(z, ks, centered);
      CHECK(mdi(fz.unmixing.gamma, Matrix::Identity(3, 3)).value < 0.3);
      for (int t = 0; t < 5; ++t) {
        const Matrix omega = random_mixing(3, rng, 20.0);
        const SbssFit fx = fit(mix(z, omega), ks, centered, {.tol = 1e-15});
        const Matrix matched = match_rows(fx.unmixing.gamma * omega, fz.unmixing.gamma);
        CHECK((matched - fz.unmixing.gamma).norm() < 1e-6);
        CHECK(mdi(fx.unmixing.gamma, omega).value ==
              doctest::Approx(mdi(fz.unmixing.gamma, Matrix::Identity(3, 3)).value).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("scalar field") {
  Rng rng = substream(62, {});
  const LocationSet locs = gen_rectangle_grid(5);
  const FieldSample s(locs, random_matrix(locs.size(), 1, rng));
  const SbssFit f = fit(s, {Kernel::ball(1)}, false);
  const double m0 = s.values().squaredNorm() / static_cast<double>(locs.size());
  CHECK(f.unmixing.gamma(0, 0) == doctest::Approx(1.0 / std::sqrt(m0)).epsilon(1e-12));
  CHECK(sbss::test::rel_diff(f.scores, s.values() / std::sqrt(m0)) < 1e-12);
}

TEST_CASE("white noise has no spatial signal") {
  Rng rng = substream(63, {});
  const LocationSet locs = gen_rectangle_grid(14);
  const ScatterOperator op(locs, {Kernel::identity(), Kernel::ball(1)});
  const int reps = 200;
  Vector sum = Vector::Zero(3), sum_sq = Vector::Zero(3);
  for (int r = 0; r < reps; ++r) {
    Rng draw = substream(64, {static_cast<std::uint64_t>(r)});
    const SbssFit f = fit(op, random_matrix(locs.size(), 3, draw), false);
    CHECK(f.unmixing.status == SolverStatus::Converged);
    // Ball(1) includes lag 0, which contributes exactly 1 after whitening.
    const Vector lam = f.unmixing.lambdas[0].array() - 1.0;
    sum += lam;
    sum_sq += lam.cwiseProduct(lam);
  }
  const Vector mean = sum / reps;
  const Vector se = ((sum_sq / reps - mean.cwiseProduct(mean)) / (reps - 1.0)).cwiseSqrt();
  // The sorted extremes are biased away from zero; the average is not.
  CHECK(std::abs(mean.mean()) <= 4.0 * se.maxCoeff());
  CHECK(std::abs(mean(1)) <= 4.0 * se(1));
}

TEST_CASE("transform and scores") {
  const FieldSample z = latent_sample(65);
  Rng rng = substream(66, {});
  const FieldSample x = mix(z, random_mixing(3, rng));
  for (bool centered : {false, true}) {
    const SbssFit f = fit(x, {Kernel::ball(1), Kernel::ring(1, 2)}, centered);
    CHECK(transform(f, x) == f.scores);
    const Matrix row = x.values().topRows(1);
    const Matrix one = transform(f, row);
    for (Index j = 0; j < 3; ++j) {
      double expected = 0.0;
      for (Index k = 0; k < 3; ++k) expected += f.unmixing.gamma(j, k) * (row(0, k) - f.column_means(k));
      CHECK(one(0, j) == doctest::Approx(expected).epsilon(1e-14));
    }
    const Matrix cov = f.scores.transpose() * f.scores / static_cast<double>(x.size());
    CHECK((cov - Matrix::Identity(3, 3)).norm() < 1e-8);
    if (!centered) CHECK(f.column_means.isZero(0.0));
  }
  SbssFit identity;
  identity.unmixing.gamma = Matrix::Identity(3, 3);
  identity.column_means = Vector::Zero(3);
  CHECK(transform(identity, x) == x.values());
  CHECK_THROWS_AS(transform(identity, Matrix::Ones(4, 2)), InvalidArgument);
}

TEST_CASE("errors") {
  const FieldSample z = latent_sample(67);
  CHECK_THROWS_AS(fit(z, {}, false), InvalidArgument);
  CHECK_THROWS_AS(fit(z, {Kernel::identity()}, false), InvalidArgument);
  Matrix c(3, 1);
  c << 0, 1, 2;
  CHECK_THROWS_AS(fit(FieldSample(LocationSet(c), Matrix::Ones(3, 3)), {Kernel::ball(1)}, false),
                  InvalidArgument);
  Matrix rank_deficient = z.values();
  rank_deficient.col(2) = rank_deficient.col(0);
  CHECK_THROWS_AS(fit(FieldSample(z.locations(), rank_deficient), {Kernel::ball(1)}, false), NotPositiveDefinite);
  const ScatterOperator bad(z.locations(), {Kernel::ball(1)});
  CHECK_THROWS_AS(fit(bad, z.values(), false), InvalidArgument);
}
