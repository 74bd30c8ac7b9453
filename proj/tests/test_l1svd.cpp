#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rbfcoreset/l1svd.hpp"
#include "rbfcoreset/rng.hpp"

using namespace rbfcoreset;

namespace {

Matrix random_rows(Index n, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::normal_distribution<double> gauss;
  Matrix rows(n, k);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j) rows(i, j) = gauss(rng);
  return rows;
}

// Direct evaluation of the functional the conditioner sandwiches.
double weighted_l1(const Matrix& rows, const Vector& weights, const Vector& x) {
  return (weights.asDiagonal() * rows * x).lpNorm<1>();
}

void check_sandwich(const Matrix& rows, const Vector& weights,
                    const L1Conditioner& cond, std::uint64_t seed,
                    int directions = 1000) {
  const Index k = rows.cols();
  const double sqrt_k = std::sqrt(static_cast<double>(k));
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::normal_distribution<double> gauss;
  for (int t = 0; t < directions; ++t) {
    Vector x(k);
    for (Index j = 0; j < k; ++j) x(j) = gauss(rng);
    x /= x.norm();
    const double functional = weighted_l1(rows, weights, x);
    const double quad = (cond.d_diag.asDiagonal() * (cond.v_ortho.transpose() * x)).norm();
    CHECK(quad <= functional * (1.0 + 1e-6));
    CHECK(functional <= cond.measured_distortion * sqrt_k * quad * (1.0 + 1e-6));
  }
}

}  // namespace

TEST_CASE("identity rows give the identity conditioner") {
  const Index k = 5;
  const Matrix rows = Matrix::Identity(k, k);
  const L1Conditioner cond = compute_l1_conditioner(rows, Vector::Ones(k));

  // V^T V = I and D stays within the fixed-point deflation of the identity.
  CHECK((cond.v_ortho.transpose() * cond.v_ortho - Matrix::Identity(k, k))
            .cwiseAbs()
            .maxCoeff() <= 1e-8);
  for (Index j = 0; j < k; ++j)
    CHECK(cond.d_diag(j) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK((cond.transform * (cond.d_diag.asDiagonal() * cond.v_ortho.transpose()) -
         Matrix::Identity(k, k))
            .cwiseAbs()
            .maxCoeff() <= 1e-8);
  CHECK(cond.measured_distortion <= 2.0);

  // Sum of weighted l1 functionals: sum_i |e_i . x| = ||x||_1 and the
  // conditioned rows keep unit l1 norm (up to deflation slack).
  for (Index i = 0; i < k; ++i) {
    CHECK(u_norm(cond, Vector::Unit(k, i)) == doctest::Approx(1.0).epsilon(1e-5));
  }
  check_sandwich(rows, Vector::Ones(k), cond, 11);
}

TEST_CASE("u_norm is the l1 norm of the conditioned row") {
  const Index k = 4;
  const L1Conditioner cond = compute_l1_conditioner(Matrix::Identity(k, k), Vector::Ones(k));
  Vector q(k);
  q << 1, -2, 0, 1;
  CHECK(u_norm(cond, q) == doctest::Approx(4.0).epsilon(1e-5));
  CHECK(u_norm(cond, Vector::Zero(k)) == 0.0);
  Vector wrong(k + 1);
  wrong.setOnes();
  CHECK_THROWS_AS(u_norm(cond, wrong), InvalidInput);
}

TEST_CASE("rank-one input concentrates the mass on the row direction") {
  const Index k = 4;
  Matrix rows(1, k);
  rows << 0.5, -1.0, 2.0, 0.25;
  const L1Conditioner cond = compute_l1_conditioner(rows, Vector::Ones(1));

  // Along the row the sandwich is tight.
  const Vector r = rows.row(0).transpose();
  const Vector x = r / r.norm();
  const double functional = std::abs(r.dot(x));
  const double quad = (cond.d_diag.asDiagonal() * (cond.v_ortho.transpose() * x)).norm();
  CHECK(quad <= functional * (1.0 + 1e-6));
  CHECK(functional <= std::sqrt(static_cast<double>(k)) * quad * (1.0 + 1e-6));

  // Off-direction mass is the regularization floor, orders below the row mass.
  CHECK(cond.d_diag.minCoeff() <= 1e-4 * cond.d_diag.maxCoeff());
}

TEST_CASE("random rows satisfy the sandwich with small measured distortion") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const Matrix rows = random_rows(50, 4, seed);
    const Vector weights = Vector::Ones(50);
    const L1Conditioner cond = compute_l1_conditioner(rows, weights);
    CHECK(cond.measured_distortion <= 2.0);
    check_sandwich(rows, weights, cond, seed + 100);
  }
}

TEST_CASE("nonuniform weights keep the sandwich") {
  std::mt19937_64 rng(mix_seed(17, 0));
  const Matrix rows = random_rows(80, 6, 17);
  Vector weights(80);
  for (Index i = 0; i < 80; ++i) weights(i) = 0.05 + 3.0 * uniform_unit(rng);
  weights(5) = 0.0;  // zero-weight rows must be tolerated
  const L1Conditioner cond = compute_l1_conditioner(rows, weights);
  CHECK(cond.measured_distortion <= 2.0);
  check_sandwich(rows, weights, cond, 18);
}

TEST_CASE("sum of weighted conditioned-row norms obeys the k^1.5 budget") {
  for (std::uint64_t seed : {4ULL, 5ULL}) {
    const Index n = 120, k = 5;
    const Matrix rows = random_rows(n, k, seed);
    std::mt19937_64 rng(mix_seed(seed, 2));
    Vector weights(n);
    for (Index i = 0; i < n; ++i) weights(i) = 0.1 + uniform_unit(rng);
    const L1Conditioner cond = compute_l1_conditioner(rows, weights);
    const Vector norms = u_norms(cond, rows);
    const double total = weights.dot(norms);
    CHECK(total <= cond.measured_distortion * std::pow(static_cast<double>(k), 1.5));
  }
}

TEST_CASE("scaling the weights scales D and leaves w ||U(p)||_1 invariant") {
  const Index n = 60, k = 4;
  const Matrix rows = random_rows(n, k, 23);
  Vector weights(n);
  std::mt19937_64 rng(mix_seed(23, 3));
  for (Index i = 0; i < n; ++i) weights(i) = 0.2 + uniform_unit(rng);

  const L1Conditioner base = compute_l1_conditioner(rows, weights);
  const Vector base_terms = weights.cwiseProduct(u_norms(base, rows));
  for (double lambda : {0.1, 10.0}) {
    const L1Conditioner scaled = compute_l1_conditioner(rows, lambda * weights);
    const Vector lambda_d = lambda * base.d_diag;
    CHECK((scaled.d_diag - lambda_d).cwiseAbs().maxCoeff() <=
          1e-8 * lambda_d.maxCoeff());
    const Vector scaled_terms =
        (lambda * weights).cwiseProduct(u_norms(scaled, rows));
    for (Index i = 0; i < n; ++i)
      CHECK(scaled_terms(i) == doctest::Approx(base_terms(i)).epsilon(1e-8));
  }
}

TEST_CASE("the l2 fallback reports its distortion honestly") {
  const Matrix rows = random_rows(200, 4, 31);
  const Vector weights = Vector::Ones(200);
  const L1Conditioner cond =
      compute_l1_conditioner(rows, weights, ConditionerMethod::L2Svd);
  CHECK(cond.method_tag == ConditionerMethod::L2Svd);
  CHECK(cond.measured_distortion >= 1.0);
  // The l2 Gram lower side holds unconditionally.
  std::mt19937_64 rng(mix_seed(31, 4));
  std::normal_distribution<double> gauss;
  for (int t = 0; t < 500; ++t) {
    Vector x(4);
    for (Index j = 0; j < 4; ++j) x(j) = gauss(rng);
    const double functional = weighted_l1(rows, weights, x);
    const double quad = (cond.d_diag.asDiagonal() * (cond.v_ortho.transpose() * x)).norm();
    CHECK(quad <= functional * (1.0 + 1e-9));
    CHECK(functional <= cond.measured_distortion * 2.0 * quad * (1.0 + 1e-6));
  }
}

TEST_CASE("degenerate inputs are rejected") {
  CHECK_THROWS_AS(compute_l1_conditioner(Matrix(), Vector()), InvalidInput);
  const Matrix rows = Matrix::Identity(3, 3);
  CHECK_THROWS_AS(compute_l1_conditioner(rows, Vector::Zero(3)), InvalidInput);
  CHECK_THROWS_AS(compute_l1_conditioner(rows, Vector::Ones(2)), InvalidInput);
  Vector bad = Vector::Ones(3);
  bad(1) = -0.5;
  CHECK_THROWS_AS(compute_l1_conditioner(rows, bad), InvalidInput);
}

TEST_CASE("n < k inputs are handled through the rank floor") {
  const Matrix rows = random_rows(3, 6, 41);
  const L1Conditioner cond = compute_l1_conditioner(rows, Vector::Ones(3));
  CHECK(cond.d_diag.minCoeff() > 0.0);
  // Row-space directions still satisfy the sandwich.
  for (Index i = 0; i < rows.rows(); ++i) {
    const Vector x = rows.row(i).transpose().normalized();
    const double functional = weighted_l1(rows, Vector::Ones(3), x);
    const double quad = (cond.d_diag.asDiagonal() * (cond.v_ortho.transpose() * x)).norm();
    CHECK(quad <= functional * (1.0 + 1e-6));
  }
}
