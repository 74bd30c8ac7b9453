#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rbfcoreset/rbfnn.hpp"
#include "rbfcoreset/rng.hpp"

using namespace rbfcoreset;

namespace {

WeightedPointSet random_labeled_instance(Index n, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::normal_distribution<double> gauss;
  Matrix pts(n, d);
  Vector weights(n), labels(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) pts(i, j) = 0.5 * gauss(rng);
    weights(i) = 0.2 + uniform_unit(rng);
    labels(i) = gauss(rng);
  }
  return make_weighted_set(pts, weights, labels);
}

Matrix random_centers(Index L, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::normal_distribution<double> gauss;
  Matrix centers(L, d);
  for (Index i = 0; i < L; ++i)
    for (Index j = 0; j < d; ++j) centers(i, j) = 0.5 * gauss(rng);
  return centers;
}

double regularized_objective(const WeightedPointSet& data, const RBFNNModel& model) {
  double acc = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    const Vector p = data.points.row(i).transpose();
    const double diff = (*data.labels)(i) - rbfnn_eval(model, p);
    acc += data.weights(i) * diff * diff;
  }
  return acc + model.ridge * model.alphas.squaredNorm();
}

}  // namespace

TEST_CASE("rbfnn_eval closed forms") {
  RBFNNModel model;
  model.centers = Matrix::Zero(1, 2);
  model.alphas = Vector::Ones(1);
  CHECK(rbfnn_eval(model, Vector(Vector::Zero(2))) == 1.0);

  model.alphas(0) = 0.0;
  Vector x(2);
  x << 0.7, -0.4;
  CHECK(rbfnn_eval(model, x) == 0.0);

  RBFNNModel two;
  two.centers = Matrix(2, 1);
  two.centers << 0.0, 1.0;
  two.alphas = Vector::Ones(2);
  Vector origin(1);
  origin << 0.0;
  CHECK(rbfnn_eval(two, origin) == doctest::Approx(1.3678794411714423).epsilon(1e-15));
}

TEST_CASE("rbfnn_eval is translation consistent") {
  std::mt19937_64 rng(mix_seed(50, 0));
  std::normal_distribution<double> gauss;
  RBFNNModel model;
  model.centers = random_centers(4, 3, 50);
  model.alphas = Vector(4);
  for (Index i = 0; i < 4; ++i) model.alphas(i) = gauss(rng);

  for (int t = 0; t < 100; ++t) {
    Vector x(3), shift(3);
    for (Index j = 0; j < 3; ++j) {
      x(j) = gauss(rng);
      shift(j) = gauss(rng);
    }
    RBFNNModel moved = model;
    moved.centers.rowwise() += shift.transpose();
    CHECK(std::abs(rbfnn_eval(model, x) - rbfnn_eval(moved, Vector(x + shift))) <=
          1e-12);
  }
}

TEST_CASE("rbfnn_eval rejects dimension mismatches") {
  RBFNNModel model;
  model.centers = Matrix::Zero(1, 2);
  model.alphas = Vector::Ones(1);
  CHECK_THROWS_AS(rbfnn_eval(model, Vector(Vector::Zero(3))), InvalidInput);
}

TEST_CASE("fitting recovers a generating center weight exactly") {
  std::mt19937_64 rng(mix_seed(51, 0));
  std::normal_distribution<double> gauss;
  const Index n = 40;
  Matrix pts(n, 2);
  for (Index i = 0; i < n; ++i) {
    pts(i, 0) = gauss(rng);
    pts(i, 1) = gauss(rng);
  }
  Matrix center(1, 2);
  center << 0.25, -0.5;
  Vector labels(n);
  for (Index i = 0; i < n; ++i)
    labels(i) = 2.0 * std::exp(-(pts.row(i) - center.row(0)).squaredNorm());
  const WeightedPointSet data = make_weighted_set(pts, Vector::Ones(n), labels);

  const RBFNNModel model = fit_output_weights(data, center, 0.0);
  CHECK(model.alphas(0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(!model.min_norm_fallback);
}

TEST_CASE("zero labels give zero weights") {
  WeightedPointSet data = random_labeled_instance(30, 2, 52);
  data.labels = Vector::Zero(30);
  const RBFNNModel model = fit_output_weights(data, random_centers(4, 2, 52), 0.0);
  CHECK(model.alphas.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("fit matches an independent least-squares route") {
  for (std::uint64_t seed : {53ULL, 54ULL, 55ULL}) {
    const WeightedPointSet data = random_labeled_instance(60, 2, seed);
    const Matrix centers = random_centers(5, 2, seed);
    const double ridge = 1e-10;
    const RBFNNModel model = fit_output_weights(data, centers, ridge);

    // Oracle: minimize ||sqrt(W)(y - Phi a)||^2 + ridge ||a||^2 as a stacked
    // unregularized least-squares problem solved by SVD.
    Matrix design(data.size(), centers.rows());
    for (Index i = 0; i < centers.rows(); ++i)
      design.col(i) = (-(data.points.rowwise() - centers.row(i))
                            .rowwise()
                            .squaredNorm()
                            .array())
                          .exp();
    const Vector sqrt_w = data.weights.cwiseSqrt();
    Matrix stacked(data.size() + centers.rows(), centers.rows());
    stacked.topRows(data.size()) = sqrt_w.asDiagonal() * design;
    stacked.bottomRows(centers.rows()) =
        std::sqrt(ridge) * Matrix::Identity(centers.rows(), centers.rows());
    Vector target(data.size() + centers.rows());
    target.head(data.size()) = sqrt_w.cwiseProduct(*data.labels);
    target.tail(centers.rows()).setZero();
    const Vector oracle =
        stacked.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(target);

    for (Index i = 0; i < centers.rows(); ++i)
      CHECK(model.alphas(i) == doctest::Approx(oracle(i)).epsilon(1e-6));
  }
}

TEST_CASE("coordinate perturbations never improve the fitted objective") {
  for (std::uint64_t seed = 60; seed < 80; ++seed) {
    const WeightedPointSet data = random_labeled_instance(25, 2, seed);
    const Matrix centers = random_centers(3, 2, seed);
    const RBFNNModel model = fit_output_weights(data, centers, 1e-8);
    const double base = regularized_objective(data, model);
    for (Index i = 0; i < 3; ++i) {
      for (const double delta : {1e-3, -1e-3}) {
        RBFNNModel perturbed = model;
        perturbed.alphas(i) += delta;
        CHECK(regularized_objective(data, perturbed) >=
              base - 1e-12 * std::max(1.0, base));
      }
    }
  }
}

TEST_CASE("singular unregularized systems fall back to the minimum-norm solution") {
  // Duplicate centers make the Gram matrix exactly singular.
  const WeightedPointSet data = random_labeled_instance(20, 2, 81);
  Matrix centers(2, 2);
  centers << 0.2, 0.1, 0.2, 0.1;
  const RBFNNModel model = fit_output_weights(data, centers, 0.0);
  CHECK(model.min_norm_fallback);
  CHECK(model.alphas.allFinite());
  // Minimum-norm splits the coefficient evenly across the duplicates.
  CHECK(model.alphas(0) == doctest::Approx(model.alphas(1)).epsilon(1e-8));
}

TEST_CASE("objective decomposition matches the direct objective") {
  std::mt19937_64 rng(mix_seed(82, 0));
  std::normal_distribution<double> gauss;
  for (int t = 0; t < 200; ++t) {
    const WeightedPointSet data =
        random_labeled_instance(20, 2, 8200 + static_cast<std::uint64_t>(t));
    RBFNNModel model;
    model.centers = random_centers(4, 2, 8200 + static_cast<std::uint64_t>(t));
    model.alphas = Vector(4);
    for (Index i = 0; i < 4; ++i) model.alphas(i) = gauss(rng);
    model.ridge = 0.0;

    const ObjectiveDecomposition parts = training_objective(data, model);
    const double direct = regularized_objective(data, model);
    CHECK(parts.total == doctest::Approx(direct).epsilon(1e-9));
    CHECK(parts.quadratic_term >= 0.0);
  }
}

TEST_CASE("objective decomposition trivial cases") {
  WeightedPointSet data = random_labeled_instance(15, 2, 83);
  RBFNNModel model;
  model.centers = random_centers(3, 2, 83);
  model.alphas = Vector::Zero(3);
  const ObjectiveDecomposition zero_alpha = training_objective(data, model);
  CHECK(zero_alpha.quadratic_term == 0.0);
  CHECK(zero_alpha.total ==
        doctest::Approx(data.weights.dot(data.labels->cwiseProduct(*data.labels)))
            .epsilon(1e-12));

  data.labels = Vector::Zero(15);
  model.alphas = Vector::Ones(3);
  const ObjectiveDecomposition zero_labels = training_objective(data, model);
  CHECK(zero_labels.total == doctest::Approx(zero_labels.quadratic_term).epsilon(1e-12));
  CHECK(zero_labels.quadratic_term >= 0.0);
}

TEST_CASE("k-means centers are deterministic and cover the data") {
  std::mt19937_64 rng(mix_seed(84, 0));
  Matrix pts(200, 2);
  for (Index i = 0; i < 200; ++i) {
    pts(i, 0) = uniform_unit(rng);
    pts(i, 1) = uniform_unit(rng);
  }
  const Matrix a = kmeans_centers(pts, 8, 11);
  const Matrix b = kmeans_centers(pts, 8, 11);
  CHECK(a == b);
  for (Index i = 0; i < a.rows(); ++i) {
    CHECK(a(i, 0) >= -0.05);
    CHECK(a(i, 0) <= 1.05);
  }
  CHECK_THROWS_AS(kmeans_centers(pts, 0, 1), InvalidInput);
  CHECK_THROWS_AS(kmeans_centers(pts, 201, 1), InvalidInput);
}

TEST_CASE("target function value at the origin") {
  CHECK(funcapprox_target(Vector(Vector::Zero(2))) ==
        doctest::Approx(1.2).epsilon(1e-15));
}

TEST_CASE("selecting everything reproduces the full-data fit") {
  const FunctionApproxReport report =
      function_approx_experiment(300, 300, 2, 12, 1e-8, 99);
  for (const double rmse : report.uniform_arm.rmse_per_seed)
    CHECK(rmse == doctest::Approx(report.full_rmse).epsilon(1e-12));
  for (const double rmse : report.coreset_arm.rmse_per_seed)
    CHECK(rmse == doctest::Approx(report.full_rmse).epsilon(1e-12));
}

TEST_CASE("experiment runs end to end at desk scale") {
  const FunctionApproxReport report =
      function_approx_experiment(600, 150, 3, 24, 1e-8, 7);
  CHECK(report.uniform_arm.rmse_per_seed.size() == 3);
  CHECK(report.coreset_arm.rmse_per_seed.size() == 3);
  CHECK(std::isfinite(report.uniform_arm.median_rmse));
  CHECK(std::isfinite(report.coreset_arm.median_rmse));
  // The full fit should track the target closely at this size.
  CHECK(report.full_rmse < 0.1);
  CHECK_THROWS_AS(function_approx_experiment(100, 200, 1, 8, 0.0, 1), InvalidInput);
}
