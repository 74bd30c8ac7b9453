#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rbfcoreset/evaluation.hpp"
#include "rbfcoreset/geometry.hpp"
#include "rbfcoreset/rng.hpp"
#include "rbfcoreset/sampling.hpp"
#include "rbfcoreset/types.hpp"

namespace rbfcoreset {

/// Radial basis function network with fixed centers and a linear output
/// layer: phi(x) = sum_i alpha_i exp(-||x - c_i||^2).
struct RBFNNModel {
  Matrix centers;  // L x d
  Vector alphas;   // L
  Real ridge = 0.0;
  bool min_norm_fallback = false;  // singular unregularized fit fell back to min-norm
};

namespace detail {

inline Matrix design_matrix(const Matrix& points, const Matrix& centers) {
  Matrix design(points.rows(), centers.rows());
  for (Index i = 0; i < centers.rows(); ++i) {
    design.col(i) =
        (-(points.rowwise() - centers.row(i)).rowwise().squaredNorm().array())
            .exp();
  }
  return design;
}

}  // namespace detail

inline Real rbfnn_eval(const RBFNNModel& model, const Vector& x) {
  if (x.size() != model.centers.cols())
    throw InvalidInput("rbfnn_eval: dimension mismatch");
  Vector sq = (model.centers.rowwise() - x.transpose()).rowwise().squaredNorm();
  return model.alphas.dot((-sq.array()).exp().matrix());
}

/// Batched evaluation over rows of `points`.
inline Vector rbfnn_eval(const RBFNNModel& model, const Matrix& points) {
  if (points.cols() != model.centers.cols())
    throw InvalidInput("rbfnn_eval: dimension mismatch");
  return detail::design_matrix(points, model.centers) * model.alphas;
}

/// Weighted ridge least squares for the output layer: minimizes
/// sum_p w(p) (y(p) - phi(p))^2 + ridge ||alpha||^2 via the normal equations.
/// With ridge = 0 and a singular system the solver falls back to the
/// minimum-norm least-squares solution and flags it on the model.
inline RBFNNModel fit_output_weights(const WeightedPointSet& data,
                                     const Matrix& centers, Real ridge) {
  validate(data);
  if (!data.labels) throw InvalidInput("fit_output_weights: labels required");
  if (centers.rows() < 1) throw InvalidInput("fit_output_weights: need at least one center");
  if (centers.cols() != data.dim())
    throw InvalidInput("fit_output_weights: center dimension mismatch");
  if (!(ridge >= 0)) throw InvalidInput("fit_output_weights: ridge must be >= 0");

  const Index L = centers.rows();
  const Matrix design = detail::design_matrix(data.points, centers);
  const Matrix weighted = data.weights.asDiagonal() * design;
  Matrix gram = design.transpose() * weighted;
  gram.diagonal().array() += ridge;
  const Vector rhs = weighted.transpose() * (*data.labels);

  RBFNNModel model;
  model.centers = centers;
  model.ridge = ridge;
  Eigen::LDLT<Matrix> ldlt(gram);
  model.alphas = ldlt.solve(rhs);
  const Real rhs_norm = rhs.norm();
  const Real residual = (gram * model.alphas - rhs).norm();
  const Vector pivots = ldlt.vectorD().cwiseAbs();
  const bool rank_deficient = pivots.minCoeff() <= 1e-12 * pivots.maxCoeff();
  if (ldlt.info() != Eigen::Success ||
      (ridge == 0 &&
       (rank_deficient || residual > 1e-8 * std::max(rhs_norm, 1.0)))) {
    // Minimum-norm solve of the weighted design system.
    const Vector sqrt_w = data.weights.cwiseSqrt();
    Matrix scaled = sqrt_w.asDiagonal() * design;
    Vector target = sqrt_w.cwiseProduct(*data.labels);
    if (ridge > 0) {
      scaled.conservativeResize(scaled.rows() + L, Eigen::NoChange);
      scaled.bottomRows(L) = std::sqrt(ridge) * Matrix::Identity(L, L);
      target.conservativeResize(target.size() + L);
      target.tail(L).setZero();
    }
    model.alphas = scaled.completeOrthogonalDecomposition().solve(target);
    model.min_norm_fallback = true;
  }
  return model;
}

/// The pieces of the weighted training objective
///   sum_p w(p) (y(p) - phi(p))^2
///     = sum_p w(p) y(p)^2 - 2 sum_i alpha_i * cross_i + quadratic
/// with cross_i = sum_p w(p) y(p) exp(-||p-c_i||^2) and
/// quadratic = sum_p w(p) phi(p)^2.
struct ObjectiveDecomposition {
  Real total = 0.0;
  Vector cross_terms;  // L
  Real quadratic_term = 0.0;
};

inline ObjectiveDecomposition training_objective(const WeightedPointSet& data,
                                                 const RBFNNModel& model) {
  validate(data);
  if (!data.labels) throw InvalidInput("training_objective: labels required");
  if (model.centers.cols() != data.dim())
    throw InvalidInput("training_objective: dimension mismatch");

  const Matrix design = detail::design_matrix(data.points, model.centers);
  const Vector& y = *data.labels;
  const Vector wy = data.weights.cwiseProduct(y);
  ObjectiveDecomposition out;
  out.cross_terms = design.transpose() * wy;
  const Vector response = design * model.alphas;
  out.quadratic_term = data.weights.dot(response.cwiseProduct(response));
  out.total = data.weights.dot(y.cwiseProduct(y)) -
              2.0 * model.alphas.dot(out.cross_terms) + out.quadratic_term;
  return out;
}

/// Plain k-means (k-means++ seeding, fixed Lloyd iteration budget) used to
/// place shared centers for the comparison arms. Deterministic given the seed.
inline Matrix kmeans_centers(const Matrix& points, Index k, std::uint64_t seed,
                             int iterations = 25) {
  const Index n = points.rows();
  if (k < 1 || k > n) throw InvalidInput("kmeans_centers: need 1 <= k <= n");
  std::mt19937_64 rng(mix_seed(seed, 0x6b6d6e73ULL));

  Matrix centers(k, points.cols());
  Vector min_dist = Vector::Constant(n, std::numeric_limits<Real>::infinity());
  const Index first = static_cast<Index>(uniform_unit(rng) * static_cast<Real>(n));
  centers.row(0) = points.row(std::min(first, n - 1));
  for (Index c = 1; c < k; ++c) {
    min_dist = min_dist.cwiseMin(
        (points.rowwise() - centers.row(c - 1)).rowwise().squaredNorm());
    const Real mass = min_dist.sum();
    Index chosen = n - 1;
    if (mass > 0) {
      Real u = uniform_unit(rng) * mass;
      for (Index i = 0; i < n; ++i) {
        u -= min_dist(i);
        if (u <= 0) {
          chosen = i;
          break;
        }
      }
    }
    centers.row(c) = points.row(chosen);
  }

  std::vector<Index> assignment(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < iterations; ++it) {
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      Real best_d = (points.row(i) - centers.row(0)).squaredNorm();
      for (Index c = 1; c < k; ++c) {
        const Real dist = (points.row(i) - centers.row(c)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      assignment[static_cast<std::size_t>(i)] = best;
    }
    Matrix sums = Matrix::Zero(k, points.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(assignment[static_cast<std::size_t>(i)]) += points.row(i);
      counts(assignment[static_cast<std::size_t>(i)]) += 1;
    }
    for (Index c = 0; c < k; ++c) {
      if (counts(c) > 0) {
        centers.row(c) = sums.row(c) / static_cast<Real>(counts(c));
      } else {
        const Index replacement =
            static_cast<Index>(uniform_unit(rng) * static_cast<Real>(n));
        centers.row(c) = points.row(std::min(replacement, n - 1));
      }
    }
  }
  return centers;
}

/// The benchmark target for the function-approximation comparison:
/// f(x) = exp(-||x||^2) + 0.2 cos(4 ||x||).
inline Real funcapprox_target(const Vector& x) {
  const Real r = x.norm();
  return std::exp(-r * r) + 0.2 * std::cos(4.0 * r);
}

struct FunctionApproxArm {
  std::string name;
  std::vector<Real> rmse_per_seed;
  Real median_rmse = 0.0;
};

struct FunctionApproxReport {
  int n_points = 0;
  int subset_size = 0;
  int center_count = 0;
  Real ridge = 0.0;
  Real full_rmse = 0.0;  // trained on all points, subset arms aim at this
  FunctionApproxArm uniform_arm;
  FunctionApproxArm coreset_arm;
  Matrix train_points;   // kept for surface dumps
  RBFNNModel full_model;
  RBFNNModel last_uniform_model;
  RBFNNModel last_coreset_model;
};

namespace detail {

inline Real median(std::vector<Real> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline Real rmse_against_target(const RBFNNModel& model, const Matrix& test) {
  const Vector predicted = rbfnn_eval(model, test);
  Real acc = 0.0;
  for (Index i = 0; i < test.rows(); ++i) {
    const Real diff = predicted(i) - funcapprox_target(test.row(i).transpose());
    acc += diff * diff;
  }
  return std::sqrt(acc / static_cast<Real>(test.rows()));
}

}  // namespace detail

/// Trains the same fixed-center RBFNN on (a) the full data, (b) a uniform
/// subset, (c) an RBF sensitivity coreset, and reports test RMSE against the
/// ground-truth function per subsampling seed. Inputs are drawn uniformly
/// from the disk of radius 1.5 in 2D (which covers the target's ripples);
/// centers come from one k-means run on the full data and are shared by every
/// arm, so only the subset choice varies. The sensitivity profile is computed
/// once and re-drawn per seed.
inline FunctionApproxReport function_approx_experiment(int n_points, int subset_size,
                                                       int seeds, int center_count,
                                                       Real ridge,
                                                       std::uint64_t master_seed) {
  if (n_points < 1 || subset_size < 1 || subset_size > n_points)
    throw InvalidInput("function_approx_experiment: need 1 <= subset_size <= n_points");
  if (seeds < 1) throw InvalidInput("function_approx_experiment: seeds must be >= 1");

  constexpr Real kDomainRadius = 1.5;
  constexpr int kTestPoints = 2000;

  const auto sample_disk = [&](int count, std::uint64_t stream) {
    const std::vector<Vector> raw =
        sample_queries(2, count, kDomainRadius, mix_seed(master_seed, stream));
    Matrix pts(count, 2);
    for (int i = 0; i < count; ++i) pts.row(i) = raw[static_cast<std::size_t>(i)].transpose();
    return pts;
  };

  Matrix train = sample_disk(n_points, 0x7472ULL);
  Vector labels(n_points);
  for (int i = 0; i < n_points; ++i)
    labels(i) = funcapprox_target(train.row(i).transpose());
  WeightedPointSet data =
      make_weighted_set(train, Vector::Ones(n_points), labels);

  const Matrix test = sample_disk(kTestPoints, 0x7465ULL);
  const Matrix centers = kmeans_centers(train, center_count, mix_seed(master_seed, 0x6374ULL));

  FunctionApproxReport report;
  report.n_points = n_points;
  report.subset_size = subset_size;
  report.center_count = center_count;
  report.ridge = ridge;
  report.train_points = train;
  report.uniform_arm.name = "uniform";
  report.coreset_arm.name = "coreset";

  report.full_model = fit_output_weights(data, centers, ridge);
  report.full_rmse = detail::rmse_against_target(report.full_model, test);

  // Sampling geometry lives in the unit ball; the sensitivity profile is
  // shared across seeds.
  const WeightedPointSet normalized = normalize_to_unit_ball(data);
  const SensitivityProfile profile = rbf_sensitivity_bounds(normalized, 1.0);

  // Selecting everything means using everything: both arms then coincide
  // with the full-data fit.
  const auto identity_subset = [&]() {
    Coreset coreset;
    coreset.source_n = data.size();
    coreset.m = subset_size;
    for (Index i = 0; i < data.size(); ++i) {
      coreset.indices.push_back(i);
      coreset.weights.push_back(data.weights(i));
    }
    return coreset;
  };

  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t draw_seed = mix_seed(master_seed, 0x73656564ULL + static_cast<std::uint64_t>(s));

    const Coreset uniform = subset_size == n_points
                                ? identity_subset()
                                : uniform_coreset(data, subset_size, draw_seed);
    const RBFNNModel uniform_model =
        fit_output_weights(gather(data, uniform), centers, ridge);
    report.uniform_arm.rmse_per_seed.push_back(
        detail::rmse_against_target(uniform_model, test));
    report.last_uniform_model = uniform_model;

    const Coreset coreset = subset_size == n_points
                                ? identity_subset()
                                : build_coreset(data, profile, subset_size, draw_seed);
    const RBFNNModel coreset_model =
        fit_output_weights(gather(data, coreset), centers, ridge);
    report.coreset_arm.rmse_per_seed.push_back(
        detail::rmse_against_target(coreset_model, test));
    report.last_coreset_model = coreset_model;
  }
  report.uniform_arm.median_rmse = detail::median(report.uniform_arm.rmse_per_seed);
  report.coreset_arm.median_rmse = detail::median(report.coreset_arm.rmse_per_seed);
  return report;
}

}  // namespace rbfcoreset
