#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <thread>
#include <vector>

#include "rbfcoreset/geometry.hpp"
#include "rbfcoreset/l1svd.hpp"
#include "rbfcoreset/types.hpp"

namespace rbfcoreset {

/// Per-point upper bounds s(p) on the loss sensitivities, plus their sum t.
/// The bounds drive the coreset sampling distribution s(p)/t.
struct SensitivityProfile {
  Vector bounds;  // n, strictly positive and finite
  Real total = 0.0;
  Loss loss = Loss::Rbf;
  Real radius = 0.0;  // query-ball radius (RBF only, 0 for Laplacian)
  SensitivityMode mode = SensitivityMode::Lemma;
  Real conditioner_distortion = 1.0;
  bool saturated = false;  // bounds were clamped to avoid overflow
};

namespace detail {

inline void check_unit_ball(const WeightedPointSet& set) {
  const Vector norms = set.points.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i) {
    if (norms(i) > 1.0 + 1e-12)
      throw PreconditionError(
          "point " + std::to_string(i) + " lies outside the unit ball (norm " +
              std::to_string(norms(i)) + "); normalize the data first",
          i);
  }
}

// Shared tail of both bound computations. Works in log space so that huge
// per-point constants only saturate, never poison, the distribution:
//   s(p) = exp(log_gain(p)) * (c(p)/sum_q c(q) + c(p) * norm_term(p))
// where c = exp(log_cond_weight - max log_cond_weight) is the scaled
// conditioning weight. Saturated bounds are clamped to keep the total finite.
inline SensitivityProfile assemble_profile(const Vector& log_gain,
                                           const Vector& log_cond_weight,
                                           const Vector& norm_term,
                                           Real distortion) {
  const Index n = log_gain.size();
  Real shift = -std::numeric_limits<Real>::infinity();
  for (Index i = 0; i < n; ++i) shift = std::max(shift, log_cond_weight(i));
  Vector cw(n);
  for (Index i = 0; i < n; ++i) cw(i) = std::exp(log_cond_weight(i) - shift);
  const Real cw_sum = cw.sum();

  const Real log_sat = std::log(std::numeric_limits<Real>::max()) -
                       std::log(static_cast<Real>(n)) - 10.0;
  SensitivityProfile profile;
  profile.bounds.resize(n);
  profile.conditioner_distortion = distortion;
  for (Index i = 0; i < n; ++i) {
    const Real inner = cw(i) / cw_sum + cw(i) * norm_term(i);
    Real log_s = inner > 0 ? log_gain(i) + std::log(inner)
                           : -std::numeric_limits<Real>::infinity();
    if (log_s > log_sat) {
      log_s = log_sat;
      profile.saturated = true;
    }
    profile.bounds(i) =
        std::max(std::exp(log_s), std::numeric_limits<Real>::min());
  }
  profile.total = profile.bounds.sum();
  return profile;
}

}  // namespace detail

/// Upper bounds on RBF-loss sensitivities for queries in the ball of radius R.
///
/// `Lemma` mode uses the per-point constant exp(a)(1+a) with a = 3 R^2 ||q_p||
/// and conditions on the weights u(p) = w(p) / (exp(a)(1+a)); `Algorithm1`
/// mode uses the uniform constant exp(12 R^2)(1 + 8 R^2) and conditions on w
/// directly. The per-point constants are pointwise tighter, so Lemma is the
/// default.
inline SensitivityProfile rbf_sensitivity_bounds(
    const WeightedPointSet& set, Real radius,
    SensitivityMode mode = SensitivityMode::Lemma) {
  validate(set);
  if (!(radius >= 1.0)) throw InvalidInput("rbf_sensitivity_bounds: radius must be >= 1");
  detail::check_unit_ball(set);

  const Index n = set.size();
  const LiftedPointSet lifted = lift_points(set.points);

  Vector log_gain(n);
  for (Index i = 0; i < n; ++i) {
    const Real a = 3.0 * radius * radius * lifted.lifted_norms(i);
    log_gain(i) = mode == SensitivityMode::Lemma
                      ? a + std::log1p(a)
                      : 12.0 * radius * radius + std::log1p(8.0 * radius * radius);
  }

  Vector log_cond_weight(n);
  for (Index i = 0; i < n; ++i)
    log_cond_weight(i) = std::log(set.weights(i)) - log_gain(i);

  Real shift = log_cond_weight.maxCoeff();
  Vector cond_weights(n);
  for (Index i = 0; i < n; ++i)
    cond_weights(i) = std::exp(log_cond_weight(i) - shift);

  const L1Conditioner cond = compute_l1_conditioner(lifted.lifted, cond_weights);
  const Vector norm_term = u_norms(cond, lifted.lifted);

  SensitivityProfile profile = detail::assemble_profile(
      log_gain, log_cond_weight, norm_term, cond.measured_distortion);
  profile.loss = Loss::Rbf;
  profile.radius = radius;
  profile.mode = mode;
  return profile;
}

/// Upper bounds on Laplacian-loss sensitivities, valid for unrestricted
/// queries. Queries inside the unit ball are handled through the lifted l1
/// functional with conditioning weights u(p)^2 and a square root on the
/// conditioned norm; queries outside contribute the additive term
/// exp(||p|| + sqrt(||q*||)) w(p) / sum w.
inline SensitivityProfile laplacian_sensitivity_bounds(const WeightedPointSet& set) {
  validate(set);
  detail::check_unit_ball(set);

  const Index n = set.size();
  const LiftedPointSet lifted = lift_points(set.points);

  Vector log_gain(n);
  for (Index i = 0; i < n; ++i) {
    const Real a = 3.0 * std::sqrt(lifted.lifted_norms(i));
    log_gain(i) = a + std::log1p(a);
  }

  Vector log_cond_weight(n);
  for (Index i = 0; i < n; ++i)
    log_cond_weight(i) = std::log(set.weights(i)) - log_gain(i);

  const Real shift = log_cond_weight.maxCoeff();
  Vector cond_weights(n);
  for (Index i = 0; i < n; ++i)
    cond_weights(i) = std::exp(2.0 * (log_cond_weight(i) - shift));

  const L1Conditioner cond = compute_l1_conditioner(lifted.lifted, cond_weights);
  const Vector norm_term = u_norms(cond, lifted.lifted).cwiseSqrt();

  SensitivityProfile profile = detail::assemble_profile(
      log_gain, log_cond_weight, norm_term, cond.measured_distortion);

  // Out-of-ball additive term; q* maximizes the in-ball gain (lowest index
  // among maximizers).
  Index star = 0;
  for (Index i = 1; i < n; ++i)
    if (lifted.lifted_norms(i) > lifted.lifted_norms(star)) star = i;
  const Real sqrt_qstar = std::sqrt(lifted.lifted_norms(star));
  const Real weight_sum = set.weights.sum();
  const Vector point_norms = set.points.rowwise().norm();
  for (Index i = 0; i < n; ++i) {
    profile.bounds(i) +=
        std::exp(point_norms(i) + sqrt_qstar) * set.weights(i) / weight_sum;
  }
  profile.total = profile.bounds.sum();
  profile.loss = Loss::Laplacian;
  profile.radius = 0.0;
  return profile;
}

/// Exhaustive finite-query sensitivity oracle: for each point, the max of
/// w(p) f(p,x) / sum_q w(q) f(q,x) over an axis-aligned grid restricted to the
/// ball of `query_radius`, all data points, and `extra_queries`. Being a max
/// over a finite subset of the query space, it never exceeds the true
/// sensitivity. Only d <= 3 is supported (the grid explodes otherwise).
inline Vector brute_force_sensitivity(const WeightedPointSet& set, Loss loss,
                                      Real query_radius, int grid_resolution,
                                      const std::vector<Vector>& extra_queries = {}) {
  validate(set);
  const Index d = set.dim();
  if (d > 3)
    throw InvalidInput("brute_force_sensitivity: unsupported dimension (d must be <= 3)");
  if (grid_resolution < 2)
    throw InvalidInput("brute_force_sensitivity: grid resolution must be >= 2");
  if (!(query_radius >= 0) || !std::isfinite(query_radius))
    throw InvalidInput("brute_force_sensitivity: query radius must be finite and >= 0");
  for (const Vector& q : extra_queries)
    if (q.size() != d) throw InvalidInput("brute_force_sensitivity: extra query dimension mismatch");

  const Index n = set.size();
  const Matrix& pts = set.points;
  const Vector& w = set.weights;
  const Vector point_sq_norms = pts.rowwise().squaredNorm();
  const Real radius_sq = query_radius * query_radius * (1.0 + 1e-12);

  const std::uint64_t res = static_cast<std::uint64_t>(grid_resolution);
  std::uint64_t grid_total = 1;
  for (Index axis = 0; axis < d; ++axis) grid_total *= res;

  Vector axis_values(grid_resolution);
  for (int j = 0; j < grid_resolution; ++j)
    axis_values(j) = -query_radius +
                     2.0 * query_radius * static_cast<Real>(j) /
                         static_cast<Real>(grid_resolution - 1);

  const auto evaluate_block = [&](const Matrix& queries, Vector& best) {
    const Index count = queries.rows();
    if (count == 0) return;
    Matrix dist_sq = (-2.0 * pts * queries.transpose()).colwise() + point_sq_norms;
    dist_sq.rowwise() += queries.rowwise().squaredNorm().transpose();
    Matrix vals;
    if (loss == Loss::Rbf) {
      vals = (-dist_sq.cwiseMax(0.0)).array().exp();
    } else {
      vals = (-dist_sq.cwiseMax(0.0).cwiseSqrt()).array().exp();
    }
    for (Index j = 0; j < count; ++j) {
      const Real denom = w.dot(vals.col(j));
      best = best.cwiseMax((w.array() * vals.col(j).array() / denom).matrix());
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::uint64_t block = 8192;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(hw, (grid_total + block - 1) / block));

  std::vector<Vector> best_per_worker(workers, Vector::Zero(n));
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    threads.emplace_back([&, t]() {
      Vector& best = best_per_worker[t];
      Matrix buffer(static_cast<Index>(block), d);
      for (std::uint64_t start = t * block; start < grid_total; start += block * workers) {
        const std::uint64_t stop = std::min(grid_total, start + block);
        Index filled = 0;
        for (std::uint64_t node = start; node < stop; ++node) {
          std::uint64_t rest = node;
          Real sq = 0.0;
          for (Index axis = 0; axis < d; ++axis) {
            const Real coord = axis_values(static_cast<Index>(rest % res));
            buffer(filled, axis) = coord;
            sq += coord * coord;
            rest /= res;
          }
          if (sq <= radius_sq) ++filled;
        }
        evaluate_block(buffer.topRows(filled), best);
      }
    });
  }
  for (auto& th : threads) th.join();

  Vector best = Vector::Zero(n);
  for (const Vector& local : best_per_worker) best = best.cwiseMax(local);

  // Data points are always part of the query set (the hard instances are
  // certified at x = p), plus any caller-supplied queries.
  evaluate_block(pts, best);
  if (!extra_queries.empty()) {
    Matrix extra(static_cast<Index>(extra_queries.size()), d);
    for (std::size_t i = 0; i < extra_queries.size(); ++i)
      extra.row(static_cast<Index>(i)) = extra_queries[i].transpose();
    evaluate_block(extra, best);
  }
  return best;
}

enum class LowerBoundGenerator { ClosedFormRadius, GuaranteedSeparation };

inline const char* to_string(LowerBoundGenerator g) {
  return g == LowerBoundGenerator::ClosedFormRadius ? "closed-form" : "separated";
}

/// Hard instances for the RBF loss with unrestricted queries: n points spread
/// on a sphere (Fibonacci lattice, embedded in the first 3 coordinates) whose
/// pairwise distances make every point carry sensitivity >= 1/2, so no small
/// coreset exists.
///
/// `ClosedFormRadius` places the lattice on the sphere of radius
/// sqrt(ln n / (2 cos(pi/n))); `GuaranteedSeparation` instead scales the
/// lattice until the minimum pairwise distance is at least sqrt(ln n),
/// verified exhaustively.
inline WeightedPointSet lower_bound_instance(Index n, Index d,
                                             LowerBoundGenerator generator) {
  if (n < 3) throw InvalidInput("lower_bound_instance: n must be >= 3");
  if (d < 3) throw InvalidInput("lower_bound_instance: d must be >= 3");

  Matrix sphere(n, 3);
  const Real golden_angle = EIGEN_PI * (3.0 - std::sqrt(5.0));
  for (Index i = 0; i < n; ++i) {
    const Real z = 1.0 - 2.0 * (static_cast<Real>(i) + 0.5) / static_cast<Real>(n);
    const Real ring = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Real angle = golden_angle * static_cast<Real>(i);
    sphere(i, 0) = ring * std::cos(angle);
    sphere(i, 1) = ring * std::sin(angle);
    sphere(i, 2) = z;
  }

  Real min_dist = std::numeric_limits<Real>::infinity();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      min_dist = std::min(min_dist, (sphere.row(i) - sphere.row(j)).norm());

  const Real target = std::sqrt(std::log(static_cast<Real>(n)));
  Matrix points = Matrix::Zero(n, d);
  if (generator == LowerBoundGenerator::ClosedFormRadius) {
    const Real scale = std::sqrt(std::log(static_cast<Real>(n)) /
                                 (2.0 * std::cos(EIGEN_PI / static_cast<Real>(n))));
    points.leftCols(3) = scale * sphere;
  } else {
    // Scale outward until the separation check passes on the actual
    // coordinates, not just in exact arithmetic.
    Real scale = target / min_dist;
    for (;;) {
      points.leftCols(3) = scale * sphere;
      Real actual = std::numeric_limits<Real>::infinity();
      for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
          actual = std::min(actual, (points.row(i) - points.row(j)).norm());
      if (actual >= target) break;
      scale *= 1.0 + 1e-9;
    }
  }
  return make_weighted_set(std::move(points));
}

}  // namespace rbfcoreset
