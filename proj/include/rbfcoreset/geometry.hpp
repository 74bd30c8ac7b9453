#pragma once

#include <Eigen/Dense>

#include "rbfcoreset/types.hpp"

namespace rbfcoreset {

/// Lifts a point p in R^d to q_p = [||p||^2, -2 p^T, 1] in R^(d+2).
/// Together with lift_query this turns squared distances into absolute
/// inner products: |q_p . y_x| = ||p - x||^2 for every p, x.
template <typename Derived>
Vector lift_point(const Eigen::MatrixBase<Derived>& p) {
  const Index d = p.size();
  if (d < 1) throw InvalidInput("lift_point: point must have dimension >= 1");
  if (!p.allFinite()) throw InvalidInput("lift_point: non-finite entries");
  Vector q(d + 2);
  q(0) = p.squaredNorm();
  for (Index i = 0; i < d; ++i) q(1 + i) = -2.0 * p(i);
  q(d + 1) = 1.0;
  return q;
}

/// Lifts a query x in R^d to y = [1, x^T, ||x||^2] in R^(d+2).
template <typename Derived>
Vector lift_query(const Eigen::MatrixBase<Derived>& x) {
  const Index d = x.size();
  if (d < 1) throw InvalidInput("lift_query: query must have dimension >= 1");
  if (!x.allFinite()) throw InvalidInput("lift_query: non-finite entries");
  Vector y(d + 2);
  y(0) = 1.0;
  for (Index i = 0; i < d; ++i) y(1 + i) = x(i);
  y(d + 1) = x.squaredNorm();
  return y;
}

/// Lifted rows q_p for a whole point set, with their Euclidean norms cached.
struct LiftedPointSet {
  Matrix lifted;        // n x (d+2)
  Vector lifted_norms;  // n
};

inline LiftedPointSet lift_points(const Matrix& points) {
  if (points.rows() < 1 || points.cols() < 1)
    throw InvalidInput("lift_points: need at least one point of dimension >= 1");
  if (!points.allFinite()) throw InvalidInput("lift_points: non-finite entries");
  const Index n = points.rows();
  const Index d = points.cols();
  LiftedPointSet out;
  out.lifted.resize(n, d + 2);
  out.lifted.col(0) = points.rowwise().squaredNorm();
  out.lifted.middleCols(1, d) = -2.0 * points;
  out.lifted.col(d + 1).setOnes();
  out.lifted_norms = out.lifted.rowwise().norm();
  return out;
}

/// Rescales the set so every point lies in the closed unit ball. The divisor
/// (max row norm) is folded into `scale`; weights and labels are untouched.
/// Sets already inside the ball (up to 1e-12 slack) are returned unchanged,
/// which makes the operation idempotent.
inline WeightedPointSet normalize_to_unit_ball(const WeightedPointSet& in) {
  validate(in);
  const Real max_norm = in.points.rowwise().norm().maxCoeff();
  if (max_norm <= 1.0 + 1e-12) return in;
  WeightedPointSet out = in;
  out.points /= max_norm;
  out.scale = in.scale * max_norm;
  return out;
}

}  // namespace rbfcoreset
