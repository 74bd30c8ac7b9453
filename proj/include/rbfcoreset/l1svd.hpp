#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rbfcoreset/rng.hpp"
#include "rbfcoreset/types.hpp"

namespace rbfcoreset {

enum class ConditionerMethod { LewisWeights, L2Svd };

inline const char* to_string(ConditionerMethod m) {
  return m == ConditionerMethod::LewisWeights ? "lewis" : "l2svd";
}

/// A positive diagonal D and orthogonal V sandwiching the weighted l1
/// functional S(x) = sum_p w(p) |p.x| between ||D V^T x||_2 and
/// c * sqrt(k) * ||D V^T x||_2. `transform` is (D V^T)^-1, so the
/// conditioned row of a point q is q^T * transform.
struct L1Conditioner {
  Vector d_diag;    // k, strictly positive
  Matrix v_ortho;   // k x k, orthogonal
  Matrix transform; // (D V^T)^-1 = V D^-1
  Real measured_distortion = 1.0;  // empirical slack c over the direction sweep
  ConditionerMethod method_tag = ConditionerMethod::LewisWeights;
};

/// l1 norm of the conditioned row q^T (D V^T)^-1; by the sandwich this bounds
/// the point's share of the weighted l1 functional over all directions.
inline Real u_norm(const L1Conditioner& cond, const Vector& q) {
  if (q.size() != cond.transform.rows())
    throw InvalidInput("u_norm: dimension mismatch");
  if (!q.allFinite()) throw InvalidInput("u_norm: non-finite entries");
  return (cond.transform.transpose() * q).lpNorm<1>();
}

/// Row-wise u_norm for an n x k matrix of rows.
inline Vector u_norms(const L1Conditioner& cond, const Matrix& rows) {
  if (rows.cols() != cond.transform.rows())
    throw InvalidInput("u_norms: dimension mismatch");
  return (rows * cond.transform).cwiseAbs().rowwise().sum();
}

namespace detail {

// Eigendecomposition of a symmetric PSD matrix with small eigenvalues floored
// to 1e-10 * lambda_max so the quadratic form stays invertible. Flooring only
// inflates directions outside the row space, which the conditioned rows never
// touch.
struct FlooredEig {
  Vector values;  // floored, ascending
  Matrix vectors;
};

inline FlooredEig floored_eig(const Matrix& quad) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(quad);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed");
  FlooredEig out{eig.eigenvalues(), eig.eigenvectors()};
  const Real lambda_max = out.values.maxCoeff();
  const Real floor = lambda_max > 0 ? 1e-10 * lambda_max : 1e-30;
  out.values = out.values.cwiseMax(floor);
  return out;
}

}  // namespace detail

/// Builds the conditioning transform for S(x) = sum_p w(p) |p.x|.
///
/// Default construction: l1 Lewis-weight fixed point on the weighted rows
/// (at most 30 iterations, stop when the max relative weight change drops
/// below 1e-6), then an eigendecomposition of the resulting quadratic form.
/// At the exact fixed point the sandwich holds with c = 1; the terminal
/// residual is absorbed by deflating D, so the lower side survives inexact
/// convergence. The fallback (`L2Svd`) uses the plain l2 Gram matrix of the
/// weighted rows; its lower side holds unconditionally and its slack is
/// whatever the sweep measures.
///
/// `measured_distortion` is the max ratio violation over 1000 random unit
/// directions, the k coordinate axes and the eigenvector directions,
/// clamped to >= 1.
inline L1Conditioner compute_l1_conditioner(
    const Matrix& rows, const Vector& weights,
    ConditionerMethod method = ConditionerMethod::LewisWeights) {
  const Index n = rows.rows();
  const Index k = rows.cols();
  if (n < 1 || k < 1) throw InvalidInput("compute_l1_conditioner: empty input");
  if (weights.size() != n)
    throw InvalidInput("compute_l1_conditioner: weight/row count mismatch");
  if (!rows.allFinite() || !weights.allFinite())
    throw InvalidInput("compute_l1_conditioner: non-finite entries");
  if ((weights.array() < 0).any())
    throw InvalidInput("compute_l1_conditioner: negative weight");
  if (weights.maxCoeff() <= 0)
    throw InvalidInput("compute_l1_conditioner: all weights are zero");

  // Weighted rows: S(x) = ||A x||_1.
  Matrix scaled = weights.asDiagonal() * rows;
  const Vector row_norms = scaled.rowwise().norm();
  const Real active_floor = row_norms.maxCoeff() * 1e-300;

  Real residual = 0.0;
  Matrix quad(k, k);
  if (method == ConditionerMethod::LewisWeights) {
    Vector lw = Vector::Ones(n);
    for (Index i = 0; i < n; ++i)
      if (row_norms(i) <= active_floor) lw(i) = 0.0;
    for (int iter = 0; iter < 30; ++iter) {
      quad.setZero();
      for (Index i = 0; i < n; ++i)
        if (lw(i) > 0) quad.noalias() += scaled.row(i).transpose() * scaled.row(i) / lw(i);
      const auto eig = detail::floored_eig(quad);
      // lw_new(i) = sqrt(a_i^T quad^-1 a_i), evaluated through the floored basis.
      Matrix proj = eig.vectors.transpose() * scaled.transpose();  // k x n
      proj.array().colwise() /= eig.values.array().sqrt();
      residual = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (lw(i) <= 0) continue;
        const Real next = proj.col(i).norm();
        residual = std::max(residual, std::abs(next - lw(i)) / lw(i));
        lw(i) = std::max(next, 1e-300);
      }
      if (residual < 1e-6) break;
    }
    quad.setZero();
    for (Index i = 0; i < n; ++i)
      if (lw(i) > 0) quad.noalias() += scaled.row(i).transpose() * scaled.row(i) / lw(i);
  } else {
    quad.noalias() = scaled.transpose() * scaled;
  }

  const auto eig = detail::floored_eig(quad);
  L1Conditioner cond;
  cond.method_tag = method;
  cond.v_ortho = eig.vectors;
  cond.d_diag = eig.values.cwiseSqrt();
  if (method == ConditionerMethod::LewisWeights) {
    // Guarantees ||D V^T x||_2 <= S(x) despite the inexact fixed point.
    cond.d_diag /= 1.0 + residual + 1e-9;
  }
  cond.transform = cond.v_ortho * cond.d_diag.cwiseInverse().asDiagonal();

  // Direction sweep; violations of either sandwich side fold into the slack.
  const Real sqrt_k = std::sqrt(static_cast<Real>(k));
  std::mt19937_64 rng(mix_seed(0x11a3f5d2c4b60e87ULL, static_cast<std::uint64_t>(k)));
  std::normal_distribution<Real> gauss;
  Real slack = 1.0;
  auto probe = [&](const Vector& x) {
    const Real norm = x.norm();
    if (norm <= 0) return;
    const Vector dir = x / norm;
    const Real functional = (scaled * dir).lpNorm<1>();
    const Real quad_norm = (cond.d_diag.asDiagonal() * (cond.v_ortho.transpose() * dir)).norm();
    if (functional > 0 && quad_norm > 0) {
      slack = std::max(slack, functional / (sqrt_k * quad_norm));
      slack = std::max(slack, quad_norm / functional);
    } else if (functional <= 0 && quad_norm > active_floor) {
      slack = std::numeric_limits<Real>::infinity();
    }
  };
  for (Index j = 0; j < k; ++j) probe(Vector::Unit(k, j));
  for (Index j = 0; j < k; ++j) probe(cond.v_ortho.col(j));
  Vector x(k);
  for (int t = 0; t < 1000; ++t) {
    for (Index j = 0; j < k; ++j) x(j) = gauss(rng);
    probe(x);
  }
  cond.measured_distortion = slack;
  return cond;
}

}  // namespace rbfcoreset
