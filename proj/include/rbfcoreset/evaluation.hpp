#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "rbfcoreset/rng.hpp"
#include "rbfcoreset/sampling.hpp"
#include "rbfcoreset/types.hpp"

namespace rbfcoreset {

/// A denominator that should be strictly positive vanished (e.g. all output
/// weights zero, or a loss sum numerically zero).
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Vector loss_values(const Matrix& points, const Vector& x, Loss loss) {
  Vector sq = (points.rowwise() - x.transpose()).rowwise().squaredNorm();
  if (loss == Loss::Rbf) return (-sq.array()).exp();
  return (-sq.array().max(0.0).sqrt()).exp();
}

// Shared evaluation path for full sets and gathered coresets, so that an
// identity coreset reproduces the full sum bit for bit.
inline Real weighted_loss_sum(const Matrix& points, const Vector& weights,
                              const Vector& x, Loss loss) {
  return weights.dot(loss_values(points, x, loss));
}

}  // namespace detail

/// Points of a coreset gathered into a standalone weighted set (labels are
/// carried along when the source has them).
inline WeightedPointSet gather(const WeightedPointSet& set, const Coreset& coreset) {
  const Index count = static_cast<Index>(coreset.indices.size());
  if (count == 0) throw InvalidInput("gather: coreset is empty");
  WeightedPointSet out;
  out.points.resize(count, set.dim());
  out.weights.resize(count);
  if (set.labels) out.labels = Vector(count);
  for (Index r = 0; r < count; ++r) {
    const Index idx = coreset.indices[static_cast<std::size_t>(r)];
    if (idx < 0 || idx >= set.size())
      throw InvalidInput("gather: coreset index out of range");
    out.points.row(r) = set.points.row(idx);
    out.weights(r) = coreset.weights[static_cast<std::size_t>(r)];
    if (set.labels) (*out.labels)(r) = (*set.labels)(idx);
  }
  out.scale = set.scale;
  return out;
}

/// sum_p w(p) f(p, x) for the chosen loss.
inline Real loss_sum(const WeightedPointSet& set, const Vector& x, Loss loss) {
  validate(set);
  if (x.size() != set.dim()) throw InvalidInput("loss_sum: query dimension mismatch");
  if (!x.allFinite()) throw InvalidInput("loss_sum: non-finite query");
  return detail::weighted_loss_sum(set.points, set.weights, x, loss);
}

/// Coreset estimate of loss_sum at x.
inline Real coreset_loss_sum(const WeightedPointSet& set, const Coreset& coreset,
                             const Vector& x, Loss loss) {
  const WeightedPointSet gathered = gather(set, coreset);
  return detail::weighted_loss_sum(gathered.points, gathered.weights, x, loss);
}

/// |1 - (coreset weighted loss sum) / (full weighted loss sum)| at query x.
inline Real relative_error(const WeightedPointSet& set, const Coreset& coreset,
                           const Vector& x, Loss loss) {
  const Real full = loss_sum(set, x, loss);
  if (!(full > 0))
    throw DegenerateError("relative_error: full loss sum is not positive");
  return std::abs(1.0 - coreset_loss_sum(set, coreset, x, loss) / full);
}

struct EvalReport {
  std::vector<Real> per_query_errors;
  Real sup_error = 0.0;
  Real mean_error = 0.0;
  int query_count = 0;
  Loss loss = Loss::Rbf;
  std::shared_ptr<const EvalReport> comparison;  // optional paired baseline
};

/// Batched relative_error over a query ensemble. For RBF coresets built with a
/// query-ball radius, queries outside that ball are rejected (the guarantee
/// does not cover them) unless `allow_outside_queries` is set.
inline EvalReport evaluate(const WeightedPointSet& set, const Coreset& coreset,
                           const std::vector<Vector>& queries, Loss loss,
                           bool allow_outside_queries = false) {
  if (queries.empty()) throw InvalidInput("evaluate: query list is empty");
  if (loss == Loss::Rbf && coreset.radius > 0 && !allow_outside_queries) {
    for (std::size_t j = 0; j < queries.size(); ++j) {
      if (queries[j].norm() > coreset.radius * (1.0 + 1e-12))
        throw InvalidInput("evaluate: query " + std::to_string(j) +
                           " lies outside the coreset's query ball; pass "
                           "allow_outside_queries to override");
    }
  }
  EvalReport report;
  report.loss = loss;
  report.query_count = static_cast<int>(queries.size());
  report.per_query_errors.reserve(queries.size());
  Real sum = 0.0;
  for (const Vector& x : queries) {
    const Real err = relative_error(set, coreset, x, loss);
    report.per_query_errors.push_back(err);
    sum += err;
    report.sup_error = std::max(report.sup_error, err);
  }
  report.mean_error = sum / static_cast<Real>(queries.size());
  return report;
}

/// `count` points drawn uniformly from the l2 ball of the given radius
/// (Gaussian direction scaled by radius * U^(1/d)), optionally followed by the
/// data points themselves.
inline std::vector<Vector> sample_queries(Index d, int count, Real radius,
                                          std::uint64_t seed,
                                          const WeightedPointSet* include_data = nullptr) {
  if (d < 1) throw InvalidInput("sample_queries: dimension must be >= 1");
  if (count < 1) throw InvalidInput("sample_queries: count must be >= 1");
  if (!(radius > 0)) throw InvalidInput("sample_queries: radius must be positive");
  std::mt19937_64 rng(mix_seed(seed, 0x71727973ULL));
  std::normal_distribution<Real> gauss;
  std::vector<Vector> queries;
  queries.reserve(static_cast<std::size_t>(count) +
                  (include_data ? static_cast<std::size_t>(include_data->size()) : 0));
  for (int i = 0; i < count; ++i) {
    Vector x(d);
    do {
      for (Index j = 0; j < d; ++j) x(j) = gauss(rng);
    } while (x.norm() == 0);
    const Real r = radius * std::pow(uniform_unit(rng), 1.0 / static_cast<Real>(d));
    queries.push_back(x * (r / x.norm()));
  }
  if (include_data) {
    for (Index i = 0; i < include_data->size(); ++i)
      queries.push_back(include_data->points.row(i).transpose());
  }
  return queries;
}

/// Relative error of estimating the label-weighted network response sum
/// sum_p w(p) y(p) phi(p) from a signed coreset pair, normalized by
/// sum_i |alpha_i| (phi+(c_i) + phi-(c_i)). phi+/phi- are the positive- and
/// negative-label parts of the weighted RBF sum, computed on the full data;
/// the pair estimates them per center and the estimates recombine with the
/// center's own sign, so the full-data pair gives exactly zero.
inline Real cross_term_relative_error(const WeightedPointSet& set,
                                      const std::pair<Coreset, Coreset>& pair,
                                      const Matrix& centers, const Vector& alphas) {
  validate(set);
  if (!set.labels) throw InvalidInput("cross_term_relative_error: labels required");
  if (centers.rows() < 1) throw InvalidInput("cross_term_relative_error: need at least one center");
  if (centers.cols() != set.dim())
    throw InvalidInput("cross_term_relative_error: center dimension mismatch");
  if (alphas.size() != centers.rows())
    throw InvalidInput("cross_term_relative_error: alpha/center count mismatch");

  const Vector& labels = *set.labels;
  const auto gather_side = [&](bool positive) {
    std::vector<Index> rows;
    for (Index i = 0; i < set.size(); ++i)
      if ((positive && labels(i) > 0) || (!positive && labels(i) < 0)) rows.push_back(i);
    Matrix pts(static_cast<Index>(rows.size()), set.dim());
    Vector wts(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      pts.row(static_cast<Index>(r)) = set.points.row(rows[r]);
      wts(static_cast<Index>(r)) = set.weights(rows[r]) * std::abs(labels(rows[r]));
    }
    return std::make_pair(std::move(pts), std::move(wts));
  };
  const auto [pos_pts, pos_wts] = gather_side(true);
  const auto [neg_pts, neg_wts] = gather_side(false);

  const auto side_sum = [&](const Matrix& pts, const Vector& wts, const Vector& c) {
    return pts.rows() == 0 ? 0.0 : detail::weighted_loss_sum(pts, wts, c, Loss::Rbf);
  };
  const auto coreset_sum = [&](const Coreset& coreset, const Vector& c) {
    if (coreset.indices.empty()) return 0.0;
    return coreset_loss_sum(set, coreset, c, Loss::Rbf);
  };

  Real numerator = 0.0;
  Real denominator = 0.0;
  for (Index i = 0; i < centers.rows(); ++i) {
    const Vector c = centers.row(i).transpose();
    const Real plus = side_sum(pos_pts, pos_wts, c);
    const Real minus = side_sum(neg_pts, neg_wts, c);
    const Real est_plus = coreset_sum(pair.first, c);
    const Real est_minus = coreset_sum(pair.second, c);
    numerator += alphas(i) * ((plus - minus) - (est_plus - est_minus));
    denominator += std::abs(alphas(i)) * (plus + minus);
  }
  if (!(denominator > 0))
    throw DegenerateError("cross_term_relative_error: zero denominator");
  return std::abs(numerator) / denominator;
}

/// The squared-response term sum_p w(p) (sum_i alpha_i exp(-||p-c_i||^2))^2
/// with its Cauchy-Schwarz envelope:
///   upper = L * sum_i alpha_i^2 * G_i,
///   lower = sum_i alpha_i^2 * G_i (reported only when every alpha_i >= 0),
/// where G_i = sum_p w(p) exp(-2||p-c_i||^2). When `scaled_coreset` is given
/// (a coreset built for the sqrt(2)-scaled points), the G_i are estimated from
/// it instead of the full data.
struct QuadraticTermBounds {
  Real exact = 0.0;
  Real upper = 0.0;
  std::optional<Real> lower;
};

inline QuadraticTermBounds quadratic_term_bounds(const WeightedPointSet& set,
                                                 const Matrix& centers,
                                                 const Vector& alphas,
                                                 const Coreset* scaled_coreset = nullptr) {
  validate(set);
  const Index L = centers.rows();
  if (L < 1) throw InvalidInput("quadratic_term_bounds: need at least one center");
  if (centers.cols() != set.dim())
    throw InvalidInput("quadratic_term_bounds: center dimension mismatch");
  if (alphas.size() != L) throw InvalidInput("quadratic_term_bounds: alpha count mismatch");

  Vector response = Vector::Zero(set.size());
  for (Index i = 0; i < L; ++i) {
    const Vector c = centers.row(i).transpose();
    response += alphas(i) * detail::loss_values(set.points, c, Loss::Rbf);
  }
  QuadraticTermBounds out;
  out.exact = set.weights.dot(response.cwiseProduct(response));

  Real gram = 0.0;
  for (Index i = 0; i < L; ++i) {
    const Vector c = centers.row(i).transpose();
    Real inner;
    if (scaled_coreset) {
      const WeightedPointSet gathered = gather(set, *scaled_coreset);
      Vector sq = (gathered.points.rowwise() - c.transpose()).rowwise().squaredNorm();
      inner = gathered.weights.dot((-2.0 * sq.array()).exp().matrix());
    } else {
      Vector sq = (set.points.rowwise() - c.transpose()).rowwise().squaredNorm();
      inner = set.weights.dot((-2.0 * sq.array()).exp().matrix());
    }
    gram += alphas(i) * alphas(i) * inner;
  }
  out.upper = static_cast<Real>(L) * gram;
  if ((alphas.array() >= 0).all()) out.lower = gram;
  return out;
}

}  // namespace rbfcoreset
