#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace rbfcoreset {

using Real = double;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

/// The two kernel losses handled by the library: exp(-||p-x||^2) and exp(-||p-x||).
enum class Loss { Rbf, Laplacian };

/// How per-point sensitivity constants are chosen: tight per-point constants
/// (`Lemma`) or a single uniform worst-case constant (`Algorithm1`).
enum class SensitivityMode { Lemma, Algorithm1 };

inline const char* to_string(Loss loss) {
  return loss == Loss::Rbf ? "rbf" : "laplacian";
}

inline const char* to_string(SensitivityMode mode) {
  return mode == SensitivityMode::Lemma ? "lemma" : "algorithm1";
}

/// Malformed arguments: wrong sizes, non-finite entries, out-of-range parameters.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A documented operation precondition does not hold for the given data
/// (e.g. a point lies outside the unit ball). Carries the offending index
/// when one exists, -1 otherwise.
struct PreconditionError : std::runtime_error {
  explicit PreconditionError(const std::string& msg, Index index = -1)
      : std::runtime_error(msg), offending_index(index) {}
  Index offending_index;
};

/// n points in d dimensions with nonnegative weights and optional labels.
/// `scale` records the divisor applied by normalize_to_unit_ball (1 if none).
struct WeightedPointSet {
  Matrix points;                 // n x d, one point per row
  Vector weights;                // n, nonnegative, at least one positive
  std::optional<Vector> labels;  // n, optional regression targets
  Real scale = 1.0;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
};

inline void validate(const WeightedPointSet& set) {
  if (set.points.rows() < 1) throw InvalidInput("point set is empty");
  if (!set.points.allFinite()) throw InvalidInput("points contain non-finite entries");
  if (set.weights.size() != set.points.rows())
    throw InvalidInput("weights length does not match point count");
  if (!set.weights.allFinite() || (set.weights.array() < 0).any())
    throw InvalidInput("weights must be finite and nonnegative");
  if ((set.weights.array() > 0).count() == 0)
    throw InvalidInput("at least one weight must be positive");
  if (set.labels && set.labels->size() != set.points.rows())
    throw InvalidInput("labels length does not match point count");
  if (set.labels && !set.labels->allFinite())
    throw InvalidInput("labels contain non-finite entries");
  if (!(set.scale > 0)) throw InvalidInput("scale must be positive");
}

inline WeightedPointSet make_weighted_set(Matrix points, Vector weights,
                                          std::optional<Vector> labels = std::nullopt) {
  WeightedPointSet set{std::move(points), std::move(weights), std::move(labels), 1.0};
  validate(set);
  return set;
}

/// Unit-weight convenience constructor.
inline WeightedPointSet make_weighted_set(Matrix points) {
  Vector weights = Vector::Ones(points.rows());
  return make_weighted_set(std::move(points), std::move(weights));
}

}  // namespace rbfcoreset
