#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "rbfcoreset/rng.hpp"
#include "rbfcoreset/sensitivity.hpp"
#include "rbfcoreset/types.hpp"

namespace rbfcoreset {

/// A sampled coreset: source-point indices with corrective weights v, plus the
/// provenance needed to reproduce or audit the draw. In the default aggregated
/// form indices are strictly increasing and a repeated draw carries
/// (draw count) * (per-draw weight).
struct Coreset {
  std::vector<Index> indices;
  std::vector<Real> weights;
  Index source_n = 0;
  int m = 0;  // nominal number of draws
  Real total_sensitivity = 0.0;
  std::uint64_t seed = 0;
  SensitivityMode profile_mode = SensitivityMode::Lemma;
  Loss loss = Loss::Rbf;
  Real radius = 0.0;

  std::size_t distinct_count() const { return indices.size(); }
};

/// m i.i.d. draws from the categorical distribution s(p)/t, each draw carrying
/// the corrective weight v = t w(p) / (s(p) m), which makes
/// sum_{q in S} v(q) f(q, x) an unbiased estimator of sum_p w(p) f(p, x) for
/// any f. Draws come from one serial seeded generator, so the result is
/// deterministic. Duplicates are aggregated unless `aggregate` is false, in
/// which case the sorted raw multiset is kept for audit.
inline Coreset build_coreset(const WeightedPointSet& set,
                             const SensitivityProfile& profile, int m,
                             std::uint64_t seed, bool aggregate = true) {
  validate(set);
  const Index n = set.size();
  if (profile.bounds.size() != n)
    throw InvalidInput("build_coreset: profile size does not match point set");
  if (m < 1) throw InvalidInput("build_coreset: m must be >= 1");
  if (!profile.bounds.allFinite() || (profile.bounds.array() <= 0).any())
    throw InvalidInput("build_coreset: profile bounds must be positive and finite");

  Vector cumulative(n);
  Real running = 0.0;
  for (Index i = 0; i < n; ++i) {
    running += profile.bounds(i);
    cumulative(i) = running;
  }
  const Real mass = cumulative(n - 1);
  const Real total = profile.total;

  std::mt19937_64 rng(mix_seed(seed, 0x636f7265ULL));
  std::map<Index, int> draw_counts;
  for (int draw = 0; draw < m; ++draw) {
    const Real u = uniform_unit(rng) * mass;
    const Real* begin = cumulative.data();
    const Real* pos = std::upper_bound(begin, begin + n, u);
    const Index idx = std::min<Index>(static_cast<Index>(pos - begin), n - 1);
    ++draw_counts[idx];
  }

  Coreset coreset;
  coreset.source_n = n;
  coreset.m = m;
  coreset.total_sensitivity = total;
  coreset.seed = seed;
  coreset.profile_mode = profile.mode;
  coreset.loss = profile.loss;
  coreset.radius = profile.radius;
  for (const auto& [idx, count] : draw_counts) {
    // v = t w / (s m), grouped so the singleton and uniform cases come out
    // exact in floating point.
    const Real ratio = total / profile.bounds(idx);
    if (aggregate) {
      coreset.indices.push_back(idx);
      coreset.weights.push_back((static_cast<Real>(count) / static_cast<Real>(m)) *
                                ratio * set.weights(idx));
    } else {
      const Real per_draw = ratio * (set.weights(idx) / static_cast<Real>(m));
      for (int c = 0; c < count; ++c) {
        coreset.indices.push_back(idx);
        coreset.weights.push_back(per_draw);
      }
    }
  }
  return coreset;
}

/// Lift, condition, bound, sample: the whole RBF pipeline. Points must
/// already lie in the unit ball.
inline Coreset coreset_rbf(const WeightedPointSet& set, Real radius, int m,
                           std::uint64_t seed,
                           SensitivityMode mode = SensitivityMode::Lemma) {
  return build_coreset(set, rbf_sensitivity_bounds(set, radius, mode), m, seed);
}

/// Laplacian pipeline; the resulting guarantee has no query-radius restriction.
inline Coreset coreset_laplacian(const WeightedPointSet& set, int m,
                                 std::uint64_t seed) {
  return build_coreset(set, laplacian_sensitivity_bounds(set), m, seed);
}

/// Uniform-sampling baseline at the same sample size: m uniform draws with
/// per-draw weight n w(p) / m, aggregated like build_coreset.
inline Coreset uniform_coreset(const WeightedPointSet& set, int m,
                               std::uint64_t seed) {
  validate(set);
  if (m < 1) throw InvalidInput("uniform_coreset: m must be >= 1");
  const Index n = set.size();
  std::mt19937_64 rng(mix_seed(seed, 0x756e6966ULL));
  std::map<Index, int> draw_counts;
  for (int draw = 0; draw < m; ++draw) {
    const Index idx = std::min<Index>(
        static_cast<Index>(uniform_unit(rng) * static_cast<Real>(n)), n - 1);
    ++draw_counts[idx];
  }
  Coreset coreset;
  coreset.source_n = n;
  coreset.m = m;
  coreset.seed = seed;
  for (const auto& [idx, count] : draw_counts) {
    coreset.indices.push_back(idx);
    coreset.weights.push_back(static_cast<Real>(count) * static_cast<Real>(n) *
                              set.weights(idx) / static_cast<Real>(m));
  }
  return coreset;
}

/// Splits labeled data by label sign into the problems
/// sum_{y(p)>0} w(p) y(p) f(p, .) and sum_{y(p)<0} w(p) |y(p)| f(p, .),
/// and builds an RBF coreset of m draws for each side. Indices in both
/// coresets refer to the original point set; an absent side yields an empty
/// coreset.
inline std::pair<Coreset, Coreset> signed_coreset_pair(
    const WeightedPointSet& set, Real radius, int m, std::uint64_t seed,
    SensitivityMode mode = SensitivityMode::Lemma) {
  validate(set);
  if (!set.labels) throw InvalidInput("signed_coreset_pair: labels are required");
  const Vector& labels = *set.labels;
  if ((labels.array() != 0).count() == 0)
    throw InvalidInput("signed_coreset_pair: all labels are zero");

  const auto build_side = [&](bool positive, std::uint64_t stream) {
    std::vector<Index> rows;
    for (Index i = 0; i < set.size(); ++i) {
      if ((positive && labels(i) > 0) || (!positive && labels(i) < 0))
        rows.push_back(i);
    }
    Coreset side;
    side.source_n = set.size();
    side.m = m;
    side.seed = seed;
    side.profile_mode = mode;
    side.loss = Loss::Rbf;
    side.radius = radius;
    if (rows.empty()) return side;

    WeightedPointSet sub;
    sub.points.resize(static_cast<Index>(rows.size()), set.dim());
    sub.weights.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      sub.points.row(static_cast<Index>(r)) = set.points.row(rows[r]);
      sub.weights(static_cast<Index>(r)) =
          set.weights(rows[r]) * std::abs(labels(rows[r]));
    }
    sub.scale = set.scale;
    Coreset local = coreset_rbf(sub, radius, m, mix_seed(seed, stream), mode);
    side.total_sensitivity = local.total_sensitivity;
    side.indices.reserve(local.indices.size());
    for (std::size_t r = 0; r < local.indices.size(); ++r)
      side.indices.push_back(rows[static_cast<std::size_t>(local.indices[r])]);
    side.weights = std::move(local.weights);
    return side;
  };

  return {build_side(true, 0x706f73ULL), build_side(false, 0x6e6567ULL)};
}

}  // namespace rbfcoreset
