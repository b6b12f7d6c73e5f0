#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "icpkit/errors.hpp"
#include "icpkit/geometry.hpp"
#include "icpkit/kdtree.hpp"

namespace icpkit {

/// Pairs source point i with destination point j. At most one pair per
/// source index; several sources may share a destination.
struct Correspondence {
  std::size_t source_index = 0;
  std::size_t dest_index = 0;
  double squared_distance = 0.0;
};

using CorrespondenceSet = std::vector<Correspondence>;

/// Outlier rejection applied to the candidate pairs of one matching round.
/// Distances below are Euclidean (not squared).
///  - None: keep everything.
///  - MaxDistance: keep pairs with distance <= max_distance.
///  - TrimFraction: keep the ceil((1 - fraction) * n) closest pairs.
///  - MedianScale: keep pairs with distance <= scale * median candidate
///    distance, the median recomputed from the current candidates.
struct RejectionPolicy {
  enum class Kind { None, MaxDistance, TrimFraction, MedianScale };

  Kind kind = Kind::MedianScale;
  double max_distance = std::numeric_limits<double>::infinity();
  double trim_fraction = 0.0;
  double scale = 2.5;

  static RejectionPolicy none() {
    RejectionPolicy p;
    p.kind = Kind::None;
    return p;
  }
  static RejectionPolicy max_dist(double cap) {
    RejectionPolicy p;
    p.kind = Kind::MaxDistance;
    p.max_distance = cap;
    return p;
  }
  static RejectionPolicy trim(double fraction) {
    RejectionPolicy p;
    p.kind = Kind::TrimFraction;
    p.trim_fraction = fraction;
    return p;
  }
  static RejectionPolicy median(double scale = 2.5) {
    RejectionPolicy p;
    p.kind = Kind::MedianScale;
    p.scale = scale;
    return p;
  }
};

/// Median of a value list; average of the two middle elements when the
/// count is even. Consumes its argument.
inline double median_of(std::vector<double> values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double m = values[mid];
  if (n % 2 == 0) {
    const double lower =
        *std::max_element(values.begin(), values.begin() + mid);
    m = 0.5 * (lower + m);
  }
  return m;
}

/// Matches every source point to its nearest destination point, then
/// filters the pairs through the rejection policy. Output is ordered by
/// source index. Throws NoCorrespondences when nothing survives.
inline CorrespondenceSet match(const PointCloud& source,
                               const SpatialIndex& dest,
                               const RejectionPolicy& policy) {
  if (source.empty()) throw EmptyCloudError("matching from empty cloud");

  CorrespondenceSet cands;
  cands.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Neighbor nn = dest.nearest(source.points[i]);
    cands.push_back({i, nn.index, nn.squared_distance});
  }

  CorrespondenceSet kept;
  switch (policy.kind) {
    case RejectionPolicy::Kind::None:
      kept = std::move(cands);
      break;
    case RejectionPolicy::Kind::MaxDistance: {
      const double cap2 = policy.max_distance * policy.max_distance;
      kept.reserve(cands.size());
      for (const Correspondence& c : cands)
        if (c.squared_distance <= cap2) kept.push_back(c);
      break;
    }
    case RejectionPolicy::Kind::TrimFraction: {
      const std::size_t n = cands.size();
      const std::size_t keep = static_cast<std::size_t>(
          std::ceil((1.0 - policy.trim_fraction) * static_cast<double>(n)));
      if (keep >= n) {
        kept = std::move(cands);
        break;
      }
      std::vector<std::size_t> by_dist(n);
      std::iota(by_dist.begin(), by_dist.end(), std::size_t{0});
      std::sort(by_dist.begin(), by_dist.end(),
                [&](std::size_t a, std::size_t b) {
                  const double da = cands[a].squared_distance;
                  const double db = cands[b].squared_distance;
                  return da < db || (da == db && a < b);
                });
      std::vector<char> selected(n, 0);
      for (std::size_t i = 0; i < keep; ++i) selected[by_dist[i]] = 1;
      kept.reserve(keep);
      for (std::size_t i = 0; i < n; ++i)
        if (selected[i]) kept.push_back(cands[i]);
      break;
    }
    case RejectionPolicy::Kind::MedianScale: {
      std::vector<double> dists;
      dists.reserve(cands.size());
      for (const Correspondence& c : cands)
        dists.push_back(std::sqrt(c.squared_distance));
      const double cap = policy.scale * median_of(std::move(dists));
      const double cap2 = cap * cap;
      kept.reserve(cands.size());
      for (const Correspondence& c : cands)
        if (c.squared_distance <= cap2) kept.push_back(c);
      break;
    }
  }
  if (kept.empty())
    throw NoCorrespondencesError("rejection removed every candidate pair");
  return kept;
}

}  // namespace icpkit
