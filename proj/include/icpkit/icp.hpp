#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "icpkit/alignment.hpp"
#include "icpkit/correspondence.hpp"
#include "icpkit/errors.hpp"
#include "icpkit/geometry.hpp"
#include "icpkit/kdtree.hpp"
#include "icpkit/random.hpp"

namespace icpkit {

enum class Termination { Converged, Stalled, MaxIterations, NoCorrespondences };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged:
      return "Converged";
    case Termination::Stalled:
      return "Stalled";
    case Termination::MaxIterations:
      return "MaxIterations";
    case Termination::NoCorrespondences:
      return "NoCorrespondences";
  }
  return "Unknown";
}

struct IcpConfig {
  MetricKind metric = MetricKind::PointToPoint;
  double theta0 = 1e-10;      // convergence threshold on epsilon (m^2)
  std::size_t max_iterations = 100;  // per pyramid level
  double min_decrease = 1e-12;  // smallest epsilon drop that counts (m^2)
  RejectionPolicy rejection = RejectionPolicy::median();
  bool align_centroids_first = true;
  double subsample_fraction = 1.0;
  std::size_t pyramid_levels = 0;  // 0 and 1 both mean single level
  std::uint64_t seed = 0;
  std::size_t feature_neighbors = 8;  // line estimation for PointToLine
};

/// Wall-clock per stage. Informational only, excluded from determinism
/// guarantees.
struct IcpTimings {
  double match_ms = 0.0;
  double solve_ms = 0.0;
  double error_ms = 0.0;
  double total_ms = 0.0;
};

struct IcpResult {
  RigidTransform transform;  // cumulative source -> dest
  std::vector<double> error_trace;  // epsilon per iteration (m^2)
  std::size_t iterations = 0;
  Termination termination = Termination::MaxIterations;
  CorrespondenceSet final_correspondences;
  IcpTimings timings;
};

/// Mean squared residual over the pairs: the convergence quantity epsilon.
/// The source here is the already-transformed cloud.
inline double residual_error(const PointCloud& source_transformed,
                             const PointCloud& dest,
                             const CorrespondenceSet& corr) {
  if (corr.empty())
    throw NoCorrespondencesError("residual over empty pair set");
  double acc = 0.0;
  for (const Correspondence& c : corr)
    acc += (source_transformed.points[c.source_index] -
            dest.points[c.dest_index])
               .squaredNorm();
  return acc / static_cast<double>(corr.size());
}

/// Deterministic voxel-grid pyramid. Element 0 is the full cloud; level k
/// merges points over cells of size (bbox diagonal / 100) * 2^(k-1),
/// averaging positions, normals and weights per cell in first-seen order.
inline std::vector<PointCloud> build_pyramid(const PointCloud& cloud,
                                             std::size_t levels) {
  if (levels < 1) throw Error("InvalidConfig", "pyramid needs levels >= 1");
  if (cloud.empty()) throw EmptyCloudError("pyramid of empty cloud");

  std::vector<PointCloud> pyramid;
  pyramid.push_back(cloud);
  const double diag = bbox_diagonal(cloud);
  for (std::size_t k = 1; k < levels; ++k) {
    if (diag <= 0.0) {
      pyramid.push_back(cloud);
      continue;
    }
    const double cell = diag / 100.0 * std::pow(2.0, static_cast<double>(k - 1));

    struct CellAcc {
      Vec3 point_sum = Vec3::Zero();
      Vec3 normal_sum = Vec3::Zero();
      double weight_sum = 0.0;
      std::size_t count = 0;
    };
    struct KeyHash {
      std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
        std::size_t h = 1469598103934665603ull;
        for (std::int64_t v : k) {
          h ^= static_cast<std::size_t>(v);
          h *= 1099511628211ull;
        }
        return h;
      }
    };
    std::unordered_map<std::array<std::int64_t, 3>, std::size_t, KeyHash> map;
    std::vector<CellAcc> cells;  // insertion order keeps output deterministic
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      const std::array<std::int64_t, 3> key = {
          static_cast<std::int64_t>(std::floor(p.x() / cell)),
          static_cast<std::int64_t>(std::floor(p.y() / cell)),
          static_cast<std::int64_t>(std::floor(p.z() / cell))};
      auto [it, inserted] = map.try_emplace(key, cells.size());
      if (inserted) cells.emplace_back();
      CellAcc& acc = cells[it->second];
      acc.point_sum += p;
      if (cloud.has_normals()) acc.normal_sum += cloud.normals[i];
      acc.weight_sum += cloud.weight(i);
      acc.count += 1;
    }

    PointCloud level;
    level.points.reserve(cells.size());
    for (const CellAcc& acc : cells) {
      const double n = static_cast<double>(acc.count);
      level.points.push_back(acc.point_sum / n);
      if (cloud.has_normals()) {
        Vec3 nm = acc.normal_sum;
        if (nm.norm() > 0.0) nm.normalize();
        level.normals.push_back(nm);
      }
      if (cloud.has_weights()) level.weights.push_back(acc.weight_sum / n);
    }
    pyramid.push_back(std::move(level));
  }
  return pyramid;
}

namespace detail {

inline PointCloud subsample(const PointCloud& cloud, double fraction,
                            std::uint64_t seed) {
  const std::size_t n = cloud.size();
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));
  if (keep >= n) return cloud;

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed(seed));
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());

  PointCloud out;
  out.points.reserve(keep);
  for (std::size_t i : idx) {
    out.points.push_back(cloud.points[i]);
    if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
    if (cloud.has_weights()) out.weights.push_back(cloud.weights[i]);
  }
  return out;
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    const auto now = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(now - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// The full iterative registration driver. Starting from the optional
/// centroid-difference translation, alternates nearest-point matching and
/// a metric solve until epsilon falls to theta0, stops improving by more
/// than min_decrease, or the iteration cap is hit. With pyramid_levels > 1
/// the loop runs per level, coarsest first, warm-starting the next level.
/// apply(result.transform, <the subsampled source>) equals the final
/// internal source exactly.
inline IcpResult run_icp(const PointCloud& source, const PointCloud& dest,
                         const IcpConfig& config) {
  if (source.empty() || dest.empty())
    throw EmptyCloudError("registration needs two non-empty clouds");
  if (config.max_iterations < 1)
    throw Error("InvalidConfig", "max_iterations must be >= 1");
  if (config.theta0 < 0.0 || config.min_decrease < 0.0)
    throw Error("InvalidConfig", "theta0 and min_decrease must be >= 0");
  if (!(config.subsample_fraction > 0.0) || config.subsample_fraction > 1.0)
    throw Error("InvalidConfig", "subsample_fraction must be in (0, 1]");

  const detail::StageTimer total;
  IcpResult res;

  const PointCloud base =
      config.subsample_fraction < 1.0
          ? detail::subsample(source, config.subsample_fraction, config.seed)
          : source;

  RigidTransform T = RigidTransform::identity();
  if (config.align_centroids_first) T.t = centroid(dest) - centroid(base);

  const std::size_t levels = std::max<std::size_t>(1, config.pyramid_levels);
  const std::vector<PointCloud> src_pyr = build_pyramid(base, levels);
  const std::vector<PointCloud> dst_pyr = build_pyramid(dest, levels);

  for (std::size_t lvl = levels; lvl-- > 0;) {
    const PointCloud& S0 = src_pyr[lvl];
    const PointCloud& D = dst_pyr[lvl];
    const SpatialIndex index(D);
    std::vector<Eigen::Vector2d> lines;
    if (config.metric == MetricKind::PointToLine)
      lines = estimate_lines_2d(
          D, std::min(config.feature_neighbors, D.size()));

    PointCloud S_cur = apply(T, S0);
    CorrespondenceSet corr;
    try {
      const detail::StageTimer t;
      corr = match(S_cur, index, config.rejection);
      res.timings.match_ms += t.elapsed_ms();
    } catch (const NoCorrespondencesError&) {
      res.termination = Termination::NoCorrespondences;
      res.transform = T;
      res.timings.total_ms = total.elapsed_ms();
      return res;
    }

    double eps_prev = std::numeric_limits<double>::infinity();
    res.termination = Termination::MaxIterations;
    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
      RigidTransform dT;
      {
        const detail::StageTimer t;
        switch (config.metric) {
          case MetricKind::PointToPoint:
            dT = solve_point_to_point(S_cur, D, corr);
            break;
          case MetricKind::PointToPlane:
            dT = solve_point_to_plane(S_cur, D, corr);
            break;
          case MetricKind::PointToLine:
            dT = solve_point_to_line_2d(S_cur, D, corr, lines);
            break;
        }
        res.timings.solve_ms += t.elapsed_ms();
      }
      T = compose(dT, T);
      S_cur = apply(T, S0);
      try {
        const detail::StageTimer t;
        corr = match(S_cur, index, config.rejection);
        res.timings.match_ms += t.elapsed_ms();
      } catch (const NoCorrespondencesError&) {
        res.termination = Termination::NoCorrespondences;
        res.transform = T;
        res.timings.total_ms = total.elapsed_ms();
        return res;
      }
      double eps;
      {
        const detail::StageTimer t;
        eps = residual_error(S_cur, D, corr);
        res.timings.error_ms += t.elapsed_ms();
      }
      res.error_trace.push_back(eps);
      res.iterations += 1;

      if (eps <= config.theta0) {
        res.termination = Termination::Converged;
        break;
      }
      if (!(eps_prev - eps > config.min_decrease)) {
        res.termination = Termination::Stalled;
        break;
      }
      eps_prev = eps;
    }
    res.final_correspondences = std::move(corr);
  }

  res.transform = T;
  res.timings.total_ms = total.elapsed_ms();
  return res;
}

}  // namespace icpkit
