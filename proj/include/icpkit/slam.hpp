#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "icpkit/errors.hpp"
#include "icpkit/geometry.hpp"
#include "icpkit/icp.hpp"
#include "icpkit/random.hpp"

namespace icpkit {

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

inline RigidTransform pose_to_transform(const Pose2& p) {
  return {rotation_z(p.theta), Vec3(p.x, p.y, 0.0)};
}

inline Pose2 transform_to_pose(const RigidTransform& T) {
  return {T.t.x(), T.t.y(), std::atan2(T.R(1, 0), T.R(0, 0))};
}

/// a then b, as transform composition: world_from_b = world_from_a * a_from_b.
inline Pose2 pose_compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y,
          wrap_angle(a.theta + b.theta)};
}

/// Relative pose taking frame b into frame a: inv(a) composed with b.
inline Pose2 pose_between(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(b.theta - a.theta)};
}

struct Segment2 {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
};

struct Landmark {
  Eigen::Vector2d position;
  double confidence = 2.0;  // must exceed 1; plain points have weight 1
};

struct World {
  std::vector<Segment2> walls;
  std::vector<Landmark> landmarks;
};

struct SensorModel {
  std::size_t n_beams = 180;
  double fov = 2.0 * M_PI;  // radians, beams at cell centers across it
  double max_range = 10.0;  // meters
  double noise_sigma = 0.0;  // Gaussian range noise
  std::uint64_t seed = 0;
  double landmark_radius = 0.15;  // hits this close to a landmark are flagged
};

struct Scan {
  std::vector<double> bearings;  // strictly increasing, relative to heading
  std::vector<double> ranges;
  std::vector<bool> hit;
  std::vector<bool> landmark;
  std::vector<double> confidence;  // 1 for plain returns
};

namespace detail {

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

inline void validate_world(const World& world) {
  if (world.walls.empty())
    throw Error("InvalidWorld", "needs at least one wall");
  for (const Segment2& w : world.walls)
    if ((w.b - w.a).norm() <= 0.0)
      throw Error("InvalidWorld", "zero-length wall segment");
}

}  // namespace detail

/// Casts one beam fan from the pose: per beam the nearest ray-wall
/// intersection within max_range, plus seeded Gaussian range noise clamped
/// to (0, max_range]. Beams whose true hit point lies within
/// landmark_radius of a landmark carry that landmark's confidence.
inline Scan simulate_scan(const World& world, const Pose2& pose,
                          const SensorModel& sensor) {
  detail::validate_world(world);
  Rng rng(mix_seed(sensor.seed));
  const Eigen::Vector2d origin(pose.x, pose.y);

  Scan scan;
  scan.bearings.reserve(sensor.n_beams);
  for (std::size_t i = 0; i < sensor.n_beams; ++i) {
    const double bearing =
        -sensor.fov / 2.0 +
        sensor.fov * (static_cast<double>(i) + 0.5) /
            static_cast<double>(sensor.n_beams);
    const double heading = pose.theta + bearing;
    const Eigen::Vector2d dir(std::cos(heading), std::sin(heading));

    double best_t = std::numeric_limits<double>::infinity();
    for (const Segment2& wall : world.walls) {
      const Eigen::Vector2d e = wall.b - wall.a;
      const double denom = detail::cross2(dir, e);
      if (std::abs(denom) < 1e-15) continue;  // parallel
      const Eigen::Vector2d ao = wall.a - origin;
      const double t = detail::cross2(ao, e) / denom;
      const double u = detail::cross2(ao, dir) / denom;
      if (t > 1e-9 && u >= 0.0 && u <= 1.0 && t < best_t) best_t = t;
    }

    const bool hit = best_t <= sensor.max_range;
    double range = sensor.max_range;
    bool is_landmark = false;
    double confidence = 1.0;
    if (hit) {
      range = best_t;
      if (sensor.noise_sigma > 0.0)
        range += sensor.noise_sigma * rng.gaussian();
      range = std::min(std::max(range, 1e-9), sensor.max_range);

      const Eigen::Vector2d hit_point = origin + best_t * dir;
      double best_lm = std::numeric_limits<double>::infinity();
      for (const Landmark& lm : world.landmarks) {
        const double d = (lm.position - hit_point).norm();
        if (d <= sensor.landmark_radius && d < best_lm) {
          best_lm = d;
          is_landmark = true;
          confidence = lm.confidence;
        }
      }
    }

    scan.bearings.push_back(bearing);
    scan.ranges.push_back(range);
    scan.hit.push_back(hit);
    scan.landmark.push_back(is_landmark);
    scan.confidence.push_back(confidence);
  }
  return scan;
}

/// Polar returns to Cartesian points at z = 0 in the hint frame. Misses
/// are dropped. Landmark returns keep their confidence as point weight;
/// weights stay absent when the scan has no landmark returns.
inline PointCloud scan_to_cloud(const Scan& scan, const Pose2& hint) {
  PointCloud cloud;
  bool any_landmark = false;
  for (std::size_t i = 0; i < scan.ranges.size(); ++i)
    if (scan.hit[i] && scan.landmark[i]) any_landmark = true;

  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    if (!scan.hit[i]) continue;
    const double angle = hint.theta + scan.bearings[i];
    cloud.points.emplace_back(hint.x + scan.ranges[i] * std::cos(angle),
                              hint.y + scan.ranges[i] * std::sin(angle), 0.0);
    if (any_landmark)
      cloud.weights.push_back(scan.landmark[i] ? scan.confidence[i] : 1.0);
  }
  return cloud;
}

enum class MatchMode { Landmark, NonLandmark };

/// Landmark mode registers point-to-point with landmark confidence
/// weights; NonLandmark mode registers point-to-line on the unweighted
/// clouds. use_icp_metric keeps icp.metric as given instead of the mode's
/// default, so the two modes can be compared on one metric.
struct SlamOptions {
  MatchMode mode = MatchMode::NonLandmark;
  IcpConfig icp;
  bool use_icp_metric = false;
  bool enable_loop_closure = true;
  double keyframe_translation = 0.2;  // m
  double keyframe_rotation = 0.1;     // rad
  double closure_radius = 0.5;        // m
  std::size_t closure_min_separation = 10;  // frames
  double closure_error_factor = 4.0;  // accept when eps <= factor * theta0
  double max_motion_step = 1.0;       // trajectory sanity bound (m)
};

struct FrameDiagnostics {
  std::size_t frame = 0;
  std::size_t iterations = 0;
  double final_error = 0.0;
  Termination termination = Termination::Converged;
  bool skipped = false;  // registration failed, odometry coasted
  bool keyframe = false;
};

struct LoopClosure {
  std::size_t from_frame = 0;  // earlier keyframe
  std::size_t to_frame = 0;    // frame that closed the loop
  double final_error = 0.0;
  Pose2 relative;  // accepted re-registration, to_frame in from_frame's frame
};

struct SlamReport {
  std::vector<Pose2> estimated;
  std::vector<Pose2> ground_truth;
  double ate = 0.0;  // RMSE over positions
  std::vector<FrameDiagnostics> frames;
  std::vector<LoopClosure> closures;
  std::vector<std::size_t> keyframes;
  std::vector<double> frame_ms;  // per-frame latency, informational
};

/// Position RMSE between two equal-length trajectories.
inline double trajectory_ate(const std::vector<Pose2>& estimated,
                             const std::vector<Pose2>& truth) {
  if (estimated.size() != truth.size())
    throw Error("InvalidTrajectory", "trajectory lengths differ");
  if (estimated.empty())
    throw Error("InvalidTrajectory", "empty trajectory");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const double dx = estimated[i].x - truth[i].x;
    const double dy = estimated[i].y - truth[i].y;
    acc += dx * dx + dy * dy;
  }
  return std::sqrt(acc / static_cast<double>(estimated.size()));
}

namespace detail {

inline void validate_trajectory(const std::vector<Pose2>& traj,
                                double max_step) {
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (!std::isfinite(traj[i].x) || !std::isfinite(traj[i].y) ||
        !std::isfinite(traj[i].theta))
      throw Error("InvalidTrajectory", "non-finite pose");
    if (i > 0) {
      const double dx = traj[i].x - traj[i - 1].x;
      const double dy = traj[i].y - traj[i - 1].y;
      if (std::sqrt(dx * dx + dy * dy) > max_step)
        throw Error("InvalidTrajectory",
                    "consecutive poses exceed the max motion step");
    }
  }
}

inline std::vector<PointCloud> simulate_clouds(
    const World& world, const std::vector<Pose2>& trajectory,
    const SensorModel& sensor, bool keep_weights) {
  std::vector<PointCloud> clouds(trajectory.size());
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    SensorModel frame_sensor = sensor;
    frame_sensor.seed = mix_seed(
        sensor.seed + static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ull);
    const Scan scan = simulate_scan(world, trajectory[k], frame_sensor);
    clouds[k] = scan_to_cloud(scan, Pose2{});
    if (!keep_weights) clouds[k].weights.clear();
  }
  return clouds;
}

struct Registration {
  bool ok = false;
  IcpResult result;
};

inline Registration register_clouds(const PointCloud& source,
                                    const PointCloud& dest,
                                    const IcpConfig& config) {
  Registration reg;
  if (source.empty() || dest.empty()) return reg;
  try {
    reg.result = run_icp(source, dest, config);
    reg.ok = reg.result.termination != Termination::NoCorrespondences;
  } catch (const Error&) {
    reg.ok = false;
  }
  return reg;
}

inline Registration register_warm(const PointCloud& source,
                                  const PointCloud& dest,
                                  const RigidTransform& warm,
                                  IcpConfig config) {
  Registration reg;
  if (source.empty() || dest.empty()) return reg;
  config.align_centroids_first = false;
  try {
    reg.result = run_icp(apply(warm, source), dest, config);
    reg.ok = reg.result.termination != Termination::NoCorrespondences;
    reg.result.transform = compose(reg.result.transform, warm);
  } catch (const Error&) {
    reg.ok = false;
  }
  return reg;
}

/// Spreads a pose correction linearly over frames (anchor, last]: frame
/// anchor keeps its pose, frame last receives the full correction.
inline void distribute_correction(std::vector<Pose2>& poses,
                                  std::size_t anchor, std::size_t last,
                                  const Pose2& target_at_last) {
  const Pose2& old_last = poses[last];
  const double dx = target_at_last.x - old_last.x;
  const double dy = target_at_last.y - old_last.y;
  const double dth = wrap_angle(target_at_last.theta - old_last.theta);
  const double span = static_cast<double>(last - anchor);
  for (std::size_t i = anchor + 1; i <= last; ++i) {
    const double alpha = static_cast<double>(i - anchor) / span;
    poses[i].x += alpha * dx;
    poses[i].y += alpha * dy;
    poses[i].theta = wrap_angle(poses[i].theta + alpha * dth);
  }
}

inline IcpConfig effective_icp(const SlamOptions& options) {
  IcpConfig icp = options.icp;
  if (!options.use_icp_metric)
    icp.metric = options.mode == MatchMode::Landmark ? MetricKind::PointToPoint
                                                     : MetricKind::PointToLine;
  return icp;
}

}  // namespace detail

/// Sequential scan-matching pipeline: each frame is registered onto the
/// previous one, transforms are chained into an estimated trajectory, and
/// whenever the estimate returns near an earlier keyframe the pair is
/// re-registered and the residual correction is spread linearly over the
/// intervening frames. Frames are processed once, in order, with no
/// lookback past the stored keyframes.
inline SlamReport run_online(const World& world,
                             const std::vector<Pose2>& trajectory,
                             const SensorModel& sensor,
                             const SlamOptions& options) {
  if (trajectory.size() < 2)
    throw TooFewFramesError("need at least 2 frames, got " +
                            std::to_string(trajectory.size()));
  detail::validate_world(world);
  detail::validate_trajectory(trajectory, options.max_motion_step);

  const IcpConfig icp = detail::effective_icp(options);
  const bool keep_weights = options.mode == MatchMode::Landmark;
  const std::vector<PointCloud> clouds =
      detail::simulate_clouds(world, trajectory, sensor, keep_weights);

  const std::size_t n = trajectory.size();
  SlamReport report;
  report.ground_truth = trajectory;
  report.estimated.resize(n);
  report.estimated[0] = trajectory[0];  // anchored at the true start
  report.frames.resize(n);
  report.frame_ms.assign(n, 0.0);
  report.keyframes.push_back(0);
  report.frames[0].keyframe = true;

  Pose2 prev_delta;  // identity; used to coast over failed frames
  std::size_t last_closure_frame = 0;

  for (std::size_t k = 1; k < n; ++k) {
    const detail::StageTimer frame_timer;
    FrameDiagnostics& diag = report.frames[k];
    diag.frame = k;

    const detail::Registration reg =
        detail::register_clouds(clouds[k], clouds[k - 1], icp);
    Pose2 delta = prev_delta;
    if (reg.ok) {
      delta = transform_to_pose(reg.result.transform);
      diag.iterations = reg.result.iterations;
      diag.final_error = reg.result.error_trace.empty()
                             ? 0.0
                             : reg.result.error_trace.back();
      diag.termination = reg.result.termination;
    } else {
      diag.skipped = true;
      diag.termination = Termination::NoCorrespondences;
    }
    report.estimated[k] = pose_compose(report.estimated[k - 1], delta);
    prev_delta = delta;

    const Pose2& last_kf = report.estimated[report.keyframes.back()];
    const Pose2 since_kf = pose_between(last_kf, report.estimated[k]);
    if (std::sqrt(since_kf.x * since_kf.x + since_kf.y * since_kf.y) >
            options.keyframe_translation ||
        std::abs(since_kf.theta) > options.keyframe_rotation) {
      report.keyframes.push_back(k);
      diag.keyframe = true;
    }

    if (options.enable_loop_closure &&
        k - last_closure_frame >= options.closure_min_separation) {
      for (std::size_t kf : report.keyframes) {
        if (k - kf < options.closure_min_separation) break;
        const Pose2& cand = report.estimated[kf];
        const double dx = report.estimated[k].x - cand.x;
        const double dy = report.estimated[k].y - cand.y;
        if (std::sqrt(dx * dx + dy * dy) > options.closure_radius) continue;

        const RigidTransform warm = pose_to_transform(
            pose_between(cand, report.estimated[k]));
        const detail::Registration ver =
            detail::register_warm(clouds[k], clouds[kf], warm, icp);
        if (!ver.ok || ver.result.error_trace.empty()) continue;
        const double eps = ver.result.error_trace.back();
        const bool settled =
            ver.result.termination == Termination::Converged ||
            ver.result.termination == Termination::Stalled;
        if (!settled || eps > options.closure_error_factor * icp.theta0)
          continue;

        const Pose2 rel = transform_to_pose(ver.result.transform);
        const Pose2 corrected = pose_compose(cand, rel);
        detail::distribute_correction(report.estimated, kf, k, corrected);
        report.closures.push_back({kf, k, eps, rel});
        last_closure_frame = k;
        break;
      }
    }

    report.frame_ms[k] = frame_timer.elapsed_ms();
  }

  report.ate = trajectory_ate(report.estimated, report.ground_truth);
  return report;
}

namespace detail {

inline RejectionPolicy tighten(const RejectionPolicy& policy) {
  RejectionPolicy p = policy;
  switch (policy.kind) {
    case RejectionPolicy::Kind::MaxDistance:
      p.max_distance = policy.max_distance / 2.0;
      break;
    case RejectionPolicy::Kind::TrimFraction:
      p.trim_fraction = (1.0 + policy.trim_fraction) / 2.0;
      break;
    case RejectionPolicy::Kind::MedianScale:
      p.scale = policy.scale / 2.0;
      break;
    case RejectionPolicy::Kind::None:
      break;
  }
  return p;
}

}  // namespace detail

/// Two passes: the online pipeline over the stored dataset, then one
/// global refinement that re-registers adjacent keyframe pairs and the
/// detected closure pairs against the pass-1 estimates under a tightened
/// rejection cap, interpolating the keyframe corrections over the frames
/// in between.
inline SlamReport run_offline(const World& world,
                              const std::vector<Pose2>& trajectory,
                              const SensorModel& sensor,
                              const SlamOptions& options) {
  SlamReport report = run_online(world, trajectory, sensor, options);

  IcpConfig icp = detail::effective_icp(options);
  icp.rejection = detail::tighten(icp.rejection);
  const bool keep_weights = options.mode == MatchMode::Landmark;
  const std::vector<PointCloud> clouds =
      detail::simulate_clouds(world, trajectory, sensor, keep_weights);

  const std::vector<Pose2> pass1 = report.estimated;
  const std::vector<std::size_t>& K = report.keyframes;
  std::vector<Pose2>& est = report.estimated;

  // Refine the keyframe chain with direct keyframe-to-keyframe
  // registrations, warm-started from pass 1.
  std::vector<Pose2> kf_new(K.size());
  kf_new[0] = pass1[K[0]];
  for (std::size_t i = 0; i + 1 < K.size(); ++i) {
    const std::size_t a = K[i];
    const std::size_t b = K[i + 1];
    const RigidTransform warm =
        pose_to_transform(pose_between(pass1[a], pass1[b]));
    const detail::Registration reg =
        detail::register_warm(clouds[b], clouds[a], warm, icp);
    const Pose2 rel = reg.ok ? transform_to_pose(reg.result.transform)
                             : pose_between(pass1[a], pass1[b]);
    kf_new[i + 1] = pose_compose(kf_new[i], rel);
  }

  // Blend the keyframe corrections over intermediate frames.
  for (std::size_t i = 0; i + 1 < K.size(); ++i) {
    const std::size_t a = K[i];
    const std::size_t b = K[i + 1];
    const Pose2 ca{kf_new[i].x - pass1[a].x, kf_new[i].y - pass1[a].y,
                   wrap_angle(kf_new[i].theta - pass1[a].theta)};
    const Pose2 cb{kf_new[i + 1].x - pass1[b].x, kf_new[i + 1].y - pass1[b].y,
                   wrap_angle(kf_new[i + 1].theta - pass1[b].theta)};
    for (std::size_t f = a; f < b; ++f) {
      const double alpha =
          static_cast<double>(f - a) / static_cast<double>(b - a);
      est[f].x = pass1[f].x + (1.0 - alpha) * ca.x + alpha * cb.x;
      est[f].y = pass1[f].y + (1.0 - alpha) * ca.y + alpha * cb.y;
      est[f].theta = wrap_angle(pass1[f].theta + (1.0 - alpha) * ca.theta +
                                alpha * cb.theta);
    }
  }
  if (!K.empty()) {
    const std::size_t last_kf = K.back();
    const Pose2 cl{kf_new.back().x - pass1[last_kf].x,
                   kf_new.back().y - pass1[last_kf].y,
                   wrap_angle(kf_new.back().theta - pass1[last_kf].theta)};
    for (std::size_t f = last_kf; f < est.size(); ++f) {
      est[f].x = pass1[f].x + cl.x;
      est[f].y = pass1[f].y + cl.y;
      est[f].theta = wrap_angle(pass1[f].theta + cl.theta);
    }
  }

  // Re-apply the detected closures on the refined chain.
  for (const LoopClosure& closure : report.closures) {
    const std::size_t j = closure.from_frame;
    const std::size_t k = closure.to_frame;
    const RigidTransform warm = pose_to_transform(pose_between(est[j], est[k]));
    const detail::Registration reg =
        detail::register_warm(clouds[k], clouds[j], warm, icp);
    if (!reg.ok || reg.result.error_trace.empty()) continue;
    const double eps = reg.result.error_trace.back();
    const bool settled = reg.result.termination == Termination::Converged ||
                         reg.result.termination == Termination::Stalled;
    if (!settled || eps > options.closure_error_factor * icp.theta0) continue;
    const Pose2 corrected =
        pose_compose(est[j], transform_to_pose(reg.result.transform));
    // Frames past k chained off the corrected pose during pass 1, so the
    // full correction carries over them; only j..k gets the linear ramp.
    const double dx = corrected.x - est[k].x;
    const double dy = corrected.y - est[k].y;
    const double dth = wrap_angle(corrected.theta - est[k].theta);
    detail::distribute_correction(est, j, k, corrected);
    for (std::size_t f = k + 1; f < est.size(); ++f) {
      est[f].x += dx;
      est[f].y += dy;
      est[f].theta = wrap_angle(est[f].theta + dth);
    }
  }

  report.ate = trajectory_ate(report.estimated, report.ground_truth);
  return report;
}

}  // namespace icpkit
