#pragma once

#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "icpkit/bayes.hpp"
#include "icpkit/errors.hpp"
#include "icpkit/icp.hpp"
#include "icpkit/slam.hpp"
#include "icpkit/version.hpp"

namespace icpkit {

using Json = nlohmann::ordered_json;

/// Reports keep all wall-clock values under keys named "timings_ms" so
/// that everything else is reproducible byte for byte given the same
/// inputs and seed.
inline constexpr const char* kTimingsKey = "timings_ms";

namespace detail {

inline Json transform_to_json(const RigidTransform& T) {
  Json j;
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(T.R(r, c));
  j["rotation"] = std::move(rot);
  j["translation"] = {T.t.x(), T.t.y(), T.t.z()};
  return j;
}

inline RigidTransform transform_from_json(const Json& j) {
  RigidTransform T;
  const auto& rot = j.at("rotation");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) T.R(r, c) = rot.at(r * 3 + c).get<double>();
  const auto& t = j.at("translation");
  T.t = Vec3(t.at(0).get<double>(), t.at(1).get<double>(),
             t.at(2).get<double>());
  return T;
}

inline Json pose_to_json(const Pose2& p) { return Json{p.x, p.y, p.theta}; }

}  // namespace detail

inline Json rejection_to_json(const RejectionPolicy& policy) {
  Json j;
  switch (policy.kind) {
    case RejectionPolicy::Kind::None:
      j["kind"] = "none";
      break;
    case RejectionPolicy::Kind::MaxDistance:
      j["kind"] = "max_distance";
      j["max_distance"] = policy.max_distance;
      break;
    case RejectionPolicy::Kind::TrimFraction:
      j["kind"] = "trim_fraction";
      j["trim_fraction"] = policy.trim_fraction;
      break;
    case RejectionPolicy::Kind::MedianScale:
      j["kind"] = "median_scale";
      j["scale"] = policy.scale;
      break;
  }
  return j;
}

inline const char* to_string(MetricKind m) {
  switch (m) {
    case MetricKind::PointToPoint:
      return "point_to_point";
    case MetricKind::PointToPlane:
      return "point_to_plane";
    case MetricKind::PointToLine:
      return "point_to_line";
  }
  return "unknown";
}

inline Json icp_config_to_json(const IcpConfig& config) {
  Json j;
  j["metric"] = to_string(config.metric);
  j["theta0"] = config.theta0;
  j["max_iterations"] = config.max_iterations;
  j["min_decrease"] = config.min_decrease;
  j["rejection"] = rejection_to_json(config.rejection);
  j["align_centroids_first"] = config.align_centroids_first;
  j["subsample_fraction"] = config.subsample_fraction;
  j["pyramid_levels"] = config.pyramid_levels;
  j["seed"] = config.seed;
  j["feature_neighbors"] = config.feature_neighbors;
  return j;
}

/// Report for one registration run. The caller merges extra config keys
/// (file paths etc.) into ["config"] before saving.
inline Json make_register_report(const IcpConfig& config,
                                 const IcpResult& result) {
  Json j;
  j["tool"] = "icpkit";
  j["version"] = kVersion;
  j["command"] = "register";
  j["config"] = icp_config_to_json(config);
  Json res;
  res["termination"] = to_string(result.termination);
  res["iterations"] = result.iterations;
  res["error_trace"] = result.error_trace;
  if (!result.error_trace.empty())
    res["final_error"] = result.error_trace.back();
  res["transform"] = detail::transform_to_json(result.transform);
  res["correspondences"] = result.final_correspondences.size();
  j["result"] = std::move(res);
  Json t;
  t["match"] = result.timings.match_ms;
  t["solve"] = result.timings.solve_ms;
  t["error"] = result.timings.error_ms;
  t["total"] = result.timings.total_ms;
  j[kTimingsKey] = std::move(t);
  return j;
}

inline Json make_slam_report(const Json& config_echo,
                             const SlamReport& report) {
  Json j;
  j["tool"] = "icpkit";
  j["version"] = kVersion;
  j["command"] = "slam-sim";
  j["config"] = config_echo;

  Json res;
  res["ate"] = report.ate;
  res["frames"] = report.estimated.size();
  res["keyframes"] = report.keyframes;
  Json closures = Json::array();
  for (const LoopClosure& c : report.closures) {
    Json cj;
    cj["from"] = c.from_frame;
    cj["to"] = c.to_frame;
    cj["final_error"] = c.final_error;
    closures.push_back(std::move(cj));
  }
  res["closures"] = std::move(closures);
  Json diag = Json::array();
  for (const FrameDiagnostics& f : report.frames) {
    Json fj;
    fj["frame"] = f.frame;
    fj["iterations"] = f.iterations;
    fj["final_error"] = f.final_error;
    fj["termination"] = to_string(f.termination);
    fj["skipped"] = f.skipped;
    fj["keyframe"] = f.keyframe;
    diag.push_back(std::move(fj));
  }
  res["frame_diagnostics"] = std::move(diag);
  Json est = Json::array();
  for (const Pose2& p : report.estimated)
    est.push_back(detail::pose_to_json(p));
  res["estimated"] = std::move(est);
  Json truth = Json::array();
  for (const Pose2& p : report.ground_truth)
    truth.push_back(detail::pose_to_json(p));
  res["ground_truth"] = std::move(truth);
  j["result"] = std::move(res);

  Json t;
  t["frame"] = report.frame_ms;
  j[kTimingsKey] = std::move(t);
  return j;
}

inline Json make_filter_report(const Json& config_echo,
                               const std::vector<GridBelief>& trace) {
  Json j;
  j["tool"] = "icpkit";
  j["version"] = kVersion;
  j["command"] = "filter-demo";
  j["config"] = config_echo;
  Json beliefs = Json::array();
  for (const GridBelief& b : trace) beliefs.push_back(b.cells);
  j["result"] = Json{{"beliefs", std::move(beliefs)}};
  return j;
}

inline void save_report(const Json& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << report.dump(2) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline Json load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("report: ") + e.what());
  }
}

/// Removes every "timings_ms" subtree in place. Reports with equal seeds
/// and inputs are byte-identical after this.
inline void strip_timings(Json& j) {
  if (j.is_object()) {
    j.erase(kTimingsKey);
    for (auto& [key, value] : j.items()) strip_timings(value);
  } else if (j.is_array()) {
    for (auto& value : j) strip_timings(value);
  }
}

}  // namespace icpkit
