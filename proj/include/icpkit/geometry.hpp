#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "icpkit/errors.hpp"

namespace icpkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// A cloud of points with optional per-point normals and weights.
/// normals and weights are either empty or the same length as points.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_weights() const { return !weights.empty(); }

  double weight(std::size_t i) const {
    return weights.empty() ? 1.0 : weights[i];
  }
};

/// Rigid motion x -> R x + t with R a rotation matrix.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 operator()(const Vec3& p) const { return R * p + t; }
};

/// Composition: (a * b)(x) = a(b(x)).
inline RigidTransform compose(const RigidTransform& a,
                              const RigidTransform& b) {
  return {a.R * b.R, a.R * b.t + a.t};
}

inline RigidTransform invert(const RigidTransform& T) {
  Mat3 Rt = T.R.transpose();
  return {Rt, -(Rt * T.t)};
}

/// Weighted centroid. Throws EmptyCloudError on an empty cloud and
/// DegenerateGeometryError when all weights are zero.
inline Vec3 centroid(const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyCloudError("centroid of empty cloud");
  Vec3 acc = Vec3::Zero();
  double wsum = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double w = cloud.weight(i);
    acc += w * cloud.points[i];
    wsum += w;
  }
  if (wsum <= 0.0)
    throw DegenerateGeometryError("centroid with zero total weight");
  return acc / wsum;
}

/// Applies T to every point and rotates normals if present. Weights carry
/// over unchanged.
inline PointCloud apply(const RigidTransform& T, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(T(p));
  out.normals.reserve(cloud.normals.size());
  for (const Vec3& n : cloud.normals) out.normals.push_back(T.R * n);
  out.weights = cloud.weights;
  return out;
}

/// How far apart two rigid transforms are: the rotation angle of Ra^T Rb
/// and the Euclidean distance of the translations. Both zero iff equal.
struct TransformDelta {
  double angle = 0.0;  // radians, in [0, pi]
  double shift = 0.0;  // meters
};

inline TransformDelta transform_distance(const RigidTransform& a,
                                         const RigidTransform& b) {
  const Mat3 Rd = a.R.transpose() * b.R;
  double c = (Rd.trace() - 1.0) / 2.0;
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return {std::acos(c), (a.t - b.t).norm()};
}

/// Axis-aligned bounding box diagonal length. Zero for a single point.
inline double bbox_diagonal(const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyCloudError("bounding box of empty cloud");
  Vec3 lo = cloud.points.front();
  Vec3 hi = cloud.points.front();
  for (const Vec3& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

inline Mat3 rotation_z(double theta) {
  Mat3 R = Mat3::Identity();
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  R(0, 0) = c;
  R(0, 1) = -s;
  R(1, 0) = s;
  R(1, 1) = c;
  return R;
}

/// Rotation about an arbitrary unit axis by angle (Rodrigues).
inline Mat3 rotation_axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace icpkit
