#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "icpkit/correspondence.hpp"
#include "icpkit/errors.hpp"
#include "icpkit/geometry.hpp"
#include "icpkit/kdtree.hpp"

namespace icpkit {

enum class MetricKind { PointToPoint, PointToPlane, PointToLine };

namespace detail {

/// Relative eigenvalue cutoff corresponding to condition number 1e12.
inline constexpr double kCondCutoff = 1e-12;

inline double pair_weight(const PointCloud& source, const PointCloud& dest,
                          const Correspondence& c) {
  return source.weight(c.source_index) * dest.weight(c.dest_index);
}

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

/// Nearest proper rotation to M in the Frobenius sense.
inline Mat3 project_to_rotation(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  Vec3 d(1.0, 1.0, (U * V.transpose()).determinant());
  return U * d.asDiagonal() * V.transpose();
}

inline void require_planar(const PointCloud& cloud, const char* which) {
  for (const Vec3& p : cloud.points)
    if (std::abs(p.z()) > 1e-9)
      throw DegenerateGeometryError(std::string(which) +
                                    " cloud is not planar (z != 0)");
}

}  // namespace detail

/// Least-squares rigid alignment for known correspondences: minimizes
/// sum of w * |d_j - R s_i - t|^2 in closed form via the SVD of the
/// weighted cross-covariance, with the determinant sign correction that
/// keeps R a proper rotation. Pair weight is the product of the two
/// endpoint weights (1 when absent).
inline RigidTransform solve_point_to_point(const PointCloud& source,
                                           const PointCloud& dest,
                                           const CorrespondenceSet& corr) {
  if (corr.size() < 3)
    throw TooFewPairsError("point-to-point needs at least 3 pairs, got " +
                           std::to_string(corr.size()));

  double wsum = 0.0;
  Vec3 cs = Vec3::Zero();
  Vec3 cd = Vec3::Zero();
  for (const Correspondence& c : corr) {
    const double w = detail::pair_weight(source, dest, c);
    cs += w * source.points[c.source_index];
    cd += w * dest.points[c.dest_index];
    wsum += w;
  }
  if (wsum <= 0.0)
    throw DegenerateGeometryError("all pair weights are zero");
  cs /= wsum;
  cd /= wsum;

  Mat3 H = Mat3::Zero();
  Mat3 scatter = Mat3::Zero();
  for (const Correspondence& c : corr) {
    const double w = detail::pair_weight(source, dest, c);
    const Vec3 s = source.points[c.source_index] - cs;
    const Vec3 d = dest.points[c.dest_index] - cd;
    H += w * s * d.transpose();
    scatter += w * s * s.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
  const Vec3 ev = es.eigenvalues();  // ascending, all >= 0 up to roundoff
  if (ev(2) <= 0.0)
    throw DegenerateGeometryError("matched source points coincide");
  if (ev(1) < ev(2) * detail::kCondCutoff * detail::kCondCutoff)
    throw DegenerateGeometryError(
        "matched source points are collinear, rotation not unique");

  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  Vec3 d(1.0, 1.0, (V * U.transpose()).determinant());
  const Mat3 R = V * d.asDiagonal() * U.transpose();
  return {R, cd - R * cs};
}

/// One linearized Gauss step for the plane metric: minimizes
/// sum of w * (n_j . (R s_i + t - d_j))^2 with R ~ I + [w]x, solving the
/// 6x6 normal equations, then projecting back to a proper rotation.
inline RigidTransform solve_point_to_plane(const PointCloud& source,
                                           const PointCloud& dest,
                                           const CorrespondenceSet& corr) {
  if (!dest.has_normals())
    throw DegenerateGeometryError(
        "plane metric needs destination normals");
  if (corr.size() < 6)
    throw TooFewPairsError("point-to-plane needs at least 6 pairs, got " +
                           std::to_string(corr.size()));

  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  Mat6 A = Mat6::Zero();
  Vec6 rhs = Vec6::Zero();
  for (const Correspondence& c : corr) {
    const double w = detail::pair_weight(source, dest, c);
    const Vec3& s = source.points[c.source_index];
    const Vec3& d = dest.points[c.dest_index];
    const Vec3& n = dest.normals[c.dest_index];
    Vec6 a;
    a << s.cross(n), n;
    A += w * a * a.transpose();
    rhs += w * a * n.dot(d - s);
  }

  Eigen::SelfAdjointEigenSolver<Mat6> es(A);
  const Vec6 ev = es.eigenvalues();
  if (ev(5) <= 0.0 || ev(0) < ev(5) * detail::kCondCutoff)
    throw DegenerateGeometryError(
        "plane-metric system is rank-deficient, motion unobservable");

  const Vec6 x = es.eigenvectors() *
                 (es.eigenvectors().transpose() * rhs).cwiseQuotient(ev);
  const Vec3 omega = x.head<3>();
  const Mat3 R =
      detail::project_to_rotation(Mat3::Identity() + detail::skew(omega));
  return {R, x.tail<3>()};
}

/// Rank report for the planar line metric. rank < 3 means some motion
/// component is unconstrained; nullspace spans it in (theta, tx, ty)
/// coordinates and the solver returns the minimum-norm motion.
struct LineSolveInfo {
  int rank = 3;
  Eigen::Vector3d nullspace = Eigen::Vector3d::Zero();
};

/// One linearized Gauss step for the planar line metric: minimizes
/// sum of w * (m_j . (R s_i + t - d_j))^2 where m_j is the unit normal of
/// the destination line direction at j and R rotates about z. Solves the
/// 3x3 normal equations in (theta, tx, ty); rank-deficient systems get the
/// minimum-norm solution with the nullspace reported through info.
inline RigidTransform solve_point_to_line_2d(
    const PointCloud& source, const PointCloud& dest,
    const CorrespondenceSet& corr,
    const std::vector<Eigen::Vector2d>& dest_lines,
    LineSolveInfo* info = nullptr) {
  if (corr.size() < 3)
    throw TooFewPairsError("point-to-line needs at least 3 pairs, got " +
                           std::to_string(corr.size()));
  if (dest_lines.size() != dest.size())
    throw DegenerateGeometryError("one line direction per destination point required");
  detail::require_planar(source, "source");
  detail::require_planar(dest, "destination");

  Mat3 A = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (const Correspondence& c : corr) {
    const double w = detail::pair_weight(source, dest, c);
    const Vec3& s = source.points[c.source_index];
    const Vec3& d = dest.points[c.dest_index];
    const Eigen::Vector2d& dir = dest_lines[c.dest_index];
    const Eigen::Vector2d m(-dir.y(), dir.x());
    // d/dtheta of R(theta) s at theta = 0 is (-sy, sx)
    Vec3 a(m.x() * -s.y() + m.y() * s.x(), m.x(), m.y());
    A += w * a * a.transpose();
    rhs += w * a * (m.x() * (d.x() - s.x()) + m.y() * (d.y() - s.y()));
  }

  Eigen::SelfAdjointEigenSolver<Mat3> es(A);
  const Vec3 ev = es.eigenvalues();
  if (ev(2) <= 0.0)
    throw DegenerateGeometryError("line-metric system has no constraints");
  const double cut = ev(2) * detail::kCondCutoff;

  int rank = 0;
  Vec3 x = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    if (ev(i) > cut) {
      const Vec3 v = es.eigenvectors().col(i);
      x += v * (v.dot(rhs) / ev(i));
      ++rank;
    }
  }
  if (info) {
    info->rank = rank;
    info->nullspace =
        rank < 3 ? Eigen::Vector3d(es.eigenvectors().col(0)) : Eigen::Vector3d::Zero();
  }
  return {rotation_z(x(0)), Vec3(x(1), x(2), 0.0)};
}

/// Per-point normals from the smallest principal direction of the k
/// nearest neighbors, oriented toward the viewpoint. Returns a copy of the
/// cloud with normals set.
inline PointCloud estimate_normals(const PointCloud& cloud, std::size_t k,
                                   const Vec3& viewpoint = Vec3::Zero()) {
  if (k < 3) throw TooFewPointsError("normal estimation needs k >= 3");
  if (cloud.size() < k)
    throw TooFewPointsError("normal estimation needs at least k points, " +
                            std::to_string(cloud.size()) + " < " +
                            std::to_string(k));

  SpatialIndex index(cloud);
  PointCloud out = cloud;
  out.normals.assign(cloud.size(), Vec3::Zero());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.knn(cloud.points[i], k);
    Vec3 mean = Vec3::Zero();
    for (const Neighbor& nb : nbrs) mean += cloud.points[nb.index];
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (const Neighbor& nb : nbrs) {
      const Vec3 q = cloud.points[nb.index] - mean;
      cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    Vec3 n = es.eigenvectors().col(0);
    n.normalize();
    if (n.dot(viewpoint - cloud.points[i]) < 0.0) n = -n;
    out.normals[i] = n;
  }
  return out;
}

/// Per-point local line directions for planar clouds: the largest
/// principal direction of the k nearest neighbors, canonicalized so the
/// first nonzero component is positive.
inline std::vector<Eigen::Vector2d> estimate_lines_2d(const PointCloud& cloud,
                                                      std::size_t k) {
  if (k < 2) throw TooFewPointsError("line estimation needs k >= 2");
  if (cloud.size() < k)
    throw TooFewPointsError("line estimation needs at least k points, " +
                            std::to_string(cloud.size()) + " < " +
                            std::to_string(k));

  SpatialIndex index(cloud);
  std::vector<Eigen::Vector2d> lines(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.knn(cloud.points[i], k);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const Neighbor& nb : nbrs) mean += cloud.points[nb.index].head<2>();
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const Neighbor& nb : nbrs) {
      const Eigen::Vector2d q = cloud.points[nb.index].head<2>() - mean;
      cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    Eigen::Vector2d dir = es.eigenvectors().col(1);  // largest eigenvalue
    if (dir.norm() == 0.0) dir = Eigen::Vector2d(1.0, 0.0);
    dir.normalize();
    if (dir.x() < 0.0 || (dir.x() == 0.0 && dir.y() < 0.0)) dir = -dir;
    lines[i] = dir;
  }
  return lines;
}

}  // namespace icpkit
