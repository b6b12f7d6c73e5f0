#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace icpkit;
using testsup::random_cloud;
using testsup::random_transform;

namespace {

void expect_transform_near(const RigidTransform& a, const RigidTransform& b,
                           double tol_angle, double tol_shift) {
  const TransformDelta d = transform_distance(a, b);
  EXPECT_LE(d.angle, tol_angle);
  EXPECT_LE(d.shift, tol_shift);
}

TEST(Centroid, TwoPointMean) {
  PointCloud c;
  c.points = {{0, 0, 0}, {2, 0, 0}};
  EXPECT_TRUE(centroid(c).isApprox(Vec3(1, 0, 0), 1e-15));
}

TEST(Centroid, SinglePoint) {
  PointCloud c;
  c.points = {{5, 5, 5}};
  EXPECT_TRUE(centroid(c).isApprox(Vec3(5, 5, 5), 1e-15));
}

TEST(Centroid, ArithmeticProgression) {
  PointCloud c;
  c.points = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  EXPECT_TRUE(centroid(c).isApprox(Vec3(4, 5, 6), 1e-14));
}

TEST(Centroid, WeightedMean) {
  PointCloud c;
  c.points = {{0, 0, 0}, {4, 0, 0}};
  c.weights = {1.0, 3.0};
  EXPECT_TRUE(centroid(c).isApprox(Vec3(3, 0, 0), 1e-14));
}

TEST(Centroid, EmptyThrows) {
  EXPECT_THROW(centroid(PointCloud{}), EmptyCloudError);
}

TEST(Centroid, AllZeroWeightsThrow) {
  PointCloud c;
  c.points = {{1, 0, 0}, {2, 0, 0}};
  c.weights = {0.0, 0.0};
  EXPECT_THROW(centroid(c), DegenerateGeometryError);
}

TEST(Apply, IdentityKeepsCloud) {
  Rng rng(11);
  const PointCloud c = random_cloud(rng, 20);
  const PointCloud out = apply(RigidTransform::identity(), c);
  ASSERT_EQ(out.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    EXPECT_TRUE(out.points[i].isApprox(c.points[i], 0.0));
}

TEST(Apply, PureTranslation) {
  PointCloud c;
  c.points = {{0, 0, 0}};
  RigidTransform T = RigidTransform::identity();
  T.t = Vec3(1, 0, 0);
  EXPECT_TRUE(apply(T, c).points[0].isApprox(Vec3(1, 0, 0), 1e-15));
}

TEST(Apply, QuarterTurnAboutZ) {
  PointCloud c;
  c.points = {{1, 0, 0}};
  const RigidTransform T{rotation_z(M_PI / 2.0), Vec3::Zero()};
  EXPECT_LT((apply(T, c).points[0] - Vec3(0, 1, 0)).norm(), 1e-12);
}

TEST(Apply, RotatesNormalsKeepsWeights) {
  PointCloud c;
  c.points = {{1, 2, 3}, {0, 0, 1}};
  c.normals = {Vec3(1, 0, 0), Vec3(0, 0, 1)};
  c.weights = {2.0, 5.0};
  const RigidTransform T{rotation_z(M_PI / 2.0), Vec3(7, 8, 9)};
  const PointCloud out = apply(T, c);
  EXPECT_LT((out.normals[0] - Vec3(0, 1, 0)).norm(), 1e-12);
  EXPECT_LT((out.normals[1] - Vec3(0, 0, 1)).norm(), 1e-12);
  EXPECT_EQ(out.weights, c.weights);
  // input untouched
  EXPECT_TRUE(c.points[0].isApprox(Vec3(1, 2, 3), 0.0));
}

TEST(Compose, WithIdentity) {
  Rng rng(3);
  const RigidTransform T = random_transform(rng, 1.0, 2.0);
  expect_transform_near(compose(T, RigidTransform::identity()), T, 1e-15,
                        1e-15);
  expect_transform_near(compose(RigidTransform::identity(), T), T, 1e-15,
                        1e-15);
}

TEST(Compose, WithInverseIsIdentity) {
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const RigidTransform T = random_transform(rng, 2.0, 3.0);
    expect_transform_near(compose(T, invert(T)), RigidTransform::identity(),
                          1e-12, 1e-12);
  }
}

TEST(Compose, TwoTranslations) {
  RigidTransform a = RigidTransform::identity();
  a.t = Vec3(1, 0, 0);
  RigidTransform b = RigidTransform::identity();
  b.t = Vec3(0, 2, 0);
  const RigidTransform c = compose(a, b);
  EXPECT_TRUE(c.R.isApprox(Mat3::Identity(), 1e-15));
  EXPECT_TRUE(c.t.isApprox(Vec3(1, 2, 0), 1e-15));
}

TEST(Compose, MatchesSequentialApplication) {
  Rng rng(5);
  const RigidTransform a = random_transform(rng, 1.5, 2.0);
  const RigidTransform b = random_transform(rng, 1.5, 2.0);
  const RigidTransform c = compose(a, b);
  for (int i = 0; i < 10; ++i) {
    const Vec3 p(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    EXPECT_LT((c(p) - a(b(p))).norm(), 1e-12);
  }
}

TEST(Compose, Associative) {
  Rng rng(6);
  for (int i = 0; i < 10; ++i) {
    const RigidTransform a = random_transform(rng, 2.0, 1.0);
    const RigidTransform b = random_transform(rng, 2.0, 1.0);
    const RigidTransform c = random_transform(rng, 2.0, 1.0);
    const RigidTransform left = compose(compose(a, b), c);
    const RigidTransform right = compose(a, compose(b, c));
    EXPECT_LT((left.R - right.R).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((left.t - right.t).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Invert, Identity) {
  expect_transform_near(invert(RigidTransform::identity()),
                        RigidTransform::identity(), 1e-15, 1e-15);
}

TEST(Invert, PureTranslation) {
  RigidTransform T = RigidTransform::identity();
  T.t = Vec3(1, 2, 3);
  const RigidTransform inv = invert(T);
  EXPECT_TRUE(inv.R.isApprox(Mat3::Identity(), 1e-15));
  EXPECT_TRUE(inv.t.isApprox(Vec3(-1, -2, -3), 1e-15));
}

TEST(Invert, Involution) {
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    const RigidTransform T = random_transform(rng, 2.5, 4.0);
    const RigidTransform back = invert(invert(T));
    EXPECT_LT((back.R - T.R).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((back.t - T.t).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TransformDistance, EqualTransformsAreZero) {
  Rng rng(8);
  const RigidTransform T = random_transform(rng, 1.0, 1.0);
  const TransformDelta d = transform_distance(T, T);
  EXPECT_NEAR(d.angle, 0.0, 1e-7);
  EXPECT_NEAR(d.shift, 0.0, 1e-15);
}

TEST(TransformDistance, QuarterTurn) {
  const RigidTransform rot{rotation_z(M_PI / 2.0), Vec3::Zero()};
  const TransformDelta d =
      transform_distance(RigidTransform::identity(), rot);
  EXPECT_NEAR(d.angle, M_PI / 2.0, 1e-12);
  EXPECT_NEAR(d.shift, 0.0, 1e-15);
}

TEST(TransformDistance, ThreeFourFiveTranslation) {
  RigidTransform T = RigidTransform::identity();
  T.t = Vec3(3, 4, 0);
  const TransformDelta d =
      transform_distance(RigidTransform::identity(), T);
  EXPECT_NEAR(d.angle, 0.0, 1e-12);
  EXPECT_NEAR(d.shift, 5.0, 1e-12);
}

TEST(GeometryProperties, ApplyPreservesPairwiseDistances) {
  Rng rng(9);
  const PointCloud c = random_cloud(rng, 15);
  const RigidTransform T = random_transform(rng, 3.0, 5.0);
  const PointCloud out = apply(T, c);
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const double before = (c.points[i] - c.points[j]).norm();
      const double after = (out.points[i] - out.points[j]).norm();
      EXPECT_NEAR(before, after, 1e-9);
    }
}

TEST(GeometryProperties, CentroidCommutesWithApply) {
  Rng rng(10);
  for (int rep = 0; rep < 10; ++rep) {
    const PointCloud c = random_cloud(rng, 40);
    const RigidTransform T = random_transform(rng, 3.0, 5.0);
    const Vec3 moved_centroid = centroid(apply(T, c));
    EXPECT_LT((moved_centroid - T(centroid(c))).norm(), 1e-9);
  }
}

TEST(GeometryProperties, RandomRotationsAreProper) {
  Rng rng(12);
  for (int i = 0; i < 20; ++i) {
    const Mat3 R = testsup::random_rotation(rng, M_PI);
    EXPECT_LT((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff(),
              1e-9);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-9);
  }
}

TEST(GeometryProperties, BboxDiagonal) {
  PointCloud c;
  c.points = {{0, 0, 0}, {3, 4, 0}};
  EXPECT_NEAR(bbox_diagonal(c), 5.0, 1e-12);
}

}  // namespace
