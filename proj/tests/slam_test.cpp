#include <gtest/gtest.h>

#include <cmath>

#include "slam_fixtures.hpp"
#include "test_support.hpp"

using namespace icpkit;

namespace {

SensorModel room_sensor(std::uint64_t seed) {
  SensorModel s;
  s.n_beams = 90;
  s.fov = 2.0 * M_PI;
  s.max_range = 10.0;
  s.seed = seed;
  return s;
}

void expect_pose_near(const Pose2& a, const Pose2& b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(std::abs(wrap_angle(a.theta - b.theta)), 0.0, tol);
}

TEST(PoseAlgebra, WrapAngleStaysInHalfOpenRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_NEAR(wrap_angle(2.0 * M_PI + 0.3), 0.3, 1e-12);
  EXPECT_NEAR(wrap_angle(-2.0 * M_PI - 0.3), -0.3, 1e-12);
  EXPECT_NEAR(wrap_angle(3.5 * M_PI), -0.5 * M_PI, 1e-12);
  EXPECT_NEAR(wrap_angle(-3.5 * M_PI), 0.5 * M_PI, 1e-12);
}

TEST(PoseAlgebra, ComposeBetweenRoundTrip) {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const Pose2 a{rng.uniform(-5, 5), rng.uniform(-5, 5),
                  rng.uniform(-M_PI, M_PI)};
    const Pose2 b{rng.uniform(-5, 5), rng.uniform(-5, 5),
                  rng.uniform(-M_PI, M_PI)};
    expect_pose_near(pose_compose(a, pose_between(a, b)), b, 1e-12);
  }
}

TEST(PoseAlgebra, TransformRoundTrip) {
  const Pose2 p{1.5, -2.25, 0.8};
  const Pose2 q = transform_to_pose(pose_to_transform(p));
  expect_pose_near(p, q, 1e-12);
}

TEST(SimulateScan, SingleBeamHitsFacingWall) {
  const World room = fixtures::unit_square_room();
  SensorModel sensor;
  sensor.n_beams = 1;
  sensor.fov = M_PI / 2.0;  // one beam at the fan center: bearing 0
  const Scan scan = simulate_scan(room, {0.5, 0.5, 0.0}, sensor);
  ASSERT_EQ(scan.ranges.size(), 1u);
  EXPECT_TRUE(scan.hit[0]);
  EXPECT_NEAR(scan.bearings[0], 0.0, 1e-15);
  EXPECT_NEAR(scan.ranges[0], 0.5, 1e-12);
  EXPECT_FALSE(scan.landmark[0]);
}

TEST(SimulateScan, OutOfRangeBeamIsAMiss) {
  const World room = fixtures::unit_square_room();
  SensorModel sensor;
  sensor.n_beams = 1;
  sensor.fov = M_PI / 2.0;
  sensor.max_range = 0.3;
  const Scan scan = simulate_scan(room, {0.5, 0.5, 0.0}, sensor);
  EXPECT_FALSE(scan.hit[0]);
  EXPECT_DOUBLE_EQ(scan.ranges[0], 0.3);
}

TEST(SimulateScan, FullSweepRangesMatchRoomGeometry) {
  const World room = fixtures::unit_square_room();
  SensorModel sensor;
  sensor.n_beams = 360;
  const Scan scan = simulate_scan(room, {0.5, 0.5, 0.0}, sensor);
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    ASSERT_TRUE(scan.hit[i]);
    EXPECT_GE(scan.ranges[i], 0.5 - 1e-12);
    EXPECT_LE(scan.ranges[i], std::sqrt(0.5) + 1e-12);
  }
}

TEST(SimulateScan, LandmarkHitsCarryConfidence) {
  World room = fixtures::unit_square_room();
  room.landmarks = {{{1.0, 0.5}, 5.0}};
  SensorModel sensor;
  sensor.n_beams = 1;
  sensor.fov = M_PI / 2.0;
  const Scan scan = simulate_scan(room, {0.5, 0.5, 0.0}, sensor);
  ASSERT_TRUE(scan.hit[0]);
  EXPECT_TRUE(scan.landmark[0]);
  EXPECT_DOUBLE_EQ(scan.confidence[0], 5.0);

  const PointCloud cloud = scan_to_cloud(scan, Pose2{});
  ASSERT_EQ(cloud.size(), 1u);
  ASSERT_EQ(cloud.weights.size(), 1u);
  EXPECT_DOUBLE_EQ(cloud.weights[0], 5.0);
}

TEST(SimulateScan, SameSeedSameScan) {
  const World room = fixtures::unit_square_room();
  SensorModel sensor = room_sensor(77);
  sensor.noise_sigma = 0.01;
  const Scan a = simulate_scan(room, {0.4, 0.6, 0.2}, sensor);
  const Scan b = simulate_scan(room, {0.4, 0.6, 0.2}, sensor);
  ASSERT_EQ(a.ranges.size(), b.ranges.size());
  for (std::size_t i = 0; i < a.ranges.size(); ++i)
    EXPECT_EQ(a.ranges[i], b.ranges[i]);
  sensor.seed = 78;
  const Scan c = simulate_scan(room, {0.4, 0.6, 0.2}, sensor);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.ranges.size(); ++i)
    if (a.ranges[i] != c.ranges[i]) any_diff = true;
  EXPECT_TRUE(any_diff);
}

TEST(ScanToCloud, PolarToCartesianInHintFrame) {
  Scan scan;
  scan.bearings = {0.0};
  scan.ranges = {1.0};
  scan.hit = {true};
  scan.landmark = {false};
  scan.confidence = {1.0};

  const PointCloud at_origin = scan_to_cloud(scan, Pose2{});
  ASSERT_EQ(at_origin.size(), 1u);
  EXPECT_LT((at_origin.points[0] - Vec3(1, 0, 0)).norm(), 1e-12);
  EXPECT_TRUE(at_origin.weights.empty());

  const PointCloud rotated = scan_to_cloud(scan, Pose2{0.0, 0.0, M_PI / 2.0});
  EXPECT_LT((rotated.points[0] - Vec3(0, 1, 0)).norm(), 1e-12);
}

TEST(ScanToCloud, MissesAreDropped) {
  Scan scan;
  scan.bearings = {-0.1, 0.0, 0.1};
  scan.ranges = {1.0, 5.0, 2.0};
  scan.hit = {true, false, true};
  scan.landmark = {false, false, false};
  scan.confidence = {1.0, 1.0, 1.0};
  const PointCloud cloud = scan_to_cloud(scan, Pose2{});
  EXPECT_EQ(cloud.size(), 2u);
}

TEST(TrajectoryAte, MatchesDirectFormula) {
  Rng rng(2);
  std::vector<Pose2> est, truth;
  for (int i = 0; i < 40; ++i) {
    est.push_back({rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform()});
    truth.push_back({rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform()});
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double dx = est[i].x - truth[i].x;
    const double dy = est[i].y - truth[i].y;
    acc += dx * dx + dy * dy;
  }
  const double want = std::sqrt(acc / static_cast<double>(est.size()));
  EXPECT_NEAR(trajectory_ate(est, truth), want, 1e-12);

  est.pop_back();
  EXPECT_THROW(trajectory_ate(est, truth), Error);
  EXPECT_THROW(trajectory_ate({}, {}), Error);
}

TEST(RunOnline, SingleFrameIsRejected) {
  const World room = fixtures::unit_square_room();
  const std::vector<Pose2> traj = {{0.5, 0.5, 0.0}};
  EXPECT_THROW(
      run_online(room, traj, room_sensor(1), fixtures::noise_scaled_options(0)),
      TooFewFramesError);
}

TEST(RunOnline, TeleportingTrajectoryIsRejected) {
  const World room = fixtures::unit_square_room();
  const std::vector<Pose2> traj = {{0.2, 0.2, 0.0}, {5.0, 5.0, 0.0}};
  EXPECT_THROW(
      run_online(room, traj, room_sensor(1), fixtures::noise_scaled_options(0)),
      Error);
}

TEST(RunOnline, StaticRobotHasZeroError) {
  const World room = fixtures::unit_square_room();
  const std::vector<Pose2> traj(5, Pose2{0.5, 0.5, 0.3});
  const SlamReport report = run_online(room, traj, room_sensor(3),
                                       fixtures::noise_scaled_options(0));
  EXPECT_LT(report.ate, 1e-9);
  EXPECT_TRUE(report.closures.empty());
  for (std::size_t k = 0; k < traj.size(); ++k)
    expect_pose_near(report.estimated[k], traj[k], 1e-9);
}

TEST(RunOnline, StraightNoiseFreeRunTracksTruth) {
  const World wall = fixtures::single_wall_world();
  const std::vector<Pose2> traj = fixtures::wall_approach_trajectory(10);
  const SlamReport report =
      run_online(wall, traj, fixtures::wall_approach_sensor(5, 0.0),
                 fixtures::noise_scaled_options(0));
  EXPECT_LT(report.ate, 1e-6);
  EXPECT_TRUE(report.closures.empty());
  for (const FrameDiagnostics& diag : report.frames)
    EXPECT_FALSE(diag.skipped);
}

TEST(RunOnline, DegenerateScenesCoastOnOdometry) {
  // Point-to-point cannot register a single straight wall (every cloud is
  // collinear), so each frame's match fails and the filter coasts on the
  // identity delta.
  const World wall = fixtures::single_wall_world();
  const std::vector<Pose2> traj = fixtures::wall_approach_trajectory(6);
  SlamOptions options = fixtures::noise_scaled_options(0);
  options.use_icp_metric = true;
  options.icp.metric = MetricKind::PointToPoint;
  const SlamReport report =
      run_online(wall, traj, fixtures::wall_approach_sensor(5, 0.0), options);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    EXPECT_TRUE(report.frames[k].skipped);
    expect_pose_near(report.estimated[k], report.estimated[0], 1e-12);
  }
}

TEST(RunOnline, SquareLoopClosesAndEndpointsAgree) {
  const World world = fixtures::square_loop_world();
  const std::vector<Pose2> traj = fixtures::square_loop_trajectory();
  const SlamReport report =
      run_online(world, traj, fixtures::square_loop_sensor(11, 0.005),
                 fixtures::noise_scaled_options(0.005));

  ASSERT_GE(report.closures.size(), 1u);
  EXPECT_GT(report.keyframes.size(), 4u);
  EXPECT_LT(report.ate, 0.5);

  // The most recent closure pinned its end frame to the anchor keyframe
  // composed with the accepted relative pose; nothing ran after it that
  // could move either frame.
  const LoopClosure& last = report.closures.back();
  EXPECT_GE(last.to_frame - last.from_frame, 10u);
  const Pose2 want = pose_compose(report.estimated[last.from_frame],
                                  last.relative);
  expect_pose_near(report.estimated[last.to_frame], want, 1e-9);
}

TEST(RunOnline, PrefixMatchesFullRunWithoutClosures) {
  const World world = fixtures::square_loop_world();
  const std::vector<Pose2> traj = fixtures::square_loop_trajectory();
  const std::vector<Pose2> prefix(traj.begin(), traj.begin() + 60);

  SlamOptions options = fixtures::noise_scaled_options(0.005);
  options.enable_loop_closure = false;
  const SensorModel sensor = fixtures::square_loop_sensor(11, 0.005);

  const SlamReport full = run_online(world, traj, sensor, options);
  const SlamReport part = run_online(world, prefix, sensor, options);
  EXPECT_TRUE(full.closures.empty());
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    EXPECT_EQ(full.estimated[k].x, part.estimated[k].x) << "frame " << k;
    EXPECT_EQ(full.estimated[k].y, part.estimated[k].y) << "frame " << k;
    EXPECT_EQ(full.estimated[k].theta, part.estimated[k].theta)
        << "frame " << k;
    EXPECT_EQ(full.frames[k].keyframe, part.frames[k].keyframe);
  }
}

TEST(RunOnline, MatchModesAgreeWithoutLandmarksOnOneMetric) {
  World world = fixtures::square_loop_world();
  world.landmarks.clear();
  const std::vector<Pose2> traj = fixtures::square_loop_trajectory();
  const SensorModel sensor = fixtures::square_loop_sensor(11, 0.005);

  SlamOptions options = fixtures::noise_scaled_options(0.005);
  options.use_icp_metric = true;
  options.icp.metric = MetricKind::PointToPoint;

  options.mode = MatchMode::Landmark;
  const SlamReport lm = run_online(world, traj, sensor, options);
  options.mode = MatchMode::NonLandmark;
  const SlamReport plain = run_online(world, traj, sensor, options);

  ASSERT_EQ(lm.estimated.size(), plain.estimated.size());
  for (std::size_t k = 0; k < lm.estimated.size(); ++k) {
    EXPECT_EQ(lm.estimated[k].x, plain.estimated[k].x);
    EXPECT_EQ(lm.estimated[k].y, plain.estimated[k].y);
    EXPECT_EQ(lm.estimated[k].theta, plain.estimated[k].theta);
  }
  EXPECT_EQ(lm.ate, plain.ate);
}

TEST(RunOffline, NoiseFreeRefinementStaysExact) {
  const World wall = fixtures::single_wall_world();
  const std::vector<Pose2> traj = fixtures::wall_approach_trajectory(12);
  const SlamReport report =
      run_offline(wall, traj, fixtures::wall_approach_sensor(5, 0.0),
                  fixtures::noise_scaled_options(0));
  EXPECT_LT(report.ate, 1e-9);
}

}  // namespace
