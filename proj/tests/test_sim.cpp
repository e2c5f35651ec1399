#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "mlio/sim/sensors.hpp"
#include "mlio/sim/trajectory.hpp"
#include "mlio/sim/world.hpp"

using namespace mlio;
using namespace mlio::sim;

namespace {

TrajectorySpec circle_spec(double r, double v, double duration) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::circle;
  s.radius_x = r;
  s.speed = v;
  s.duration = duration;
  s.ramp_time = 5.0;
  return s;
}

SensorRig basic_rig() {
  SensorRig rig;
  LidarMount m;
  m.lidar_to_body = SE3::identity();
  m.mount_height = 1.8;
  rig.lidars.push_back(m);
  rig.antenna_lever_arm = {0.2, 0.0, 0.5};
  return rig;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("stationary trajectory reads gravity and nothing else") {
  TrajectorySpec s;
  s.kind = TrajectoryKind::stationary;
  s.duration = 10.0;
  const Trajectory traj(s);
  for (double t : {0.0, 3.3, 10.0}) {
    const TrajectorySample ts = traj.at(Timestamp::from_sec(t));
    CHECK(ts.pose.translation.norm() == 0.0);
    CHECK(ts.pose.rotation.angle_to(Quat()) == 0.0);
    CHECK(ts.velocity.norm() == 0.0);
    CHECK(ts.body_rate.norm() == 0.0);
    CHECK((ts.specific_force - Eigen::Vector3d(0, 0, 9.81)).norm() < 1e-15);
  }
}

TEST_CASE("cruising circle shows the centripetal specific force") {
  const Trajectory traj(circle_spec(20.0, 10.0, 60.0));
  // Past the ramp the speed is exactly nominal: v^2/r = 5 in the body
  // horizontal plane, gravity untouched on z.
  const TrajectorySample ts = traj.at(Timestamp::from_sec(30.0));
  CHECK(std::abs(ts.velocity.norm() - 10.0) < 1e-12);
  CHECK(std::abs(ts.specific_force.head<2>().norm() - 5.0) < 1e-10);
  CHECK(std::abs(ts.specific_force.z() - 9.81) < 1e-12);
  CHECK(std::abs(ts.body_rate.z() - 0.5) < 1e-12);
}

TEST_CASE("figure eight heading rate changes sign across the crossing") {
  TrajectorySpec s;
  s.kind = TrajectoryKind::figure_eight;
  s.radius_x = 40.0;
  s.radius_y = 20.0;
  s.speed = 8.0;
  s.duration = 120.0;
  const Trajectory traj(s);
  bool pos = false, neg = false;
  for (double t = 6.0; t < 120.0; t += 0.5) {
    const double wz = traj.at(Timestamp::from_sec(t)).body_rate.z();
    pos = pos || wz > 1e-3;
    neg = neg || wz < -1e-3;
  }
  CHECK(pos);
  CHECK(neg);
}

TEST_CASE("derivatives are consistent with finite differences of the pose") {
  std::vector<TrajectorySpec> specs;
  specs.push_back(circle_spec(15.0, 6.0, 40.0));
  TrajectorySpec st;
  st.kind = TrajectoryKind::straight;
  st.speed = 12.0;
  st.duration = 40.0;
  specs.push_back(st);
  TrajectorySpec f8;
  f8.kind = TrajectoryKind::figure_eight;
  f8.radius_x = 30.0;
  f8.radius_y = 16.0;
  f8.speed = 7.0;
  f8.duration = 40.0;
  specs.push_back(f8);
  TrajectorySpec sp;
  sp.kind = TrajectoryKind::piecewise_spline;
  sp.knots = {{0, 0}, {20, 0}, {40, 15}, {60, -5}, {80, 10}, {100, 0}, {120, 0}};
  sp.speed = 5.0;
  sp.duration = 40.0;
  specs.push_back(sp);

  const double h = 1e-5;
  const Eigen::Vector3d g(0, 0, 9.81);
  for (const auto& spec : specs) {
    const Trajectory traj(spec);
    for (double t : {1.7, 4.9, 8.2, 20.0, 33.3}) {
      const auto mid = traj.at(Timestamp::from_sec(t));
      const auto lo = traj.at(Timestamp::from_sec(t - h));
      const auto hi = traj.at(Timestamp::from_sec(t + h));

      const Eigen::Vector3d fd_vel =
          (hi.pose.translation - lo.pose.translation) / (2.0 * h);
      CHECK((fd_vel - mid.velocity).norm() < 1e-6);

      const Eigen::Vector3d fd_rate =
          (lo.pose.rotation.inverse() * hi.pose.rotation).log() / (2.0 * h);
      CHECK((fd_rate - mid.body_rate).norm() < 1e-6);

      const Eigen::Vector3d fd_acc = (hi.velocity - lo.velocity) / (2.0 * h);
      const Eigen::Vector3d acc = mid.pose.rotation * mid.specific_force - g;
      CHECK((fd_acc - acc).norm() < 1e-5);
    }
  }
}

TEST_CASE("queries outside the span are rejected") {
  const Trajectory traj(circle_spec(10.0, 5.0, 10.0));
  CHECK_THROWS_AS(traj.at(Timestamp::from_sec(-0.001)), std::out_of_range);
  CHECK_THROWS_AS(traj.at(Timestamp::from_sec(10.001)), std::out_of_range);
}

TEST_CASE("zero noise imu samples equal the trajectory outputs") {
  const Trajectory traj(circle_spec(20.0, 8.0, 10.0));
  const SensorRig rig = basic_rig();
  const auto stream = sample_imu(traj, rig, 200.0, 7);
  CHECK(stream.size() == 2000);
  for (size_t i = 0; i < stream.size(); i += 97) {
    const auto truth = traj.at(stream[i].t);
    CHECK((stream[i].gyro - truth.body_rate).norm() == 0.0);
    CHECK((stream[i].accel - truth.specific_force).norm() == 0.0);
  }
}

TEST_CASE("imu stream is bit identical for a fixed seed") {
  const Trajectory traj(circle_spec(20.0, 8.0, 5.0));
  SensorRig rig = basic_rig();
  rig.imu_noise = {0.005, 0.05, 1e-5, 1e-4};
  const auto a = sample_imu(traj, rig, 200.0, 42);
  const auto b = sample_imu(traj, rig, 200.0, 42);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].gyro == b[i].gyro);
    CHECK(a[i].accel == b[i].accel);
  }
  const auto c = sample_imu(traj, rig, 200.0, 43);
  CHECK(a[5].gyro != c[5].gyro);
}

TEST_CASE("imu rate floor is enforced") {
  const Trajectory traj(circle_spec(20.0, 8.0, 5.0));
  CHECK_THROWS_AS(sample_imu(traj, basic_rig(), 99.0, 1), std::invalid_argument);
}

TEST_CASE("trapezoidal reintegration of a clean stream tracks the truth") {
  const Trajectory traj(circle_spec(30.0, 6.0, 60.0));
  const SensorRig rig = basic_rig();
  const auto stream = sample_imu(traj, rig, 200.0, 0);
  const Eigen::Vector3d g(0, 0, 9.81);

  Quat q = traj.at(stream.front().t).pose.rotation;
  Eigen::Vector3d v = traj.at(stream.front().t).velocity;
  Eigen::Vector3d p = traj.at(stream.front().t).pose.translation;
  for (size_t i = 1; i < stream.size(); ++i) {
    const double dt = (stream[i].t - stream[i - 1].t).to_sec();
    const Quat q_next = q * Quat::exp(0.5 * (stream[i - 1].gyro + stream[i].gyro) * dt);
    const Eigen::Vector3d a0 = q * stream[i - 1].accel - g;
    const Eigen::Vector3d a1 = q_next * stream[i].accel - g;
    const Eigen::Vector3d v_next = v + 0.5 * (a0 + a1) * dt;
    p += 0.5 * (v + v_next) * dt;
    v = v_next;
    q = q_next;
  }
  const Eigen::Vector3d p_true = traj.at(stream.back().t).pose.translation;
  CHECK((p - p_true).norm() < 1e-3);
}

TEST_CASE("encoder increments match the arc length oracle") {
  TrajectorySpec s;
  s.kind = TrajectoryKind::straight;
  s.speed = 10.0;
  s.duration = 30.0;
  s.ramp_time = 5.0;
  const Trajectory traj(s);

  SensorRig rig = basic_rig();
  rig.encoder_scale = 1.0;
  auto stream = sample_encoder(traj, rig, 10.0, 3);
  REQUIRE(stream.size() == 300);
  for (const auto& e : stream) {
    if (e.t.to_sec() > 5.1) CHECK(std::abs(e.increment - 1.0) < 1e-9);
  }

  rig.encoder_scale = 1.02;
  auto scaled = sample_encoder(traj, rig, 10.0, 3);
  for (const auto& e : scaled) {
    if (e.t.to_sec() > 5.1) CHECK(std::abs(e.increment - 1.0 / 1.02) < 1e-9);
  }

  TrajectorySpec stat;
  stat.kind = TrajectoryKind::stationary;
  stat.duration = 10.0;
  for (const auto& e : sample_encoder(Trajectory(stat), rig, 10.0, 3))
    CHECK(e.increment == 0.0);
}

TEST_CASE("rtk outage counting and clean positions") {
  const Trajectory traj(circle_spec(25.0, 5.0, 60.0));
  const SensorRig rig = basic_rig();
  const auto fixes = sample_rtk(
      traj, rig, 1.0, {{Timestamp::from_sec(10.0), Timestamp::from_sec(40.0)}}, 5);
  REQUIRE(fixes.size() == 60);
  int fixed = 0;
  for (const auto& f : fixes) {
    if (f.status == RtkStatus::fix) ++fixed;
    const auto truth = traj.at(f.t);
    CHECK((f.position - truth.pose * rig.antenna_lever_arm).norm() == 0.0);
  }
  CHECK(fixed == 30);
}

TEST_CASE("rtk lying mode underreports the injected noise") {
  TrajectorySpec s;
  s.kind = TrajectoryKind::stationary;
  s.duration = 1000.0;
  const Trajectory traj(s);
  SensorRig rig = basic_rig();
  rig.rtk_sigma = 1.0;
  rig.rtk_reported_sigma = Eigen::Vector3d::Constant(0.02);
  const auto fixes = sample_rtk(traj, rig, 1.0, {}, 11);
  REQUIRE(fixes.size() == 1000);
  double sum2 = 0.0;
  for (const auto& f : fixes) {
    CHECK(f.reported_sigma == Eigen::Vector3d::Constant(0.02));
    sum2 += (f.position - rig.antenna_lever_arm).squaredNorm();
  }
  const double per_axis_std = std::sqrt(sum2 / (3.0 * fixes.size()));
  CHECK(per_axis_std > 0.9);
  CHECK(per_axis_std < 1.1);
}

TEST_CASE("downward lidar on a bare ground plane returns plane points") {
  WorldModel world;
  world.planes.push_back({{-100, -100, 0}, {200, 0, 0}, {0, 200, 0}, 0.3});

  TrajectorySpec s;
  s.kind = TrajectoryKind::stationary;
  s.duration = 0.5;
  s.height = 1.8;
  const Trajectory traj(s);

  SensorRig rig = basic_rig();
  // Pitch the sensor down so the limited FOV catches the ground.
  rig.lidars[0].lidar_to_body.rotation = Quat::exp(Eigen::Vector3d(0, 0.6, 0));

  LidarPattern pattern;
  pattern.points_per_sweep = 2000;
  const auto sweeps = sample_lidar(world, traj, rig, 0, pattern, 9);
  REQUIRE(sweeps.size() == 5);
  size_t total = 0;
  for (const auto& sw : sweeps) {
    CHECK((sw.t_end - sw.t_start).nanos() == 100000000);
    for (size_t i = 0; i < sw.points.size(); ++i) {
      const auto& pt = sw.points[i];
      CHECK(in_half_open(pt.t, sw.t_start, sw.t_end));
      if (i > 0) CHECK(sw.points[i - 1].t <= pt.t);
      const Eigen::Vector3d world_pt =
          traj.at(pt.t).pose * (rig.lidars[0].lidar_to_body * pt.position);
      CHECK(std::abs(world_pt.z()) < 1e-9);
      CHECK(pt.intensity == 0.3);
    }
    total += sw.points.size();
  }
  CHECK(total > 3000);
}

TEST_CASE("pole returns stay inside the field of view cone") {
  WorldModel world;
  world.poles.push_back({{10.0, 0.0}, 0.0, 6.0, 0.2, 0.9});

  TrajectorySpec s;
  s.kind = TrajectoryKind::stationary;
  s.duration = 0.3;
  s.height = 1.5;
  const Trajectory traj(s);

  LidarPattern pattern;
  pattern.points_per_sweep = 4000;
  const double half_h = 0.5 * pattern.fov_h_deg * M_PI / 180.0;
  const double half_v = 0.5 * pattern.fov_v_deg * M_PI / 180.0;

  const auto sweeps = sample_lidar(world, traj, basic_rig(), 0, pattern, 21);
  size_t hits = 0;
  for (const auto& sw : sweeps)
    for (const auto& pt : sw.points) {
      ++hits;
      const double az = std::atan2(pt.position.y(), pt.position.x());
      const double el = std::asin(pt.position.normalized().z());
      CHECK(std::abs(az) <= half_h + 1e-9);
      CHECK(std::abs(el) <= half_v + 1e-9);
      CHECK(std::abs(std::hypot(pt.position.x() - 10.0, pt.position.y()) - 0.2) < 0.21);
    }
  CHECK(hits > 10);
}

TEST_CASE("noisy points back-project onto world primitives within bound") {
  const WorldModel world = make_feature_world(120.0, 5.0, 25, 77);
  Trajectory traj(circle_spec(40.0, 8.0, 3.0));

  SensorRig rig = basic_rig();
  LidarPattern pattern;
  pattern.points_per_sweep = 1500;
  pattern.range_sigma = 0.02;

  const auto sweeps = sample_lidar(world, traj, rig, 0, pattern, 13);
  size_t checked = 0;
  for (const auto& sw : sweeps)
    for (const auto& pt : sw.points) {
      const Eigen::Vector3d world_pt =
          traj.at(pt.t).pose * (rig.lidars[0].lidar_to_body * pt.position);
      CHECK(world.surface_distance(world_pt, pt.t.to_sec()) <=
            3.0 * pattern.range_sigma + 1e-9);
      ++checked;
    }
  CHECK(checked > 1000);
}

TEST_CASE("moving box is struck at its time dependent position") {
  WorldModel world;
  DynamicBox box;
  box.center = {15.0, -20.0, 1.0};
  box.half_extent = {1.0, 1.0, 1.0};
  box.velocity = {0.0, 10.0, 0.0};
  world.boxes.push_back(box);

  TrajectorySpec s;
  s.kind = TrajectoryKind::stationary;
  s.duration = 4.0;
  s.height = 1.0;
  const Trajectory traj(s);

  LidarPattern pattern;
  pattern.points_per_sweep = 3000;
  const auto sweeps = sample_lidar(world, traj, basic_rig(), 0, pattern, 31);
  size_t hits = 0;
  for (const auto& sw : sweeps)
    for (const auto& pt : sw.points) {
      ++hits;
      // Box straddles y=0 around t=2; a static box at the t=0 position
      //  would never appear in the narrow forward FOV.
      CHECK(std::abs(pt.t.to_sec() - 2.0) < 1.6);
      // Stationary rig: world = lidar frame shifted up by the rig height.
      const Eigen::Vector3d world_pt = pt.position + Eigen::Vector3d(0, 0, 1.0);
      const Eigen::Vector3d rel = world_pt - box.center_at(pt.t.to_sec());
      CHECK(rel.cwiseAbs().maxCoeff() < 1.0 + 1e-9);
    }
  CHECK(hits > 50);
}

}  // TEST_SUITE
