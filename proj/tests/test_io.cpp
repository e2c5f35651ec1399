#include <cmath>
#include <cstdint>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mlio/io/config.hpp"
#include "mlio/io/dataset_io.hpp"
#include "mlio/pipeline/evaluate.hpp"
#include "mlio/pipeline/pipeline.hpp"

using namespace mlio;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() /
           (std::string("mlio_io_") + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Values chosen to stress the formatter: subnormal-adjacent, negative
// zero, long fractions, and large magnitudes.
const double kAwkward[] = {0.1,   -1.0 / 3.0, 1e-17, -0.0, 6.25e5,
                           M_PI, -2.5e-13,    1.0,   42.0, -9.81};

std::vector<io::TrajectoryPoint> line_trajectory(int n, double step_s,
                                                 double speed) {
  std::vector<io::TrajectoryPoint> out;
  for (int i = 0; i < n; ++i) {
    const double t = i * step_s;
    out.push_back({Timestamp::from_sec(t),
                   SE3(Quat(), Eigen::Vector3d(speed * t, 0.0, 0.0))});
  }
  return out;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("imu csv round trips exactly") {
  TempDir dir("imu");
  std::vector<ImuSample> stream;
  for (int i = 0; i < 10; ++i) {
    ImuSample s;
    s.t = Timestamp(100 + i, static_cast<uint32_t>(i) * 123456789u % 1000000000u);
    for (int k = 0; k < 3; ++k) {
      s.gyro[k] = kAwkward[(i + k) % 10];
      s.accel[k] = kAwkward[(i + k + 3) % 10] * 1.7;
    }
    stream.push_back(s);
  }
  const fs::path file = dir.path / "imu.csv";
  io::write_imu_csv(file, stream);
  const auto back = io::read_imu_csv(file);
  REQUIRE(back.size() == stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    CHECK(back[i].t == stream[i].t);
    CHECK(back[i].gyro == stream[i].gyro);
    CHECK(back[i].accel == stream[i].accel);
  }
  // Byte-stable under a second pass.
  io::write_imu_csv(dir.path / "again.csv", back);
  CHECK(slurp(file) == slurp(dir.path / "again.csv"));
}

TEST_CASE("encoder and rtk csv round trip") {
  TempDir dir("enc");
  std::vector<EncoderSample> enc;
  for (int i = 0; i < 7; ++i) {
    enc.push_back({Timestamp(i, 500000000u), kAwkward[i] * 0.01});
  }
  io::write_encoder_csv(dir.path / "encoder.csv", enc);
  const auto enc_back = io::read_encoder_csv(dir.path / "encoder.csv");
  REQUIRE(enc_back.size() == enc.size());
  for (std::size_t i = 0; i < enc.size(); ++i) {
    CHECK(enc_back[i].t == enc[i].t);
    CHECK(enc_back[i].increment == enc[i].increment);
  }

  std::vector<RtkFix> rtk;
  const RtkStatus statuses[] = {RtkStatus::none, RtkStatus::flt, RtkStatus::fix};
  for (int i = 0; i < 6; ++i) {
    RtkFix f;
    f.t = Timestamp(10 * i, 250000000u);
    f.position = Eigen::Vector3d(kAwkward[i], kAwkward[i + 1], kAwkward[i + 2]);
    f.status = statuses[i % 3];
    f.reported_sigma = Eigen::Vector3d(0.05, 0.05, 0.1) * (i + 1);
    rtk.push_back(f);
  }
  io::write_rtk_csv(dir.path / "rtk.csv", rtk);
  const auto rtk_back = io::read_rtk_csv(dir.path / "rtk.csv");
  REQUIRE(rtk_back.size() == rtk.size());
  for (std::size_t i = 0; i < rtk.size(); ++i) {
    CHECK(rtk_back[i].t == rtk[i].t);
    CHECK(rtk_back[i].position == rtk[i].position);
    CHECK(rtk_back[i].status == rtk[i].status);
    CHECK(rtk_back[i].reported_sigma == rtk[i].reported_sigma);
  }
}

TEST_CASE("sweep csv recovers points and time bounds") {
  TempDir dir("sweep");
  Sweep sweep;
  sweep.lidar_id = 3;
  for (int i = 0; i < 20; ++i) {
    LidarPoint p;
    p.t = Timestamp(5, 1000000u * static_cast<uint32_t>(i));
    p.position = Eigen::Vector3d(kAwkward[i % 10], i * 0.25, -1.0 + i * 0.01);
    p.intensity = (i % 10) / 10.0;
    sweep.points.push_back(p);
  }
  sweep.t_start = sweep.points.front().t;
  sweep.t_end = sweep.points.back().t;
  const fs::path file = dir.path / io::sweep_file_name(0);
  io::write_sweep_csv(file, sweep);
  const Sweep back = io::read_sweep_csv(file, 3);
  CHECK(back.lidar_id == 3);
  CHECK(back.t_start == sweep.t_start);
  CHECK(back.t_end == sweep.t_end);
  REQUIRE(back.points.size() == sweep.points.size());
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    CHECK(back.points[i].t == sweep.points[i].t);
    CHECK(back.points[i].position == sweep.points[i].position);
    CHECK(back.points[i].intensity == sweep.points[i].intensity);
    CHECK(back.points[i].lidar_id == 3);
  }
}

TEST_CASE("sweep file names sort lexically in index order") {
  CHECK(io::sweep_file_name(0) == "sweep_00000.csv");
  CHECK(io::sweep_file_name(42) == "sweep_00042.csv");
  CHECK(io::sweep_file_name(12345) == "sweep_12345.csv");
  std::vector<std::string> names;
  for (int i : {0, 9, 10, 99, 100, 9999, 10000}) {
    names.push_back(io::sweep_file_name(i));
  }
  CHECK(std::is_sorted(names.begin(), names.end()));
}

TEST_CASE("calibration json round trips the rig") {
  TempDir dir("calib");
  SensorRig rig;
  for (int i = 0; i < 3; ++i) {
    LidarMount m;
    m.lidar_to_body =
        SE3(Quat::from_yaw(0.3 * i), Eigen::Vector3d(0.1 * i, -0.2, 1.5 + i * 0.1));
    m.mount_height = 1.5 + i * 0.1;
    rig.lidars.push_back(m);
  }
  rig.antenna_lever_arm = Eigen::Vector3d(-0.1, 0.02, 1.2);
  rig.encoder_axis = Eigen::Vector3d(1, 0, 0);
  rig.imu_noise = {0.005, 0.05, 1e-5, 1e-4};
  rig.encoder_noise = 1e-3;
  rig.encoder_scale_walk = 1e-6;
  rig.encoder_scale = 1.003;
  rig.rtk_sigma = 0.05;
  rig.rtk_reported_sigma = Eigen::Vector3d(0.01, 0.01, 0.02);

  io::write_calib_json(dir.path / "calib.json", rig);
  const SensorRig back = io::read_calib_json(dir.path / "calib.json");
  REQUIRE(back.lidars.size() == rig.lidars.size());
  for (std::size_t i = 0; i < rig.lidars.size(); ++i) {
    CHECK((back.lidars[i].lidar_to_body.translation -
           rig.lidars[i].lidar_to_body.translation)
              .norm() == 0.0);
    CHECK(back.lidars[i].lidar_to_body.rotation.angle_to(
              rig.lidars[i].lidar_to_body.rotation) < 1e-15);
    CHECK(back.lidars[i].mount_height == rig.lidars[i].mount_height);
  }
  CHECK(back.antenna_lever_arm == rig.antenna_lever_arm);
  CHECK(back.encoder_axis == rig.encoder_axis);
  CHECK(back.imu_noise.gyro_noise == rig.imu_noise.gyro_noise);
  CHECK(back.imu_noise.accel_bias_walk == rig.imu_noise.accel_bias_walk);
  CHECK(back.encoder_noise == rig.encoder_noise);
  CHECK(back.encoder_scale == rig.encoder_scale);
  CHECK(back.rtk_sigma == rig.rtk_sigma);
  CHECK(back.rtk_reported_sigma == rig.rtk_reported_sigma);
}

TEST_CASE("tum trajectories round trip at nanosecond stamps") {
  TempDir dir("tum");
  std::vector<io::TrajectoryPoint> traj;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int i = 0; i < 25; ++i) {
    io::TrajectoryPoint p;
    p.t = Timestamp(i * 7, (static_cast<uint32_t>(i) * 123456789u) % 1000000000u);
    p.pose = SE3(Quat(n(rng), n(rng), n(rng), n(rng)),
                 Eigen::Vector3d(n(rng), n(rng), n(rng)));
    traj.push_back(p);
  }
  io::write_tum(dir.path / "a.tum", traj);
  const auto back = io::read_tum(dir.path / "a.tum");
  REQUIRE(back.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(back[i].t == traj[i].t);
    CHECK((back[i].pose.translation - traj[i].pose.translation).norm() == 0.0);
    CHECK(back[i].pose.rotation.angle_to(traj[i].pose.rotation) < 1e-15);
  }
  // Two writes of the same in-memory trajectory are byte-identical.
  io::write_tum(dir.path / "b.tum", traj);
  CHECK(slurp(dir.path / "a.tum") == slurp(dir.path / "b.tum"));
}

TEST_CASE("ply header matches the vertex count") {
  TempDir dir("ply");
  std::vector<LidarPoint> points(5);
  for (int i = 0; i < 5; ++i) {
    points[i].position = Eigen::Vector3d(i, -i, 0.5 * i);
    points[i].intensity = 0.2 * i;
  }
  io::write_ply(dir.path / "map.ply", points);
  const std::string text = slurp(dir.path / "map.ply");
  CHECK(text.rfind("ply\n", 0) == 0);
  CHECK(text.find("format ascii 1.0") != std::string::npos);
  CHECK(text.find("element vertex 5") != std::string::npos);
  CHECK(text.find("property float intensity") != std::string::npos);
  CHECK(text.find("end_header") != std::string::npos);
  // Five data rows after the header.
  const std::size_t header_end = text.find("end_header\n") + 11;
  int rows = 0;
  for (std::size_t i = header_end; i < text.size(); ++i) {
    if (text[i] == '\n') ++rows;
  }
  CHECK(rows == 5);
}

TEST_CASE("dataset scan inventories streams and rejects broken layouts") {
  TempDir dir("scan");
  std::vector<ImuSample> imu;
  for (int i = 0; i < 400; ++i) {
    imu.push_back({Timestamp::from_sec(i * 0.005), {0, 0, 0}, {0, 0, 9.81}});
  }
  std::vector<EncoderSample> enc;
  for (int i = 0; i < 200; ++i) {
    enc.push_back({Timestamp::from_sec(i * 0.01), 0.01});
  }
  std::vector<RtkFix> rtk;
  for (int i = 0; i < 2; ++i) {
    RtkFix f;
    f.t = Timestamp::from_sec(0.05 + 0.1 * i);
    f.status = RtkStatus::fix;
    rtk.push_back(f);
  }
  io::write_imu_csv(dir.path / "imu.csv", imu);
  io::write_encoder_csv(dir.path / "encoder.csv", enc);
  io::write_rtk_csv(dir.path / "rtk.csv", rtk);
  for (int id = 0; id < 2; ++id) {
    fs::create_directories(dir.path / ("lidar_" + std::to_string(id)));
    for (int k = 0; k < 3; ++k) {
      Sweep s;
      s.lidar_id = id;
      LidarPoint p;
      p.t = Timestamp::from_sec(0.1 * k + 0.02);
      p.position = Eigen::Vector3d(5, 0, 0);
      s.points = {p};
      s.t_start = s.t_end = p.t;
      io::write_sweep_csv(
          dir.path / ("lidar_" + std::to_string(id)) / io::sweep_file_name(k), s);
    }
  }

  // imu, encoder, rtk, then one entry per LiDAR.
  const io::DatasetManifest m = io::scan_dataset(dir.path);
  REQUIRE(m.streams.size() == 5);
  CHECK(m.streams[0].count == 400);
  CHECK(m.streams[1].count == 200);
  CHECK(m.streams[2].count == 2);
  CHECK(m.streams[3].name == "lidar_0");
  CHECK(m.streams[4].count == 3);
  REQUIRE(m.sweeps.size() == 2);
  CHECK(m.sweeps[0].size() == 3);
  CHECK(m.sweeps[1].size() == 3);
  CHECK(m.overlap_begin.to_sec() >= 0.0);
  CHECK(m.overlap_end.to_sec() > m.overlap_begin.to_sec());

  SUBCASE("missing stream file") {
    fs::remove(dir.path / "encoder.csv");
    CHECK_THROWS_AS(io::scan_dataset(dir.path), std::runtime_error);
  }
  SUBCASE("no lidar directories") {
    fs::remove_all(dir.path / "lidar_0");
    fs::remove_all(dir.path / "lidar_1");
    CHECK_THROWS_AS(io::scan_dataset(dir.path), std::runtime_error);
  }
  SUBCASE("unsorted stream") {
    std::swap(imu[10], imu[11]);
    io::write_imu_csv(dir.path / "imu.csv", imu);
    CHECK_THROWS_AS(io::scan_dataset(dir.path), std::runtime_error);
  }
}

TEST_CASE("config json round trips and validates") {
  const io::Config def = io::default_config();
  const std::string text = io::config_to_json(def);
  const io::Config back = io::config_from_json(text);
  CHECK(io::config_to_json(back) == text);

  SUBCASE("print_config output parses back") {
    std::ostringstream out;
    io::print_config(out, def);
    const io::Config again = io::config_from_json(out.str());
    CHECK(io::config_to_json(again) == text);
  }
  SUBCASE("unknown top-level key rejected") {
    auto j = nlohmann::json::parse(text);
    j["bogus"] = 1;
    CHECK_THROWS_AS(io::config_from_json(j.dump()), std::invalid_argument);
  }
  SUBCASE("unknown nested key rejected") {
    auto j = nlohmann::json::parse(text);
    j["window"]["typo_field"] = 2.0;
    CHECK_THROWS_AS(io::config_from_json(j.dump()), std::invalid_argument);
  }
  SUBCASE("type mismatch rejected") {
    auto j = nlohmann::json::parse(text);
    j["preprocess"]["min_range"] = "three";
    CHECK_THROWS_AS(io::config_from_json(j.dump()), std::invalid_argument);
  }
  SUBCASE("ablation flags round trip") {
    auto j = nlohmann::json::parse(text);
    j["ablation"]["use_rtk"] = false;
    j["ablation"]["lidar_subset"] = {0, 2};
    const io::Config c = io::config_from_json(j.dump());
    CHECK_FALSE(c.ablation.use_rtk);
    REQUIRE(c.ablation.lidar_subset.size() == 2);
    CHECK(c.ablation.lidar_subset[1] == 2);
  }
}

TEST_CASE("evaluation scores identical trajectories as zero") {
  const auto truth = line_trajectory(200, 0.1, 2.0);
  const pipeline::Metrics m = pipeline::evaluate_trajectories(truth, truth);
  CHECK(m.matched_pairs == 200);
  CHECK(m.ate_rms == 0.0);
  CHECK(m.x_rms == 0.0);
  CHECK(m.y_rms == 0.0);
  CHECK(m.z_rms == 0.0);
  CHECK(m.heading_rms_deg == 0.0);
  CHECK(m.end_drift_percent == 0.0);
  for (double d : m.segment_drift_percent) CHECK(d == 0.0);
  CHECK_FALSE(m.aligned);
}

TEST_CASE("evaluation reports a constant offset exactly") {
  const auto truth = line_trajectory(200, 0.1, 2.0);
  auto est = truth;
  for (auto& p : est) p.pose.translation.x() += 1.0;
  const pipeline::Metrics m = pipeline::evaluate_trajectories(est, truth);
  CHECK(m.ate_rms == 1.0);
  CHECK(m.x_rms == 1.0);
  CHECK(m.y_rms == 0.0);
  CHECK(m.z_rms == 0.0);
  CHECK(m.heading_rms_deg == 0.0);
  // Constant offsets cancel in relative segment drift.
  for (double d : m.segment_drift_percent) CHECK(d < 1e-9);
}

TEST_CASE("evaluation matches the monte carlo noise level") {
  const auto truth = line_trajectory(1000, 0.1, 2.0);
  auto est = truth;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& p : est) {
    p.pose.translation += Eigen::Vector3d(n(rng), n(rng), n(rng));
  }
  const pipeline::Metrics m = pipeline::evaluate_trajectories(est, truth);
  const double expected = 0.1 * std::sqrt(3.0);
  CHECK(std::abs(m.ate_rms - expected) / expected < 0.05);
}

TEST_CASE("evaluation pairs within tolerance and throws without matches") {
  const auto truth = line_trajectory(50, 0.1, 2.0);
  auto est = truth;
  for (auto& p : est) p.t = p.t + Duration::from_sec(0.004);
  CHECK(pipeline::evaluate_trajectories(est, truth, 0.01).matched_pairs == 50);
  for (auto& p : est) p.t = p.t + Duration::from_sec(0.04);
  CHECK_THROWS_AS(pipeline::evaluate_trajectories(est, truth, 0.01),
                  std::runtime_error);
}

TEST_CASE("evaluation alignment removes a rigid offset") {
  std::vector<io::TrajectoryPoint> truth;
  for (int i = 0; i < 120; ++i) {
    const double a = 0.05 * i;
    truth.push_back({Timestamp::from_sec(i * 0.1),
                     SE3(Quat::from_yaw(a),
                         Eigen::Vector3d(10 * std::cos(a), 10 * std::sin(a), 0.2))});
  }
  const SE3 offset(Quat::from_yaw(0.7), Eigen::Vector3d(3.0, -2.0, 0.5));
  auto est = truth;
  for (auto& p : est) p.pose = offset * p.pose;

  const pipeline::Metrics raw = pipeline::evaluate_trajectories(est, truth);
  CHECK(raw.ate_rms > 1.0);
  const pipeline::Metrics aligned =
      pipeline::evaluate_trajectories(est, truth, 0.01, true);
  CHECK(aligned.aligned);
  CHECK(aligned.ate_rms < 1e-9);
  CHECK(aligned.heading_rms_deg < 1e-9);
}

TEST_CASE("simulated stationary imu has one row per sample period") {
  TempDir dir("simcount");
  pipeline::SimOptions opt;
  opt.config = io::default_config();
  opt.trajectory.kind = sim::TrajectoryKind::stationary;
  opt.trajectory.duration = 10.0;
  opt.world.extent = 30.0;
  opt.world.pole_count = 4;
  opt.pattern.points_per_sweep = 100;
  pipeline::cmd_sim(opt, dir.path / "ds");
  const std::string imu = slurp(dir.path / "ds" / "imu.csv");
  std::size_t rows = 0;
  for (char c : imu) {
    if (c == '\n') ++rows;
  }
  CHECK(rows == 2000);
  for (const char* name : {"imu.csv", "encoder.csv", "rtk.csv", "calib.json",
                           "ground_truth.tum"}) {
    CHECK(fs::exists(dir.path / "ds" / name));
  }
  CHECK(fs::exists(dir.path / "ds" / "lidar_0" / "sweep_00000.csv"));
  CHECK(fs::exists(dir.path / "ds" / "lidar_1" / "sweep_00000.csv"));
}

TEST_CASE("simulation is byte identical for a fixed seed") {
  TempDir dir("simdet");
  pipeline::SimOptions opt;
  opt.config = io::default_config();
  opt.trajectory.kind = sim::TrajectoryKind::circle;
  opt.trajectory.duration = 2.0;
  opt.trajectory.speed = 2.0;
  opt.trajectory.ramp_time = 1.0;
  opt.trajectory.radius_x = opt.trajectory.radius_y = 8.0;
  opt.world.extent = 25.0;
  opt.world.pole_count = 6;
  opt.pattern.points_per_sweep = 400;
  opt.pattern.range_sigma = 0.02;
  opt.seed = 21;
  pipeline::cmd_sim(opt, dir.path / "a");
  pipeline::cmd_sim(opt, dir.path / "b");
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir.path / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir.path / "a");
    CHECK(slurp(entry.path()) == slurp(dir.path / "b" / rel));
    ++files;
  }
  CHECK(files >= 2 + 3 + 2 * 20);  // calib + streams + sweeps per lidar
}

TEST_CASE("a lidar silenced mid run warns and the run completes") {
  TempDir dir("dropout");
  pipeline::SimOptions opt;
  opt.config = io::default_config();
  opt.trajectory.kind = sim::TrajectoryKind::circle;
  opt.trajectory.duration = 8.0;
  opt.trajectory.speed = 2.5;
  opt.trajectory.ramp_time = 1.5;
  opt.trajectory.radius_x = opt.trajectory.radius_y = 10.0;
  opt.world.extent = 30.0;
  opt.world.pole_count = 8;
  opt.pattern.points_per_sweep = 1500;
  opt.seed = 9;
  pipeline::cmd_sim(opt, dir.path / "ds");
  // Silence the secondary for the second half of the run.
  for (int k = 40; k < 80; ++k) {
    fs::remove(dir.path / "ds" / "lidar_1" / io::sweep_file_name(k));
  }
  std::ostringstream log;
  const pipeline::RunSummary s =
      pipeline::cmd_run(io::default_config(), dir.path / "ds", dir.path / "out", log);
  CHECK(s.fused_scans == 80);
  CHECK(log.str().find("dropout") != std::string::npos);
  CHECK(fs::exists(dir.path / "out" / "trajectory.tum"));
  CHECK(fs::exists(dir.path / "out" / "map.ply"));
  CHECK(fs::exists(dir.path / "out" / "report.json"));
  const auto report = nlohmann::json::parse(slurp(dir.path / "out" / "report.json"));
  CHECK(report["fused_scans"].get<std::size_t>() == 80);
  CHECK(report["monotonicity_violations"].get<std::size_t>() == 0);
}

}  // TEST_SUITE
