#include "mlio/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mlio/factors/ground.hpp"
#include "mlio/factors/lidar_factors.hpp"
#include "mlio/graph/sliding_window.hpp"
#include "mlio/io/dataset_io.hpp"
#include "mlio/prep/preprocess.hpp"
#include "mlio/sync/sync.hpp"

namespace mlio::pipeline {

namespace fs = std::filesystem;
using preint::PreintegrationDelta;
using preint::RobotState;

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   since)
      .count();
}

// State propagation matching the preintegration residual convention:
// the residual vanishes exactly at the state this returns.
RobotState predict_state(const RobotState& s0, const PreintegrationDelta& d,
                         const preint::GravityModel& gravity) {
  const double dt = d.dt();
  RobotState s1 = s0;
  s1.position = s0.position + s0.velocity * dt - 0.5 * gravity.g * dt * dt +
                s0.attitude * d.alpha();
  s1.velocity = s0.velocity - gravity.g * dt + s0.attitude * d.beta();
  s1.attitude = s0.attitude * d.gamma();
  return s1;
}

SE3 pose_of(const RobotState& s) { return SE3(s.attitude, s.position); }

struct PreprocessOutput {
  std::vector<sync::FeatureCloud> clouds;
  std::size_t constant_velocity_fallbacks = 0;
};

// Full per-sweep preprocessing chain for one LiDAR. Pure function of its
// inputs, so the per-LiDAR workers need no synchronization.
PreprocessOutput preprocess_lidar(const std::vector<fs::path>& files, int lidar_id,
                                  const SensorRig& rig,
                                  const std::vector<ImuSample>& imu,
                                  const std::vector<EncoderSample>& encoder,
                                  const io::Config& config) {
  const LidarMount& mount = rig.lidars.at(static_cast<std::size_t>(lidar_id));
  prep::GroundParams ground = config.ground;
  ground.sensor_height = mount.mount_height;
  ground.sensor_origin = mount.lidar_to_body.translation;

  PreprocessOutput out;
  out.clouds.reserve(files.size());
  const Duration pad = Duration::from_sec(0.05);
  for (const fs::path& file : files) {
    Sweep sweep = io::read_sweep_csv(file, lidar_id);
    if (sweep.points.empty()) continue;
    sweep = prep::range_filter(std::move(sweep), config.min_range);
    if (sweep.points.empty()) continue;

    const auto imu_lo = std::lower_bound(
        imu.begin(), imu.end(), sweep.t_start - pad,
        [](const ImuSample& s, Timestamp t) { return s.t < t; });
    const auto imu_hi = std::upper_bound(
        imu_lo, imu.end(), sweep.t_end + pad,
        [](Timestamp t, const ImuSample& s) { return t < s.t; });
    const auto enc_lo = std::lower_bound(
        encoder.begin(), encoder.end(), sweep.t_start - pad,
        [](const EncoderSample& s, Timestamp t) { return s.t < t; });
    const auto enc_hi = std::upper_bound(
        enc_lo, encoder.end(), sweep.t_end + pad,
        [](Timestamp t, const EncoderSample& s) { return t < s.t; });

    const prep::DeskewResult deskewed =
        prep::deskew(sweep, {imu_lo, imu_hi}, {enc_lo, enc_hi}, RobotState{},
                     mount.lidar_to_body);
    if (deskewed.constant_velocity_fallback) ++out.constant_velocity_fallbacks;

    const Sweep body = prep::to_body_frame(deskewed.sweep, mount.lidar_to_body);
    const prep::GroundSplit split = prep::segment_ground(body, ground);
    out.clouds.push_back(prep::extract_features(split, config.features));
  }
  return out;
}

// Cumulative encoder travel; increments are summed over half-open stamp
// intervals so consecutive spans never double-count.
class EncoderAccumulator {
 public:
  explicit EncoderAccumulator(const std::vector<EncoderSample>& samples)
      : samples_(samples) {
    cumulative_.resize(samples.size() + 1, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      cumulative_[i + 1] = cumulative_[i] + samples[i].increment;
    }
  }

  // Sum of increments with stamp in (a, b].
  double travel(Timestamp a, Timestamp b) const {
    return at(b) - at(a);
  }

 private:
  double at(Timestamp t) const {
    const auto it = std::upper_bound(
        samples_.begin(), samples_.end(), t,
        [](Timestamp q, const EncoderSample& s) { return q < s.t; });
    return cumulative_[static_cast<std::size_t>(it - samples_.begin())];
  }

  const std::vector<EncoderSample>& samples_;
  std::vector<double> cumulative_;
};

struct DegeneracyEvent {
  std::size_t scan = 0;
  double min_eigenvalue = 0.0;
  std::size_t correspondences = 0;
  const char* action = "";
};

int64_t voxel_key(const Eigen::Vector3d& p, double cell) {
  const auto q = [cell](double v) {
    return static_cast<int64_t>(std::floor(v / cell)) & 0x1fffff;
  };
  return (q(p.x()) << 42) | (q(p.y()) << 21) | q(p.z());
}

}  // namespace

void cmd_sim(const SimOptions& options, const fs::path& out_dir) {
  const SensorRig& rig = options.config.rig;
  if (rig.lidars.empty()) throw std::invalid_argument("sim: rig has no lidars");

  sim::WorldModel world;
  if (options.world.kind == WorldSpec::Kind::feature) {
    world = sim::make_feature_world(options.world.extent, options.world.wall_height,
                                    options.world.pole_count, options.world.seed);
  } else {
    world = sim::make_corridor_world(options.world.corridor_length,
                                     options.world.corridor_width,
                                     options.world.wall_height);
  }
  const sim::Trajectory traj(options.trajectory);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) {
    throw std::runtime_error("sim: cannot create " + out_dir.string());
  }

  const uint64_t seed = options.seed;
  io::write_imu_csv(out_dir / "imu.csv",
                    sim::sample_imu(traj, rig, options.imu_rate, seed * 1000 + 1));
  io::write_encoder_csv(
      out_dir / "encoder.csv",
      sim::sample_encoder(traj, rig, options.encoder_rate, seed * 1000 + 2));
  std::vector<std::pair<Timestamp, Timestamp>> outages;
  for (const auto& [a, b] : options.rtk_outages) {
    outages.emplace_back(Timestamp::from_sec(a), Timestamp::from_sec(b));
  }
  io::write_rtk_csv(out_dir / "rtk.csv", sim::sample_rtk(traj, rig, options.rtk_rate,
                                                         outages, seed * 1000 + 3));
  io::write_calib_json(out_dir / "calib.json", rig);

  for (std::size_t id = 0; id < rig.lidars.size(); ++id) {
    const fs::path dir = out_dir / ("lidar_" + std::to_string(id));
    fs::create_directories(dir);
    const std::vector<Sweep> sweeps =
        sim::sample_lidar(world, traj, rig, static_cast<int>(id), options.pattern,
                          seed * 1000 + 10 + id);
    for (std::size_t k = 0; k < sweeps.size(); ++k) {
      io::write_sweep_csv(dir / io::sweep_file_name(static_cast<int>(k)), sweeps[k]);
    }
  }

  // Ground truth at the primary sweep cadence.
  std::vector<io::TrajectoryPoint> truth;
  const double period = options.pattern.period;
  for (double t = 0.0; t <= traj.duration() + 1e-9; t += period) {
    const Timestamp ts = Timestamp::from_sec(std::min(t, traj.duration()));
    truth.push_back({ts, traj.at(ts).pose});
  }
  io::write_tum(out_dir / "ground_truth.tum", truth);
}

RunSummary cmd_run(const io::Config& config, const fs::path& dataset_dir,
                   const fs::path& out_dir, std::ostream& log) {
  const auto t_run0 = std::chrono::steady_clock::now();
  const io::DatasetManifest manifest = io::scan_dataset(dataset_dir);
  const SensorRig rig = io::read_calib_json(dataset_dir / "calib.json");
  if (rig.lidars.size() < manifest.sweeps.size()) {
    throw std::runtime_error("run: calibration lists fewer lidars than the dataset");
  }

  std::vector<int> active;
  if (config.ablation.lidar_subset.empty()) {
    for (std::size_t id = 0; id < manifest.sweeps.size(); ++id) {
      active.push_back(static_cast<int>(id));
    }
  } else {
    active = config.ablation.lidar_subset;
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());
    for (int id : active) {
      if (id < 0 || static_cast<std::size_t>(id) >= manifest.sweeps.size()) {
        throw std::invalid_argument("run: lidar subset names missing id " +
                                    std::to_string(id));
      }
    }
  }

  const std::vector<ImuSample> imu = io::read_imu_csv(dataset_dir / "imu.csv");
  if (imu.empty()) throw std::runtime_error("run: empty imu stream");
  std::vector<EncoderSample> encoder;
  if (config.ablation.use_encoder) {
    encoder = io::read_encoder_csv(dataset_dir / "encoder.csv");
  }
  std::vector<RtkFix> rtk;
  if (config.ablation.use_rtk) {
    rtk = io::read_rtk_csv(dataset_dir / "rtk.csv");
  }

  // Per-LiDAR preprocessing workers; results are joined in id order so
  // the replay is independent of scheduling.
  RunSummary summary;
  std::vector<PreprocessOutput> preprocessed(active.size());
  {
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < active.size(); ++w) {
      workers.emplace_back([&, w] {
        preprocessed[w] =
            preprocess_lidar(manifest.sweeps[static_cast<std::size_t>(active[w])],
                             active[w], rig, imu, encoder, config);
      });
    }
    for (std::thread& t : workers) t.join();
  }
  for (const PreprocessOutput& p : preprocessed) {
    summary.constant_velocity_deskews += p.constant_velocity_fallbacks;
  }
  if (preprocessed.front().clouds.empty()) {
    throw std::runtime_error("run: primary lidar produced no feature clouds");
  }

  // Estimator noise model; without the encoder its rows are deweighted
  // to a vacuous constraint instead of changing the residual layout.
  SensorRig noise_rig = rig;
  if (!config.ablation.use_encoder) noise_rig.encoder_noise = 1e3;
  const preint::PreintNoise preint_noise = preint::PreintNoise::from_rig(noise_rig);
  const preint::GravityModel gravity;

  graph::WindowConfig wcfg = config.window;
  wcfg.keyframe = config.keyframe;
  wcfg.antenna_lever_arm = rig.antenna_lever_arm;
  wcfg.ground_lidar_to_body = SE3::identity();
  graph::SlidingWindow window(wcfg);

  factors::LocalFeatureMap map;
  const int map_horizon = 2 * wcfg.capacity;
  factors::GroundFitParams ground_fit;
  ground_fit.ransac_iterations = config.ground.ransac_iterations;
  ground_fit.inlier_distance = config.ground.inlier_distance;
  ground_fit.seed = config.ground.seed;
  ground_fit.min_points = config.ground.min_candidates;

  EncoderAccumulator enc_travel(encoder);
  std::size_t imu_cursor = 0;
  std::optional<ImuSample> last_absorbed;
  PreintegrationDelta running_delta;
  bool delta_started = false;
  bool initialized = false;
  bool imu_gap_logged = false;

  RobotState last_kf_state;
  int kf_index = 0;
  std::vector<bool> rtk_used(rtk.size(), false);

  struct RecordedKeyframe {
    Timestamp t;
    SE3 pose;
    std::vector<LidarPoint> points;  // body frame, for the map
  };
  std::vector<RecordedKeyframe> recorded;
  std::vector<std::vector<LidarPoint>> window_points;  // parallels window slots
  std::vector<DegeneracyEvent> events;
  std::size_t solver_iterations = 0;
  std::size_t solves = 0;
  double replay_ms = 0.0, max_scan_ms = 0.0;

  // Absorbs IMU samples up to and including t so preintegration spans
  // close exactly on the keyframe stamp when the streams share a grid.
  const auto advance_imu = [&](Timestamp t) {
    bool any = false;
    while (imu_cursor < imu.size() && imu[imu_cursor].t <= t) {
      const ImuSample& s = imu[imu_cursor++];
      any = true;
      if (initialized && last_absorbed.has_value()) {
        const Duration dt = s.t - last_absorbed->t;
        if (dt.nanos() > 0) {
          if (!delta_started) {
            running_delta.begin(*last_absorbed);
            delta_started = true;
          }
          running_delta.propagate(s, enc_travel.travel(last_absorbed->t, s.t), dt);
        }
      }
      last_absorbed = s;
    }
    return any;
  };

  // Nearest unused healthy fix within the match window; each fix feeds
  // at most one keyframe so its information is counted once.
  const auto attach_rtk = [&](Timestamp t) -> std::optional<graph::RtkAttachment> {
    if (rtk.empty()) return std::nullopt;
    const auto it = std::lower_bound(
        rtk.begin(), rtk.end(), t,
        [](const RtkFix& f, Timestamp q) { return f.t < q; });
    std::size_t best = rtk.size();
    double best_dt = config.rtk.match_window;
    const auto consider = [&](std::size_t i) {
      if (rtk_used[i] || rtk[i].status == RtkStatus::none) return;
      const double dt = std::abs((rtk[i].t - t).to_sec());
      if (dt <= best_dt) {
        best = i;
        best_dt = dt;
      }
    };
    const std::size_t at = static_cast<std::size_t>(it - rtk.begin());
    for (std::size_t i = at < 3 ? 0 : at - 3; i < rtk.size() && i < at + 3; ++i) {
      consider(i);
    }
    if (best == rtk.size()) return std::nullopt;
    rtk_used[best] = true;
    graph::RtkAttachment a;
    a.fix = rtk[best];
    a.dt = (rtk[best].t - t).to_sec();
    a.sigma = factors::rtk_sigma_for(rtk[best].status, config.rtk.fix_sigma,
                                     config.rtk.float_sigma) +
              config.rtk.time_penalty * std::abs(a.dt);
    return a;
  };

  // Body-frame points a keyframe contributes to the output map.
  const auto map_sample = [](const sync::FusedScan& scan) {
    std::vector<LidarPoint> pts;
    pts.reserve(scan.edges.size() + scan.planars.size() + scan.ground.size() / 4 + 1);
    pts.insert(pts.end(), scan.edges.begin(), scan.edges.end());
    pts.insert(pts.end(), scan.planars.begin(), scan.planars.end());
    for (std::size_t i = 0; i < scan.ground.size(); i += 4) {
      pts.push_back(scan.ground[i]);
    }
    return pts;
  };

  const auto process_scan = [&](sync::FusedScan&& fused, std::size_t scan_index) {
    const auto t_scan0 = std::chrono::steady_clock::now();
    const Timestamp t_k = fused.window.t_k;
    const bool had_imu = advance_imu(t_k);

    if (!initialized) {
      RobotState s0;
      if (const auto fix = attach_rtk(t_k)) {
        s0.position = fix->fix.position - s0.attitude * rig.antenna_lever_arm;
      }
      initialized = true;
      running_delta = PreintegrationDelta(preint::BiasPoint{}, preint_noise);
      delta_started = false;
      last_kf_state = s0;
      graph::Keyframe kf;
      kf.index = kf_index++;
      kf.t = t_k;
      kf.state = s0;
      if (config.ablation.use_ground) {
        std::vector<Eigen::Vector3d> gp;
        gp.reserve(fused.ground.size());
        for (const LidarPoint& p : fused.ground) gp.push_back(p.position);
        kf.ground_plane = factors::fit_ground_plane(gp, ground_fit);
      }
      window_points.push_back(map_sample(fused));
      std::vector<Eigen::Vector3d> we, wp;
      for (const LidarPoint& p : fused.edges) we.push_back(pose_of(s0) * p.position);
      for (const LidarPoint& p : fused.planars) wp.push_back(pose_of(s0) * p.position);
      kf.scan = std::move(fused);
      window.insert(std::move(kf), {});
      map.insert(0, std::move(we), std::move(wp));
      replay_ms += elapsed_ms(t_scan0);
      return;
    }

    if (!had_imu && !imu_gap_logged) {
      log << "warning: imu stream gap before scan " << scan_index << "\n";
      imu_gap_logged = true;
    }

    const RobotState predicted =
        delta_started ? predict_state(last_kf_state, running_delta, gravity)
                      : last_kf_state;
    const SE3 predicted_pose = pose_of(predicted);
    if (!graph::select_keyframe(pose_of(last_kf_state), predicted_pose,
                                config.keyframe)) {
      const double ms = elapsed_ms(t_scan0);
      replay_ms += ms;
      max_scan_ms = std::max(max_scan_ms, ms);
      return;
    }

    const factors::RegistrationResult reg = factors::register_scan(
        fused.edges, fused.planars, map, predicted_pose, config.registration);
    ++summary.registrations;
    const factors::VerifyResult verdict =
        factors::rtk_verify(reg, predicted_pose, fused.edges, fused.planars, map,
                            config.registration, config.verify);
    if (reg.degenerate) {
      ++summary.degenerate_registrations;
      events.push_back({scan_index, reg.min_eigenvalue, reg.correspondences,
                        "prediction substituted"});
      log << "warning: degenerate registration at scan " << scan_index
          << " (min eigenvalue " << reg.min_eigenvalue << ", "
          << reg.correspondences << " correspondences)\n";
    }
    if (verdict.source == factors::VerifySource::refined) {
      ++summary.reseeded_registrations;
    } else if (verdict.source == factors::VerifySource::prediction) {
      ++summary.prediction_fallbacks;
    }

    RobotState state = predicted;
    state.attitude = verdict.pose.rotation;
    state.position = verdict.pose.translation;

    graph::Keyframe kf;
    kf.index = kf_index;
    kf.t = t_k;
    kf.state = state;
    if (config.ablation.use_ground) {
      std::vector<Eigen::Vector3d> gp;
      gp.reserve(fused.ground.size());
      for (const LidarPoint& p : fused.ground) gp.push_back(p.position);
      kf.ground_plane = factors::fit_ground_plane(gp, ground_fit);
      if (kf.ground_plane) ++summary.ground_factors;
    }

    graph::InsertPayload payload;
    payload.preint = std::move(running_delta);
    payload.correspondences = factors::find_correspondences(
        fused.edges, fused.planars, map, verdict.pose,
        config.registration.correspondence);
    if (config.ablation.use_rtk) {
      payload.rtk = attach_rtk(t_k);
      if (payload.rtk) ++summary.rtk_attached;
    }

    const bool will_marginalize =
        window.size() == static_cast<std::size_t>(wcfg.capacity);
    if (will_marginalize) {
      const graph::Keyframe& dying = window.keyframes().front();
      recorded.push_back({dying.t, pose_of(dying.state),
                          std::move(window_points.front())});
      window_points.erase(window_points.begin());
    }

    std::vector<LidarPoint> kf_points = map_sample(fused);
    kf.scan = std::move(fused);
    const graph::SolverReport report = window.insert(std::move(kf), std::move(payload));
    ++solves;
    solver_iterations += static_cast<std::size_t>(report.iterations);
    for (std::size_t i = 1; i < report.accepted_costs.size(); ++i) {
      if (report.accepted_costs[i] > report.accepted_costs[i - 1]) {
        ++summary.monotonicity_violations;
      }
    }
    if (will_marginalize && window.last_marginalization_flagged()) {
      ++summary.marginalization_flags;
      log << "warning: damped marginalization at keyframe " << kf_index << "\n";
    }

    const RobotState latest = window.latest().state;
    std::vector<Eigen::Vector3d> we, wp;
    const SE3 latest_pose = pose_of(latest);
    const sync::FusedScan& scan = window.latest().scan;
    for (const LidarPoint& p : scan.edges) we.push_back(latest_pose * p.position);
    for (const LidarPoint& p : scan.planars) wp.push_back(latest_pose * p.position);
    map.insert(kf_index, std::move(we), std::move(wp));
    map.expire_before(kf_index - map_horizon + 1);
    window_points.push_back(std::move(kf_points));

    // Fresh span linearized at the latest bias estimate.
    preint::BiasPoint bias;
    bias.accel_bias = latest.accel_bias;
    bias.gyro_bias = latest.gyro_bias;
    bias.encoder_scale = latest.encoder_scale;
    running_delta = PreintegrationDelta(bias, preint_noise);
    delta_started = false;
    last_kf_state = latest;
    ++kf_index;

    const double ms = elapsed_ms(t_scan0);
    replay_ms += ms;
    max_scan_ms = std::max(max_scan_ms, ms);
  };

  // Chronological replay: secondaries are buffered into the merger ahead
  // of the primary window that covers them.
  {
    std::unordered_map<int, int> dense;
    for (std::size_t w = 0; w < active.size(); ++w) dense[active[w]] = static_cast<int>(w);
    sync::SweepMerger merger(static_cast<int>(active.size()), &log);
    const std::vector<sync::FeatureCloud>& primary = preprocessed.front().clouds;
    std::vector<std::size_t> cursors(active.size(), 0);

    for (std::size_t i = 0; i < primary.size(); ++i) {
      const Timestamp t_k = primary[i].t_start;
      const Timestamp t_k1 = (i + 1 < primary.size())
                                 ? primary[i + 1].t_start
                                 : primary[i].t_end + Duration::from_nanos(1);
      for (std::size_t w = 1; w < active.size(); ++w) {
        const std::vector<sync::FeatureCloud>& clouds = preprocessed[w].clouds;
        while (cursors[w] < clouds.size() && clouds[cursors[w]].t_start < t_k1) {
          sync::FeatureCloud cloud = clouds[cursors[w]++];
          cloud.lidar_id = dense[cloud.lidar_id];
          merger.add_secondary(std::move(cloud));
        }
      }
      sync::FeatureCloud primary_cloud = primary[i];
      primary_cloud.lidar_id = 0;
      process_scan(merger.merge_sweeps(primary_cloud, t_k, t_k1), i);
      ++summary.fused_scans;
    }
  }

  // Remaining window states are final.
  for (std::size_t s = 0; s < window.size(); ++s) {
    const graph::Keyframe& kf = window.keyframes()[s];
    recorded.push_back({kf.t, pose_of(kf.state), std::move(window_points[s])});
  }
  summary.keyframes = recorded.size();
  if (solves > 0) {
    summary.mean_solver_iterations =
        static_cast<double>(solver_iterations) / static_cast<double>(solves);
  }
  summary.degeneracy_flagged =
      summary.degenerate_registrations > 0 || summary.marginalization_flags > 0;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) {
    throw std::runtime_error("run: cannot create " + out_dir.string());
  }

  std::vector<io::TrajectoryPoint> trajectory;
  trajectory.reserve(recorded.size());
  for (const RecordedKeyframe& r : recorded) trajectory.push_back({r.t, r.pose});
  io::write_tum(out_dir / "trajectory.tum", trajectory);

  // Keyframe clouds at their final poses, first point per voxel kept.
  {
    std::vector<LidarPoint> cloud;
    std::unordered_set<int64_t> occupied;
    const double cell = 0.2;
    for (const RecordedKeyframe& r : recorded) {
      for (const LidarPoint& p : r.points) {
        LidarPoint world = p;
        world.position = r.pose * p.position;
        if (occupied.insert(voxel_key(world.position, cell)).second) {
          cloud.push_back(world);
        }
      }
    }
    io::write_ply(out_dir / "map.ply", cloud);
  }

  summary.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_run0).count();
  if (summary.fused_scans > 0) {
    summary.mean_scan_ms =
        summary.total_seconds * 1000.0 / static_cast<double>(summary.fused_scans);
  }
  summary.max_scan_ms = max_scan_ms;

  {
    nlohmann::ordered_json j;
    j["dataset"] = dataset_dir.string();
    j["ablation"] = {{"use_rtk", config.ablation.use_rtk},
                     {"use_encoder", config.ablation.use_encoder},
                     {"use_ground", config.ablation.use_ground},
                     {"lidars", active}};
    j["fused_scans"] = summary.fused_scans;
    j["keyframes"] = summary.keyframes;
    j["registrations"] = summary.registrations;
    j["degenerate_registrations"] = summary.degenerate_registrations;
    j["reseeded_registrations"] = summary.reseeded_registrations;
    j["prediction_fallbacks"] = summary.prediction_fallbacks;
    j["rtk_attached"] = summary.rtk_attached;
    j["ground_factors"] = summary.ground_factors;
    j["marginalization_flags"] = summary.marginalization_flags;
    j["monotonicity_violations"] = summary.monotonicity_violations;
    j["constant_velocity_deskews"] = summary.constant_velocity_deskews;
    j["degeneracy_flagged"] = summary.degeneracy_flagged;
    j["mean_solver_iterations"] = summary.mean_solver_iterations;
    j["mean_scan_ms"] = summary.mean_scan_ms;
    j["max_scan_ms"] = summary.max_scan_ms;
    j["total_seconds"] = summary.total_seconds;
    j["degeneracy_events"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < events.size() && i < 200; ++i) {
      j["degeneracy_events"].push_back({{"scan", events[i].scan},
                                        {"min_eigenvalue", events[i].min_eigenvalue},
                                        {"correspondences", events[i].correspondences},
                                        {"action", events[i].action}});
    }
    std::ofstream out(out_dir / "report.json", std::ios::binary);
    if (!out) throw std::runtime_error("run: cannot write report.json");
    out << j.dump(2) << '\n';
  }
  return summary;
}

}  // namespace mlio::pipeline
