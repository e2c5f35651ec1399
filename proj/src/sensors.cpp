#include "mlio/sim/sensors.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace mlio::sim {
namespace {

Eigen::Vector3d gauss3(std::mt19937_64& rng, std::normal_distribution<double>& n) {
  return {n(rng), n(rng), n(rng)};
}

Duration period_of(double rate) { return Duration(std::llround(1e9 / rate)); }

}  // namespace

std::vector<ImuSample> sample_imu(const Trajectory& traj, const SensorRig& rig,
                                  double rate, uint64_t seed) {
  if (rate < 100.0) throw std::invalid_argument("imu rate below the 100 Hz floor");
  const Duration step = period_of(rate);
  const double dt = step.to_sec();
  const int64_t count = (traj.end() - traj.start()).nanos() / step.nanos();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double white_g = rig.imu_noise.gyro_noise * std::sqrt(rate);
  const double white_a = rig.imu_noise.accel_noise * std::sqrt(rate);
  const double walk_g = rig.imu_noise.gyro_bias_walk * std::sqrt(dt);
  const double walk_a = rig.imu_noise.accel_bias_walk * std::sqrt(dt);

  Eigen::Vector3d bias_g = Eigen::Vector3d::Zero();
  Eigen::Vector3d bias_a = Eigen::Vector3d::Zero();
  std::vector<ImuSample> out;
  out.reserve(count);
  for (int64_t i = 0; i < count; ++i) {
    const Timestamp t = traj.start() + Duration(step.nanos() * i);
    const TrajectorySample s = traj.at(t);
    ImuSample m;
    m.t = t;
    m.gyro = s.body_rate + bias_g;
    m.accel = s.specific_force + bias_a;
    if (white_g > 0.0) m.gyro += white_g * gauss3(rng, n01);
    if (white_a > 0.0) m.accel += white_a * gauss3(rng, n01);
    if (walk_g > 0.0) bias_g += walk_g * gauss3(rng, n01);
    if (walk_a > 0.0) bias_a += walk_a * gauss3(rng, n01);
    out.push_back(m);
  }
  return out;
}

std::vector<EncoderSample> sample_encoder(const Trajectory& traj, const SensorRig& rig,
                                          double rate, uint64_t seed) {
  if (rate <= 0.0) throw std::invalid_argument("encoder rate must be positive");
  const Duration step = period_of(rate);
  const int64_t count = (traj.end() - traj.start()).nanos() / step.nanos();
  if (rig.encoder_scale == 0.0) throw std::invalid_argument("zero encoder scale");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double sigma = rig.encoder_noise * std::sqrt(step.to_sec());

  std::vector<EncoderSample> out;
  out.reserve(count);
  for (int64_t i = 1; i <= count; ++i) {
    const Timestamp prev = traj.start() + Duration(step.nanos() * (i - 1));
    const Timestamp t = traj.start() + Duration(step.nanos() * i);
    EncoderSample e;
    e.t = t;
    e.increment = traj.arc_length(prev, t) / rig.encoder_scale;
    if (sigma > 0.0) e.increment += sigma * n01(rng);
    out.push_back(e);
  }
  return out;
}

std::vector<RtkFix> sample_rtk(const Trajectory& traj, const SensorRig& rig, double rate,
                               const std::vector<std::pair<Timestamp, Timestamp>>& outages,
                               uint64_t seed) {
  if (rate <= 0.0) throw std::invalid_argument("rtk rate must be positive");
  const Duration step = period_of(rate);
  const int64_t count = (traj.end() - traj.start()).nanos() / step.nanos();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const Eigen::Vector3d reported = (rig.rtk_reported_sigma.norm() > 0.0)
                                       ? rig.rtk_reported_sigma
                                       : Eigen::Vector3d::Constant(rig.rtk_sigma);

  std::vector<RtkFix> out;
  out.reserve(count);
  for (int64_t i = 0; i < count; ++i) {
    const Timestamp t = traj.start() + Duration(step.nanos() * i);
    const TrajectorySample s = traj.at(t);
    RtkFix fix;
    fix.t = t;
    fix.position = s.pose * rig.antenna_lever_arm;
    if (rig.rtk_sigma > 0.0) fix.position += rig.rtk_sigma * gauss3(rng, n01);
    fix.status = RtkStatus::fix;
    fix.reported_sigma = reported;
    for (const auto& [a, b] : outages) {
      if (in_half_open(t, a, b)) {
        fix.status = RtkStatus::none;
        break;
      }
    }
    out.push_back(fix);
  }
  return out;
}

std::vector<Sweep> sample_lidar(const WorldModel& world, const Trajectory& traj,
                                const SensorRig& rig, int lidar_id,
                                const LidarPattern& pattern, uint64_t seed) {
  if (lidar_id < 0 || lidar_id >= static_cast<int>(rig.lidars.size()))
    throw std::out_of_range("lidar id outside the rig");
  const SE3& mount = rig.lidars[lidar_id].lidar_to_body;
  const Duration period = Duration(std::llround(pattern.period * 1e9));
  const int64_t sweep_count = (traj.end() - traj.start()).nanos() / period.nanos();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double half_h = 0.5 * pattern.fov_h_deg * M_PI / 180.0;
  const double half_v = 0.5 * pattern.fov_v_deg * M_PI / 180.0;

  std::vector<Sweep> out;
  out.reserve(sweep_count);
  for (int64_t k = 0; k < sweep_count; ++k) {
    Sweep sweep;
    sweep.lidar_id = lidar_id;
    sweep.t_start = traj.start() + Duration(period.nanos() * k);
    sweep.t_end = traj.start() + Duration(period.nanos() * (k + 1));
    sweep.points.reserve(pattern.points_per_sweep);

    // Golden-ratio phase advance keeps consecutive rosettes disjoint.
    const double phase_a = 2.0 * M_PI * std::fmod(0.6180339887498949 * k, 1.0);
    const double phase_b = 2.0 * M_PI * std::fmod(0.3819660112501051 * k, 1.0);

    for (int j = 0; j < pattern.points_per_sweep; ++j) {
      const double tau = static_cast<double>(j) / pattern.points_per_sweep;
      const Timestamp tp = sweep.t_start + Duration(period.nanos() * j /
                                                    pattern.points_per_sweep);
      const double az = half_h * std::sin(2.0 * M_PI * pattern.freq_a * tau + phase_a);
      const double el = half_v * std::sin(2.0 * M_PI * pattern.freq_b * tau + phase_b);
      const Eigen::Vector3d dir_l(std::cos(el) * std::cos(az),
                                  std::cos(el) * std::sin(az), std::sin(el));

      const SE3 sensor_pose = traj.at(tp).pose * mount;
      const auto hit = world.raycast(sensor_pose.translation,
                                     sensor_pose.rotation * dir_l, tp.to_sec(),
                                     pattern.max_range);
      if (!hit) continue;
      double range = hit->range;
      if (pattern.range_sigma > 0.0) {
        // Truncated at 3 sigma: real rangefinders spec a bounded error and
        // this keeps back-projection residuals bounded by construction.
        const double noise = pattern.range_sigma * n01(rng);
        range += std::clamp(noise, -3.0 * pattern.range_sigma, 3.0 * pattern.range_sigma);
      }
      LidarPoint pt;
      pt.position = dir_l * range;
      pt.intensity = hit->reflectivity;
      pt.t = tp;
      pt.lidar_id = lidar_id;
      sweep.points.push_back(pt);
    }
    out.push_back(std::move(sweep));
  }
  return out;
}

}  // namespace mlio::sim
