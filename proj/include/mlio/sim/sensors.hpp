#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mlio/core/types.hpp"
#include "mlio/sim/trajectory.hpp"
#include "mlio/sim/world.hpp"

namespace mlio::sim {

// Rosette scan pattern sweeping the limited field of view with an
// incommensurate frequency pair; phase shifts per sweep keep the pattern
// non-repetitive.
struct LidarPattern {
  double fov_h_deg = 81.7;
  double fov_v_deg = 25.1;
  int points_per_sweep = 8000;
  double period = 0.1;        // s, primary sweep period
  double range_sigma = 0.0;   // m
  double max_range = 260.0;   // m
  double freq_a = 7.0;        // azimuth cycles per sweep
  double freq_b = 11.3;       // elevation cycles per sweep
};

// IMU stream over [start, end), samples at i/rate, so a whole-second
// span at rate r has exactly r samples per second. Throws below the
// 100 Hz design floor.
std::vector<ImuSample> sample_imu(const Trajectory& traj, const SensorRig& rig,
                                  double rate, uint64_t seed);

// Encoder increments covering ((i-1)/rate, i/rate]; the rig's true scale
// divides the traveled arc so the estimator's scale multiplies back.
std::vector<EncoderSample> sample_encoder(const Trajectory& traj, const SensorRig& rig,
                                          double rate, uint64_t seed);

// RTK fixes on the antenna position; status drops to none inside outage
// windows [a, b). reported_sigma in the rig may understate the injected
// noise to exercise distrust handling downstream.
std::vector<RtkFix> sample_rtk(const Trajectory& traj, const SensorRig& rig, double rate,
                               const std::vector<std::pair<Timestamp, Timestamp>>& outages,
                               uint64_t seed);

// Sweeps for one LiDAR: every point is ray-cast from the sensor pose at
// that point's own timestamp, so motion distortion is baked in.
std::vector<Sweep> sample_lidar(const WorldModel& world, const Trajectory& traj,
                                const SensorRig& rig, int lidar_id,
                                const LidarPattern& pattern, uint64_t seed);

}  // namespace mlio::sim
