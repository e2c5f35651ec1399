#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "mlio/core/quat.hpp"
#include "mlio/core/se3.hpp"
#include "mlio/core/time.hpp"

namespace mlio {

struct ImuSample {
  Timestamp t;
  Eigen::Vector3d gyro{0, 0, 0};   // rad/s
  Eigen::Vector3d accel{0, 0, 0};  // specific force, m/s^2
};

struct EncoderSample {
  Timestamp t;
  double increment = 0.0;  // meters of nominal travel since previous sample
};

enum class RtkStatus : int { none = 0, flt = 1, fix = 2 };

struct RtkFix {
  Timestamp t;
  Eigen::Vector3d position{0, 0, 0};  // antenna position, local ENU
  RtkStatus status = RtkStatus::none;
  Eigen::Vector3d reported_sigma{0, 0, 0};
};

struct LidarPoint {
  Eigen::Vector3d position{0, 0, 0};  // emitting LiDAR frame
  double intensity = 0.0;             // [0, 1]
  Timestamp t;
  int lidar_id = 0;
};

struct Sweep {
  int lidar_id = 0;
  Timestamp t_start;
  Timestamp t_end;
  std::vector<LidarPoint> points;  // sorted by t
};

struct ImuNoise {
  double gyro_noise = 0.0;       // rad/s/sqrt(Hz)
  double accel_noise = 0.0;      // m/s^2/sqrt(Hz)
  double gyro_bias_walk = 0.0;   // rad/s^2/sqrt(Hz)
  double accel_bias_walk = 0.0;  // m/s^3/sqrt(Hz)
};

struct LidarMount {
  SE3 lidar_to_body;    // maps LiDAR-frame points into the body frame
  double mount_height;  // meters above ground
};

// Calibration and noise description of the whole sensor suite. Extrinsics
// are trusted configuration inputs.
struct SensorRig {
  std::vector<LidarMount> lidars;
  Eigen::Vector3d antenna_lever_arm{0, 0, 0};  // body frame, m
  Eigen::Vector3d encoder_axis{1, 0, 0};       // travel direction, body frame
  ImuNoise imu_noise;
  double encoder_noise = 0.0;  // m/sqrt(s), white noise density on increments
  double encoder_scale_walk = 0.0;
  double encoder_scale = 1.0;  // true scale s_o
  double rtk_sigma = 0.0;      // injected noise, m per axis
  Eigen::Vector3d rtk_reported_sigma{0, 0, 0};  // 0 = report the true sigma

  SE3 body_to_lidar(int id) const { return lidars.at(id).lidar_to_body.inverse(); }
};

}  // namespace mlio
