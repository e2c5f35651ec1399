#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mlio/core/se3.hpp"
#include "mlio/core/time.hpp"
#include "mlio/core/types.hpp"

namespace mlio::io {

// All writers format doubles with enough digits to round-trip exactly;
// the CSV write -> read -> write cycle is byte-stable. TUM rows recover
// the exact translation but renormalize the quaternion, so pose equality
// there is semantic rather than bitwise. Failures throw
// std::runtime_error naming the offending file (and line for parses).

void write_imu_csv(const std::filesystem::path& file, const std::vector<ImuSample>& s);
std::vector<ImuSample> read_imu_csv(const std::filesystem::path& file);

void write_encoder_csv(const std::filesystem::path& file,
                       const std::vector<EncoderSample>& s);
std::vector<EncoderSample> read_encoder_csv(const std::filesystem::path& file);

void write_rtk_csv(const std::filesystem::path& file, const std::vector<RtkFix>& s);
std::vector<RtkFix> read_rtk_csv(const std::filesystem::path& file);

// One sweep per file; the sweep's time bounds are recovered from the
// first and last rows on read.
void write_sweep_csv(const std::filesystem::path& file, const Sweep& sweep);
Sweep read_sweep_csv(const std::filesystem::path& file, int lidar_id);

// Fixed-width sweep file name, lexical order = chronological order.
std::string sweep_file_name(int index);

void write_calib_json(const std::filesystem::path& file, const SensorRig& rig);
SensorRig read_calib_json(const std::filesystem::path& file);

struct TrajectoryPoint {
  Timestamp t;
  SE3 pose;
};

// Rows `t tx ty tz qx qy qz qw`, timestamps printed at nanosecond
// precision.
void write_tum(const std::filesystem::path& file,
               const std::vector<TrajectoryPoint>& trajectory);
std::vector<TrajectoryPoint> read_tum(const std::filesystem::path& file);

// ASCII point cloud with x, y, z, intensity vertex properties.
void write_ply(const std::filesystem::path& file, const std::vector<LidarPoint>& points);

struct StreamInfo {
  std::string name;
  std::size_t count = 0;
  Timestamp first;
  Timestamp last;
};

struct DatasetManifest {
  std::filesystem::path directory;
  std::vector<StreamInfo> streams;
  // Per-LiDAR sweep files in chronological order, indexed by lidar id.
  std::vector<std::vector<std::filesystem::path>> sweeps;
  Timestamp overlap_begin;
  Timestamp overlap_end;
};

// Inventories a dataset directory and validates the layout: every stream
// present and time-sorted, at least one LiDAR, and a nonempty overlap of
// the stream time ranges.
DatasetManifest scan_dataset(const std::filesystem::path& directory);

}  // namespace mlio::io
