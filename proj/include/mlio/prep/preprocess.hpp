#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mlio/core/plane.hpp"
#include "mlio/core/se3.hpp"
#include "mlio/core/types.hpp"
#include "mlio/preint/preintegration.hpp"
#include "mlio/sync/sync.hpp"

namespace mlio::prep {

// Drops returns closer than min_range to the sensor, which on a vehicle
// are dominated by self-hits and lens-adjacent clutter. Idempotent.
Sweep range_filter(Sweep sweep, double min_range = 3.0);

struct DeskewResult {
  Sweep sweep;
  // Set when the IMU stream did not cover the sweep span and the points
  // were compensated with a constant-velocity model instead.
  bool constant_velocity_fallback = false;
};

// Motion-compensates every point into the body pose at sweep start.
// Attitude comes from integrating the gyro samples, translation from the
// encoder arc when increments are available and from the prior velocity
// otherwise. Points are interpolated between integrated poses: slerp for
// rotation, lerp for translation. Coverage gaps beyond one sample period
// at either end trigger the constant-velocity fallback.
DeskewResult deskew(const Sweep& sweep,
                    const std::vector<ImuSample>& compensation,
                    const std::vector<EncoderSample>& encoder,
                    const preint::RobotState& prior,
                    const SE3& lidar_to_body);

// Applies the mount extrinsic so downstream stages work in the body frame.
Sweep to_body_frame(Sweep sweep, const SE3& lidar_to_body);

struct GroundParams {
  // Height of the sensor origin above the road surface.
  double sensor_height = 1.8;
  // Candidate band half-width around the predicted ground height.
  double height_tolerance = 0.3;
  // Sensor origin expressed in the body frame, for the downward-beam test.
  Eigen::Vector3d sensor_origin = Eigen::Vector3d::Zero();
  int ransac_iterations = 200;
  double inlier_distance = 0.05;
  std::uint64_t seed = 7;
  // Below this many candidates no plane is fit and everything stays
  // non-ground; the caller then skips the ground constraint.
  std::size_t min_candidates = 50;
};

struct GroundSplit {
  Sweep ground;
  Sweep nonground;
  std::optional<PlaneModel> plane;
};

// Splits a body-frame sweep into ground and non-ground. Candidates are
// points below the sensor whose height sits within the tolerance band of
// the predicted road level; a RANSAC plane over the candidates decides
// final membership. Scan order is preserved within each part.
GroundSplit segment_ground(const Sweep& sweep, const GroundParams& params);

struct FeatureParams {
  // Symmetric scan-order window size; half on each side.
  int neighborhood = 10;
  double edge_threshold = 0.2;
  double planar_threshold = 0.02;
  // A geometric edge needs a depth discontinuity this large toward a
  // time-adjacent neighbor. Surface creases and the artificial kinks
  // where the scan-order list skips removed points have high curvature
  // but no such jump, and must not become edges.
  double range_jump = 0.3;
  // Surfaces nearly parallel to the beam smear range along the ray and
  // their apparent borders move with the sensor. A candidate whose
  // continuation side has |delta range| / |delta position| above this is
  // dropped.
  double grazing_ratio = 0.97;
  // Reflectivity step to a time-adjacent point that promotes an edge
  // even when the geometry is smooth (poster edges, lane paint).
  double intensity_gradient = 0.25;
  int max_edges = 400;
  int max_planars = 800;
  // Caps are enforced per azimuth bin first so features spread around
  // the scan instead of clustering on the strongest structure.
  int azimuth_bins = 12;
};

// Selects edge features from the non-ground part (high curvature, plus
// intensity-gradient promotions) and planar features from the ground part
// (low curvature). The full ground set rides along for plane fitting.
sync::FeatureCloud extract_features(const GroundSplit& split,
                                    const FeatureParams& params);

// Scan-order curvature used for feature selection, exposed for tests:
// norm of the summed neighbor offsets over window size, normalized by
// range. Entries without a full window are NaN.
std::vector<double> scan_curvature(const std::vector<LidarPoint>& pts,
                                   int neighborhood);

}  // namespace mlio::prep
