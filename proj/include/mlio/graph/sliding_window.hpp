#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <vector>

#include "mlio/core/plane.hpp"
#include "mlio/core/se3.hpp"
#include "mlio/graph/graph.hpp"
#include "mlio/sync/sync.hpp"

namespace mlio::graph {

// Estimation node: state estimate plus the fused scan and per-keyframe
// measurements attached to it.
struct Keyframe {
  int index = 0;
  Timestamp t;
  RobotState state;
  sync::FusedScan scan;
  // Ground plane measured in the primary LiDAR frame, when the fit held.
  std::optional<PlaneModel> ground_plane;
  bool has_ground = false;
  bool has_rtk = false;
};

struct KeyframeThresholds {
  double distance = 10.0;      // m
  double rotation_deg = 2.0;
};

// True when the candidate pose has moved far enough from the last
// keyframe to warrant a new node.
bool select_keyframe(const SE3& last_keyframe, const SE3& candidate,
                     const KeyframeThresholds& thresholds = {});

// RTK fix bound to a keyframe; dt is fix time minus keyframe time and
// sigma already carries the bridging inflation.
struct RtkAttachment {
  RtkFix fix;
  double dt = 0.0;
  double sigma = 0.05;
};

// Measurements arriving with one keyframe insertion. The preintegration
// delta spans from the previous keyframe and is absent for the first.
struct InsertPayload {
  std::optional<preint::PreintegrationDelta> preint;
  factors::Correspondences correspondences;
  std::optional<RtkAttachment> rtk;
};

struct WindowConfig {
  int capacity = 10;
  KeyframeThresholds keyframe;
  SolveConfig solver;
  preint::GravityModel gravity;
  Eigen::Vector3d antenna_lever_arm{0, 0, 0};
  SE3 ground_lidar_to_body;
  double lidar_sigma = 0.05;       // m per correspondence row
  double huber_delta = 0.1;        // m
  double ground_normal_sigma = 0.02;
  double ground_offset_sigma = 0.05;
  // Weak anchor on the first keyframe; absolute fixes take over once
  // RTK factors arrive.
  double anchor_rotation_sigma = 0.05;  // rad
  double anchor_position_sigma = 1.0;   // m
  double anchor_velocity_sigma = 0.5;
  double anchor_accel_bias_sigma = 0.1;
  double anchor_gyro_bias_sigma = 0.01;
  double anchor_scale_sigma = 0.01;
};

// Fixed-capacity keyframe window: inserting past capacity folds the
// oldest state into the prior by Schur complement, then re-optimizes.
class SlidingWindow {
 public:
  explicit SlidingWindow(WindowConfig config = {});

  bool empty() const { return keyframes_.empty(); }
  std::size_t size() const { return keyframes_.size(); }
  const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  const Keyframe& latest() const { return keyframes_.back(); }
  const WindowConfig& config() const { return config_; }

  // Appends the keyframe, attaches its factors, marginalizes past
  // capacity and optimizes. The first insertion only seats the anchor.
  SolverReport insert(Keyframe keyframe, InsertPayload payload);

  const std::optional<LinearFactor>& prior() const { return prior_; }
  bool last_marginalization_flagged() const { return marginalization_flagged_; }

  // Every optimization report since construction, for cost audits.
  const std::vector<SolverReport>& reports() const { return reports_; }

  // Oldest keyframe index still inside the window.
  int oldest_index() const { return keyframes_.front().index; }

 private:
  void marginalize_oldest();
  SolverReport optimize();

  WindowConfig config_;
  std::vector<Keyframe> keyframes_;
  std::vector<std::unique_ptr<Factor>> factors_;
  std::optional<LinearFactor> prior_;
  std::vector<SolverReport> reports_;
  bool marginalization_flagged_ = false;
};

}  // namespace mlio::graph
