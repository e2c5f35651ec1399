#pragma once

#include <Eigen/Core>
#include <vector>

#include "mlio/core/se3.hpp"
#include "mlio/core/time.hpp"

namespace mlio::sim {

enum class TrajectoryKind {
  stationary,
  straight,
  circle,
  figure_eight,
  piecewise_spline,
};

// Planar ground-truth motion: a 2D path swept at a ramped cruise speed,
// heading locked to the path tangent, constant height, yaw-only attitude.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::stationary;
  double speed = 1.0;      // cruise speed, m/s (average per loop for curved paths)
  double radius_x = 10.0;  // circle radius / figure-eight half-length
  double radius_y = 10.0;  // figure-eight half-width
  double duration = 10.0;  // s
  double ramp_time = 5.0;  // C1 speed-up from rest, s
  double height = 0.0;     // constant z of the body origin
  std::vector<Eigen::Vector2d> knots;  // piecewise_spline control points
};

struct TrajectorySample {
  SE3 pose;                               // body to world
  Eigen::Vector3d velocity{0, 0, 0};      // world frame, m/s
  Eigen::Vector3d body_rate{0, 0, 0};     // body frame, rad/s
  Eigen::Vector3d specific_force{0, 0, 0};  // body frame, m/s^2
};

// Evaluator with closed-form derivatives so sampled velocity, body rate
// and specific force stay consistent with finite differences of the pose.
class Trajectory {
 public:
  explicit Trajectory(const TrajectorySpec& spec);

  // Throws std::out_of_range outside [start, end].
  TrajectorySample at(Timestamp t) const;

  // Path distance traveled between two times (odometer ground truth).
  double arc_length(Timestamp a, Timestamp b) const;

  Timestamp start() const { return Timestamp{0, 0}; }
  Timestamp end() const { return Timestamp::from_sec(spec_.duration); }
  double duration() const { return spec_.duration; }
  const TrajectorySpec& spec() const { return spec_; }

 private:
  struct PathEval {
    Eigen::Vector2d p, d1, d2;  // value and u-derivatives
  };
  PathEval path(double u) const;
  double u_of_t(double t) const;
  double udot_of_t(double t) const;
  double uddot_of_t(double t) const;

  TrajectorySpec spec_;
  double u_rate_ = 0.0;  // cruise du/dt
  Eigen::Vector2d path_origin_{0, 0};             // p(0) of the raw path
  Eigen::Matrix2d heading_fix_ = Eigen::Matrix2d::Identity();
};

}  // namespace mlio::sim
