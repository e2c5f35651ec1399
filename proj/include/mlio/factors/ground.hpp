#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "mlio/core/plane.hpp"
#include "mlio/core/se3.hpp"

namespace mlio::factors {

struct GroundFitParams {
  int ransac_iterations = 200;
  double inlier_distance = 0.05;  // m
  std::uint64_t seed = 99;
  std::size_t min_points = 50;
};

// Robust plane over a keyframe's ground points, in the frame the points
// are expressed in. Nothing is returned when the set is too small or the
// consensus scatter is rank-deficient, and the factor is skipped.
std::optional<PlaneModel> fit_ground_plane(const std::vector<Eigen::Vector3d>& points,
                                           const GroundFitParams& params = {});

// Pose of LiDAR frame k expressed in LiDAR frame k+1, assembled from the
// two body poses and the shared mount extrinsic.
SE3 relative_lidar_pose(const SE3& t_w_bk, const SE3& t_w_bk1, const SE3& lidar_to_body);

// Plane coefficients carried through a rigid transform without the sign
// normalization, keeping the map differentiable for the factor below.
Eigen::Vector4d carry_plane(const PlaneModel& m, const SE3& t_rel);

// Difference between the plane observed at k+1 and the plane at k carried
// into frame k+1.
Eigen::Vector4d ground_residual(const PlaneModel& m_k, const PlaneModel& m_k1,
                                const SE3& t_rel);

// Jacobians of the residual with respect to the right-perturbations
// [dtheta, dp] of the two body poses.
void ground_residual_jacobians(const PlaneModel& m_k, const SE3& t_w_bk,
                               const SE3& t_w_bk1, const SE3& lidar_to_body,
                               Eigen::Matrix<double, 4, 6>* j_k,
                               Eigen::Matrix<double, 4, 6>* j_k1);

}  // namespace mlio::factors
