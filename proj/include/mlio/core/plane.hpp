#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "mlio/core/se3.hpp"

namespace mlio {

// Plane in normal form n.x + d = 0 with |n| = 1 and n_z >= 0, so equal
// planes have equal coefficients.
struct PlaneModel {
  Eigen::Vector3d normal{0, 0, 1};
  double offset = 0.0;

  double distance(const Eigen::Vector3d& p) const { return normal.dot(p) + d_(); }
  Eigen::Vector4d coeffs() const {
    return {normal.x(), normal.y(), normal.z(), offset};
  }
  void normalize();

 private:
  double d_() const { return offset; }
};

// Re-expresses a plane of frame a in frame b, where t_b_a maps points of
// a into b.
PlaneModel transform_plane(const PlaneModel& m, const SE3& t_b_a);

struct PlaneFit {
  PlaneModel plane;
  std::vector<int> inliers;
};

// RANSAC with a least-squares polish on the winning consensus set.
// Deterministic for a fixed seed. Returns nothing when fewer than
// min_points points are given or every sample was degenerate.
std::optional<PlaneFit> fit_plane_ransac(const std::vector<Eigen::Vector3d>& pts,
                                         int iterations, double inlier_dist,
                                         uint64_t seed, size_t min_points = 3);

// Least-squares plane through a subset (smallest principal direction).
std::optional<PlaneModel> fit_plane_lsq(const std::vector<Eigen::Vector3d>& pts,
                                        const std::vector<int>& subset);

}  // namespace mlio
