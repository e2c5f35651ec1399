#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "mlio/core/se3.hpp"
#include "mlio/core/types.hpp"
#include "mlio/factors/feature_map.hpp"
#include "mlio/preint/preintegration.hpp"

namespace mlio::factors {

// Scan feature paired with the two map points defining its target line.
struct EdgeCorrespondence {
  Eigen::Vector3d point_body{0, 0, 0};
  Eigen::Vector3d line_a{0, 0, 0};  // world frame
  Eigen::Vector3d line_b{0, 0, 0};
};

// Scan feature paired with a non-collinear map triple spanning its plane.
struct PlaneCorrespondence {
  Eigen::Vector3d point_body{0, 0, 0};
  Eigen::Vector3d plane_a{0, 0, 0};  // world frame
  Eigen::Vector3d plane_b{0, 0, 0};
  Eigen::Vector3d plane_c{0, 0, 0};
};

// Perpendicular distance from p to the infinite line through a and b.
double point_to_line(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                     const Eigen::Vector3d& b);

// Absolute distance from p to the plane spanned by the triple.
double point_to_plane(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                      const Eigen::Vector3d& b, const Eigen::Vector3d& c);

struct CorrespondenceParams {
  double radius = 1.0;             // m, nearest-neighbor gate
  double min_separation = 0.05;    // m, between the two edge points
  double min_triangle_area = 1e-6;  // m^2, plane triple non-collinearity
  std::size_t min_total = 30;      // below this the frame is degenerate
};

struct Correspondences {
  std::vector<EdgeCorrespondence> edges;
  std::vector<PlaneCorrespondence> planes;
  std::size_t total() const { return edges.size() + planes.size(); }
};

// Pairs body-frame scan features, transformed by the pose guess, with
// their nearest map neighbors. Features without a valid match drop out.
Correspondences find_correspondences(const std::vector<LidarPoint>& edge_features,
                                     const std::vector<LidarPoint>& planar_features,
                                     const LocalFeatureMap& map, const SE3& guess,
                                     const CorrespondenceParams& params = {});

// Residual values at a pose. The plane residual is signed so the
// least-squares row stays differentiable; its magnitude is the distance.
double edge_residual(const EdgeCorrespondence& c, const SE3& pose);
double plane_residual(const PlaneCorrespondence& c, const SE3& pose);

// Least-squares form of the edge constraint: the two components of the
// point-to-line offset in an orthonormal basis perpendicular to the
// line. Its norm is the distance, its squared norm the Eq-style cost,
// and unlike the bare distance it is differentiable at zero.
Eigen::Vector2d edge_residual2(const EdgeCorrespondence& c, const SE3& pose);

// Residuals and Jacobians with respect to the right-perturbation
// [dtheta, dp] of the body pose.
Eigen::Vector2d edge_residual_jacobian(const EdgeCorrespondence& c, const SE3& pose,
                                       Eigen::Matrix<double, 2, 6>* jacobian);
double plane_residual_jacobian(const PlaneCorrespondence& c, const SE3& pose,
                               Eigen::Matrix<double, 1, 6>* jacobian);

// Indices that survive removing the floor(n/4) largest residuals,
// original order preserved. Ties resolve toward keeping earlier entries.
std::vector<int> quartile_keep(const std::vector<double>& residuals);

// Applies the quartile cut per class; moving objects inflate their
// residuals at the current guess and land in the removed fraction.
Correspondences filter_dynamic(const Correspondences& corr, const SE3& pose);

struct LidarCost {
  Eigen::VectorXd residuals;  // stacked edge then plane entries
  double total = 0.0;         // sum of squares
};
LidarCost lidar_cost(const Correspondences& corr, const SE3& pose);

struct RegistrationParams {
  CorrespondenceParams correspondence;
  int max_iterations = 8;
  double huber_delta = 0.1;  // m
  double sigma = 0.05;       // m, per-row measurement weight
  // Observability gate: smallest eigenvalue of the weighted 6x6 normal
  // matrix below this marks the solution direction-starved.
  double min_eigenvalue = 50.0;
  double step_tolerance = 1e-6;
};

struct RegistrationResult {
  SE3 pose;
  bool degenerate = false;
  std::size_t correspondences = 0;
  double min_eigenvalue = 0.0;
  double mean_residual = 0.0;  // mean absolute residual after the last step
  int iterations = 0;
};

// Frame-to-map Gauss-Newton alignment of one fused scan.
RegistrationResult register_scan(const std::vector<LidarPoint>& edge_features,
                                 const std::vector<LidarPoint>& planar_features,
                                 const LocalFeatureMap& map, const SE3& initial,
                                 const RegistrationParams& params = {});

struct VerifyParams {
  double translation_threshold = 1.0;  // m
  double rotation_threshold_deg = 5.0;
};

enum class VerifySource {
  registration,  // accepted as-is
  refined,       // re-seeded from the prediction and kept on merit
  prediction,    // registration degenerate, prediction substituted
  unverified,    // no prediction available to check against
};

struct VerifyResult {
  SE3 pose;
  VerifySource source = VerifySource::registration;
};

// Cross-checks a registration against the RTK/IMU predicted pose. Large
// discrepancies trigger a re-registration seeded at the prediction; the
// candidate with the lower mean residual wins. A degenerate registration
// is replaced by the prediction outright.
VerifyResult rtk_verify(const RegistrationResult& registration,
                        const std::optional<SE3>& predicted,
                        const std::vector<LidarPoint>& edge_features,
                        const std::vector<LidarPoint>& planar_features,
                        const LocalFeatureMap& map,
                        const RegistrationParams& reg_params = {},
                        const VerifyParams& params = {});

// Antenna-position residual: fix minus the antenna location implied by
// the state, with a constant-velocity bridge over the stamp offset dt.
Eigen::Vector3d rtk_residual(const RtkFix& fix, const preint::RobotState& state,
                             const Eigen::Vector3d& lever_arm, double dt = 0.0);

// Blocks with respect to [dtheta, dp, dv] of the state.
void rtk_residual_jacobian(const RtkFix& fix, const preint::RobotState& state,
                           const Eigen::Vector3d& lever_arm, double dt,
                           Eigen::Matrix<double, 3, 9>* jacobian);

// Status-dependent measurement sigma; the receiver's own covariance
// report is not trusted.
double rtk_sigma_for(RtkStatus status, double fix_sigma = 0.05, double float_sigma = 0.5);

}  // namespace mlio::factors
