#include "mlio/factors/lidar_factors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace mlio::factors {

double point_to_line(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                     const Eigen::Vector3d& b) {
  const double len = (a - b).norm();
  if (len < 1e-12) return 0.0;
  return ((p - a).cross(p - b)).norm() / len;
}

double point_to_plane(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                      const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d n = (a - b).cross(a - c);
  const double nn = n.norm();
  if (nn < 1e-12) return 0.0;
  return std::abs((p - a).dot(n)) / nn;
}

namespace {

// Orthonormal basis of the plane perpendicular to the line direction;
// deterministic for a given pair so residual components are stable.
Eigen::Matrix<double, 3, 2> line_perp_basis(const Eigen::Vector3d& a,
                                            const Eigen::Vector3d& b) {
  const Eigen::Vector3d e = (b - a).normalized();
  int smallest = 0;
  e.cwiseAbs().minCoeff(&smallest);
  const Eigen::Vector3d u1 = e.cross(Eigen::Vector3d::Unit(smallest)).normalized();
  Eigen::Matrix<double, 3, 2> u;
  u.col(0) = u1;
  u.col(1) = e.cross(u1);
  return u;
}

Eigen::Matrix<double, 1, 6> chain_to_pose(const Eigen::Vector3d& grad,
                                          const Eigen::Vector3d& point_body,
                                          const SE3& pose) {
  Eigen::Matrix<double, 1, 6> j;
  j.block<1, 3>(0, 0) = -grad.transpose() * pose.rotation.matrix() * skew(point_body);
  j.block<1, 3>(0, 3) = grad.transpose();
  return j;
}

}  // namespace

double edge_residual(const EdgeCorrespondence& c, const SE3& pose) {
  return point_to_line(pose * c.point_body, c.line_a, c.line_b);
}

Eigen::Vector2d edge_residual2(const EdgeCorrespondence& c, const SE3& pose) {
  const Eigen::Matrix<double, 3, 2> u = line_perp_basis(c.line_a, c.line_b);
  return u.transpose() * ((pose * c.point_body) - c.line_a);
}

double plane_residual(const PlaneCorrespondence& c, const SE3& pose) {
  const Eigen::Vector3d n = (c.plane_a - c.plane_b).cross(c.plane_a - c.plane_c);
  const double nn = n.norm();
  if (nn < 1e-12) return 0.0;
  return ((pose * c.point_body) - c.plane_a).dot(n) / nn;
}

Eigen::Vector2d edge_residual_jacobian(const EdgeCorrespondence& c, const SE3& pose,
                                       Eigen::Matrix<double, 2, 6>* jacobian) {
  const Eigen::Matrix<double, 3, 2> u = line_perp_basis(c.line_a, c.line_b);
  if (jacobian) {
    jacobian->row(0) = chain_to_pose(u.col(0), c.point_body, pose);
    jacobian->row(1) = chain_to_pose(u.col(1), c.point_body, pose);
  }
  return u.transpose() * ((pose * c.point_body) - c.line_a);
}

double plane_residual_jacobian(const PlaneCorrespondence& c, const SE3& pose,
                               Eigen::Matrix<double, 1, 6>* jacobian) {
  const Eigen::Vector3d n = (c.plane_a - c.plane_b).cross(c.plane_a - c.plane_c);
  const double nn = n.norm();
  if (nn < 1e-12) {
    if (jacobian) jacobian->setZero();
    return 0.0;
  }
  const Eigen::Vector3d unit = n / nn;
  const Eigen::Vector3d p_w = pose * c.point_body;
  if (jacobian) *jacobian = chain_to_pose(unit, c.point_body, pose);
  return (p_w - c.plane_a).dot(unit);
}

Correspondences find_correspondences(const std::vector<LidarPoint>& edge_features,
                                     const std::vector<LidarPoint>& planar_features,
                                     const LocalFeatureMap& map, const SE3& guess,
                                     const CorrespondenceParams& params) {
  Correspondences out;

  for (const auto& feat : edge_features) {
    const Eigen::Vector3d p_w = guess * feat.position;
    const auto near = map.nearest_edges(p_w, 4, params.radius);
    // Nearest pair with enough separation to define a line.
    bool found = false;
    for (size_t i = 0; i + 1 < near.size() && !found; ++i) {
      for (size_t j = i + 1; j < near.size() && !found; ++j) {
        if ((near[i] - near[j]).norm() >= params.min_separation) {
          out.edges.push_back({feat.position, near[i], near[j]});
          found = true;
        }
      }
    }
  }

  for (const auto& feat : planar_features) {
    const Eigen::Vector3d p_w = guess * feat.position;
    const auto near = map.nearest_planars(p_w, 6, params.radius);
    bool found = false;
    for (size_t i = 0; i + 2 < near.size() && !found; ++i) {
      for (size_t j = i + 1; j + 1 < near.size() && !found; ++j) {
        for (size_t k = j + 1; k < near.size() && !found; ++k) {
          const double area =
              0.5 * ((near[j] - near[i]).cross(near[k] - near[i])).norm();
          if (area > params.min_triangle_area) {
            out.planes.push_back({feat.position, near[i], near[j], near[k]});
            found = true;
          }
        }
      }
    }
  }
  return out;
}

std::vector<int> quartile_keep(const std::vector<double>& residuals) {
  const size_t n = residuals.size();
  const size_t drop = n / 4;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Largest residuals first; ties drop the later entry.
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ra = residuals[static_cast<size_t>(a)];
    const double rb = residuals[static_cast<size_t>(b)];
    return ra != rb ? ra > rb : a > b;
  });
  std::vector<int> kept(order.begin() + static_cast<ptrdiff_t>(drop), order.end());
  std::sort(kept.begin(), kept.end());
  return kept;
}

Correspondences filter_dynamic(const Correspondences& corr, const SE3& pose) {
  Correspondences out;

  std::vector<double> edge_res(corr.edges.size());
  for (size_t i = 0; i < corr.edges.size(); ++i) edge_res[i] = edge_residual(corr.edges[i], pose);
  for (int i : quartile_keep(edge_res)) out.edges.push_back(corr.edges[static_cast<size_t>(i)]);

  std::vector<double> plane_res(corr.planes.size());
  for (size_t i = 0; i < corr.planes.size(); ++i) {
    plane_res[i] = std::abs(plane_residual(corr.planes[i], pose));
  }
  for (int i : quartile_keep(plane_res)) out.planes.push_back(corr.planes[static_cast<size_t>(i)]);

  return out;
}

LidarCost lidar_cost(const Correspondences& corr, const SE3& pose) {
  LidarCost cost;
  cost.residuals.resize(static_cast<Eigen::Index>(corr.total()));
  Eigen::Index row = 0;
  for (const auto& c : corr.edges) cost.residuals(row++) = edge_residual(c, pose);
  for (const auto& c : corr.planes) cost.residuals(row++) = plane_residual(c, pose);
  cost.total = cost.residuals.squaredNorm();
  return cost;
}

namespace {

struct NormalEquations {
  Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
  double abs_sum = 0.0;
  std::size_t count = 0;  // correspondences, not rows

  // Huber weight acts on the correspondence distance as a whole.
  template <int Rows>
  void add(const Eigen::Matrix<double, Rows, 1>& r,
           const Eigen::Matrix<double, Rows, 6>& j, double huber_delta, double sigma) {
    const double mag = r.norm();
    double w = 1.0 / (sigma * sigma);
    if (mag > huber_delta) w *= huber_delta / mag;
    h += w * j.transpose() * j;
    b += w * j.transpose() * r;
    abs_sum += mag;
    ++count;
  }
};

NormalEquations accumulate(const Correspondences& corr, const SE3& pose,
                           const RegistrationParams& params) {
  NormalEquations eq;
  for (const auto& c : corr.edges) {
    Eigen::Matrix<double, 2, 6> j;
    const Eigen::Vector2d r = edge_residual_jacobian(c, pose, &j);
    eq.add<2>(r, j, params.huber_delta, params.sigma);
  }
  for (const auto& c : corr.planes) {
    Eigen::Matrix<double, 1, 6> j;
    const double r = plane_residual_jacobian(c, pose, &j);
    eq.add<1>(Eigen::Matrix<double, 1, 1>(r), j, params.huber_delta, params.sigma);
  }
  return eq;
}

}  // namespace

RegistrationResult register_scan(const std::vector<LidarPoint>& edge_features,
                                 const std::vector<LidarPoint>& planar_features,
                                 const LocalFeatureMap& map, const SE3& initial,
                                 const RegistrationParams& params) {
  RegistrationResult result;
  result.pose = initial;

  Correspondences corr;
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    corr = filter_dynamic(
        find_correspondences(edge_features, planar_features, map, result.pose,
                             params.correspondence),
        result.pose);
    result.iterations = iter + 1;
    if (corr.total() < params.correspondence.min_total) break;

    NormalEquations eq = accumulate(corr, result.pose, params);
    const Eigen::Matrix<double, 6, 6> damped =
        eq.h + 1e-9 * Eigen::Matrix<double, 6, 6>::Identity();
    const Eigen::Matrix<double, 6, 1> delta = -damped.ldlt().solve(eq.b);
    if (!delta.allFinite()) break;

    result.pose.rotation = result.pose.rotation * Quat::exp(delta.head<3>());
    result.pose.translation += delta.tail<3>();
    if (delta.norm() < params.step_tolerance) break;
  }

  corr = filter_dynamic(
      find_correspondences(edge_features, planar_features, map, result.pose,
                           params.correspondence),
      result.pose);
  result.correspondences = corr.total();

  NormalEquations eq = accumulate(corr, result.pose, params);
  if (eq.count > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(eq.h);
    result.min_eigenvalue = eig.eigenvalues().minCoeff();
    result.mean_residual = eq.abs_sum / static_cast<double>(eq.count);
  }
  result.degenerate = result.correspondences < params.correspondence.min_total ||
                      result.min_eigenvalue < params.min_eigenvalue;
  return result;
}

VerifyResult rtk_verify(const RegistrationResult& registration,
                        const std::optional<SE3>& predicted,
                        const std::vector<LidarPoint>& edge_features,
                        const std::vector<LidarPoint>& planar_features,
                        const LocalFeatureMap& map,
                        const RegistrationParams& reg_params,
                        const VerifyParams& params) {
  if (registration.degenerate && predicted) {
    return {*predicted, VerifySource::prediction};
  }
  if (!predicted) {
    return {registration.pose, VerifySource::unverified};
  }

  const double dt = translation_distance(registration.pose, *predicted);
  const double dr = rotation_distance(registration.pose, *predicted) * 180.0 / M_PI;
  if (dt <= params.translation_threshold && dr <= params.rotation_threshold_deg) {
    return {registration.pose, VerifySource::registration};
  }

  const RegistrationResult reseeded =
      register_scan(edge_features, planar_features, map, *predicted, reg_params);
  if (!reseeded.degenerate && reseeded.mean_residual < registration.mean_residual) {
    return {reseeded.pose, VerifySource::refined};
  }
  return {registration.pose, VerifySource::registration};
}

Eigen::Vector3d rtk_residual(const RtkFix& fix, const preint::RobotState& state,
                             const Eigen::Vector3d& lever_arm, double dt) {
  return fix.position -
         (state.position + state.attitude * lever_arm + state.velocity * dt);
}

void rtk_residual_jacobian(const RtkFix& /*fix*/, const preint::RobotState& state,
                           const Eigen::Vector3d& lever_arm, double dt,
                           Eigen::Matrix<double, 3, 9>* jacobian) {
  if (!jacobian) return;
  jacobian->setZero();
  jacobian->block<3, 3>(0, 0) = state.attitude.matrix() * skew(lever_arm);
  jacobian->block<3, 3>(0, 3) = -Eigen::Matrix3d::Identity();
  jacobian->block<3, 3>(0, 6) = -dt * Eigen::Matrix3d::Identity();
}

double rtk_sigma_for(RtkStatus status, double fix_sigma, double float_sigma) {
  switch (status) {
    case RtkStatus::fix:
      return fix_sigma;
    case RtkStatus::flt:
      return float_sigma;
    case RtkStatus::none:
      break;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace mlio::factors
