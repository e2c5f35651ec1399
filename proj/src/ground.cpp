#include "mlio/factors/ground.hpp"

#include "mlio/core/quat.hpp"

namespace mlio::factors {

std::optional<PlaneModel> fit_ground_plane(const std::vector<Eigen::Vector3d>& points,
                                           const GroundFitParams& params) {
  if (points.size() < params.min_points) return std::nullopt;
  auto fit = fit_plane_ransac(points, params.ransac_iterations, params.inlier_distance,
                              params.seed, params.min_points);
  if (!fit) return std::nullopt;
  return fit->plane;
}

SE3 relative_lidar_pose(const SE3& t_w_bk, const SE3& t_w_bk1, const SE3& lidar_to_body) {
  return lidar_to_body.inverse() * t_w_bk1.inverse() * t_w_bk * lidar_to_body;
}

Eigen::Vector4d carry_plane(const PlaneModel& m, const SE3& t_rel) {
  Eigen::Vector4d out;
  out.head<3>() = t_rel.rotation * m.normal;
  out(3) = m.offset - out.head<3>().dot(t_rel.translation);
  return out;
}

Eigen::Vector4d ground_residual(const PlaneModel& m_k, const PlaneModel& m_k1,
                                const SE3& t_rel) {
  return m_k1.coeffs() - carry_plane(m_k, t_rel);
}

void ground_residual_jacobians(const PlaneModel& m_k, const SE3& t_w_bk,
                               const SE3& t_w_bk1, const SE3& lidar_to_body,
                               Eigen::Matrix<double, 4, 6>* j_k,
                               Eigen::Matrix<double, 4, 6>* j_k1) {
  const Eigen::Matrix3d e = lidar_to_body.rotation.matrix();
  const Eigen::Vector3d t_e = lidar_to_body.translation;
  const Eigen::Matrix3d r_k = t_w_bk.rotation.matrix();
  const Eigen::Matrix3d r_l = t_w_bk1.rotation.matrix();
  const Eigen::Vector3d n0 = m_k.normal;

  const SE3 t_rel = relative_lidar_pose(t_w_bk, t_w_bk1, lidar_to_body);
  const Eigen::Vector3d w = t_rel.rotation * n0;
  const Eigen::Vector3d t_rel_t = t_rel.translation;
  const Eigen::Vector3d u = r_k * t_e + t_w_bk.translation - t_w_bk1.translation;

  // Carried normal and translation sensitivities; the residual negates
  // the carried plane, and the offset row couples both through
  // d' = d0 - w . t_rel.
  const Eigen::Matrix3d dw_k = -e.transpose() * r_l.transpose() * r_k * skew(e * n0);
  const Eigen::Matrix3d dw_l = e.transpose() * skew(r_l.transpose() * r_k * e * n0);
  const Eigen::Matrix3d dt_dth_k = -e.transpose() * r_l.transpose() * r_k * skew(t_e);
  const Eigen::Matrix3d dt_dth_l = e.transpose() * skew(r_l.transpose() * u);
  const Eigen::Matrix3d dt_dp_k = e.transpose() * r_l.transpose();

  if (j_k) {
    j_k->setZero();
    j_k->block<3, 3>(0, 0) = -dw_k;
    j_k->block<1, 3>(3, 0) =
        t_rel_t.transpose() * dw_k + w.transpose() * dt_dth_k;
    j_k->block<1, 3>(3, 3) = w.transpose() * dt_dp_k;
  }
  if (j_k1) {
    j_k1->setZero();
    j_k1->block<3, 3>(0, 0) = -dw_l;
    j_k1->block<1, 3>(3, 0) =
        t_rel_t.transpose() * dw_l + w.transpose() * dt_dth_l;
    j_k1->block<1, 3>(3, 3) = -w.transpose() * dt_dp_k;
  }
}

}  // namespace mlio::factors
