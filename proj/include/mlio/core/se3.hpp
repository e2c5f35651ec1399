#pragma once

#include <Eigen/Core>

#include "mlio/core/quat.hpp"

namespace mlio {

// Rigid transform. As a coordinate map it takes points of the source
// frame into the destination frame: p_dst = rotation * p_src + translation.
struct SE3 {
  Quat rotation;
  Eigen::Vector3d translation{0.0, 0.0, 0.0};

  SE3() = default;
  SE3(const Quat& q, const Eigen::Vector3d& t) : rotation(q), translation(t) {}

  static SE3 identity() { return SE3(); }

  SE3 operator*(const SE3& o) const {
    return SE3(rotation * o.rotation, rotation * o.translation + translation);
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  SE3 inverse() const {
    const Quat qinv = rotation.conjugate();
    return SE3(qinv, -(qinv * translation));
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

inline SE3 compose(const SE3& a, const SE3& b) { return a * b; }
inline SE3 inverse(const SE3& a) { return a.inverse(); }
inline Eigen::Vector3d transform_point(const SE3& a, const Eigen::Vector3d& p) {
  return a * p;
}

// Rotation-angle plus translation-norm distance between two poses.
inline double rotation_distance(const SE3& a, const SE3& b) {
  return a.rotation.angle_to(b.rotation);
}
inline double translation_distance(const SE3& a, const SE3& b) {
  return (a.translation - b.translation).norm();
}

}  // namespace mlio
