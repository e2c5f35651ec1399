#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace mlio {

// Unit quaternion with a fixed hemisphere convention: after normalize()
// the scalar part is nonnegative, so equal rotations compare equal
// componentwise. Layout is (w, x, y, z).
class Quat {
 public:
  Quat() : w_(1.0), v_(0.0, 0.0, 0.0) {}
  Quat(double w, double x, double y, double z) : w_(w), v_(x, y, z) { normalize(); }
  Quat(double w, const Eigen::Vector3d& v) : w_(w), v_(v) { normalize(); }

  static Quat identity() { return Quat(); }

  // Rotation of angle |omega| about omega/|omega|. Below 1e-8 rad the
  // series expansion keeps sin(t/2)/t well conditioned.
  static Quat exp(const Eigen::Vector3d& omega) {
    const double theta = omega.norm();
    double w, k;
    if (theta < 1e-8) {
      const double t2 = theta * theta;
      w = 1.0 - t2 / 8.0;
      k = 0.5 - t2 / 48.0;
    } else {
      w = std::cos(0.5 * theta);
      k = std::sin(0.5 * theta) / theta;
    }
    return Quat(w, k * omega);
  }

  static Quat from_matrix(const Eigen::Matrix3d& R) {
    Eigen::Quaterniond q(R);
    return Quat(q.w(), q.x(), q.y(), q.z());
  }

  static Quat from_yaw(double yaw) { return exp(Eigen::Vector3d(0.0, 0.0, yaw)); }

  double w() const { return w_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  const Eigen::Vector3d& vec() const { return v_; }

  // Rotation vector (axis * angle), angle in [0, pi].
  Eigen::Vector3d log() const {
    const double sgn = (w_ < 0.0) ? -1.0 : 1.0;
    const Eigen::Vector3d v = sgn * v_;
    const double vn = v.norm();
    if (vn < 1e-12) return 2.0 * v;
    const double angle = 2.0 * std::atan2(vn, sgn * w_);
    return (angle / vn) * v;
  }

  double angle() const { return log().norm(); }

  Quat conjugate() const {
    Quat q;
    q.w_ = w_;
    q.v_ = -v_;
    return q;
  }
  Quat inverse() const { return conjugate(); }

  Quat operator*(const Quat& o) const {
    Quat q;
    q.w_ = w_ * o.w_ - v_.dot(o.v_);
    q.v_ = w_ * o.v_ + o.w_ * v_ + v_.cross(o.v_);
    q.renorm_if_drifted();
    return q;
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d t = 2.0 * v_.cross(p);
    return p + w_ * t + v_.cross(t);
  }

  Eigen::Matrix3d matrix() const {
    const double xx = v_.x() * v_.x(), yy = v_.y() * v_.y(), zz = v_.z() * v_.z();
    const double xy = v_.x() * v_.y(), xz = v_.x() * v_.z(), yz = v_.y() * v_.z();
    const double wx = w_ * v_.x(), wy = w_ * v_.y(), wz = w_ * v_.z();
    Eigen::Matrix3d R;
    R << 1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy),
         2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx),
         2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy);
    return R;
  }

  void normalize() {
    const double n = std::sqrt(w_ * w_ + v_.squaredNorm());
    w_ /= n;
    v_ /= n;
    if (w_ < 0.0) {
      w_ = -w_;
      v_ = -v_;
    }
  }

  // Geodesic angle to another rotation.
  double angle_to(const Quat& o) const { return (conjugate() * o).angle(); }

 private:
  // Products of unit quaternions drift only by rounding; renormalize
  // without the hemisphere flip so composed signs stay continuous.
  void renorm_if_drifted() {
    const double n2 = w_ * w_ + v_.squaredNorm();
    if (std::abs(n2 - 1.0) > 1e-12) {
      const double n = std::sqrt(n2);
      w_ /= n;
      v_ /= n;
    }
  }

  double w_;
  Eigen::Vector3d v_;
};

// Shortest-path spherical linear interpolation; q1 is flipped into q0's
// hemisphere first so the path never takes the long way around.
inline Quat slerp(const Quat& q0, const Quat& q1, double t) {
  if (t == 0.0) return q0;
  if (t == 1.0) return q1;
  double w0 = q0.w(), w1 = q1.w();
  Eigen::Vector3d v0 = q0.vec(), v1 = q1.vec();
  double dot = w0 * w1 + v0.dot(v1);
  if (dot < 0.0) {
    w1 = -w1;
    v1 = -v1;
    dot = -dot;
  }
  if (dot > 1.0) dot = 1.0;
  const double theta = std::acos(dot);
  double a, b;
  if (theta < 1e-9) {
    a = 1.0 - t;
    b = t;
  } else {
    const double s = std::sin(theta);
    a = std::sin((1.0 - t) * theta) / s;
    b = std::sin(t * theta) / s;
  }
  const double w = a * w0 + b * w1;
  const Eigen::Vector3d v = a * v0 + b * v1;
  const double n = std::sqrt(w * w + v.squaredNorm());
  Quat out(w / n, v / n);
  return out;
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return m;
}

inline Quat so3_exp(const Eigen::Vector3d& omega) { return Quat::exp(omega); }
inline Eigen::Vector3d so3_log(const Quat& q) { return q.log(); }

}  // namespace mlio
