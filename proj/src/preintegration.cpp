#include "mlio/preint/preintegration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace mlio::preint {
namespace {

// Left-multiplication matrix: a (x) q == L(a) * [qw; qv].
Eigen::Matrix4d quat_left(const Quat& a) {
  Eigen::Matrix4d m;
  const Eigen::Vector3d v = a.vec();
  m(0, 0) = a.w();
  m.block<1, 3>(0, 1) = -v.transpose();
  m.block<3, 1>(1, 0) = v;
  m.block<3, 3>(1, 1) = a.w() * Eigen::Matrix3d::Identity() + skew(v);
  return m;
}

// Right-multiplication matrix: a (x) q == R(q) * [aw; av].
Eigen::Matrix4d quat_right(const Quat& q) {
  Eigen::Matrix4d m;
  const Eigen::Vector3d v = q.vec();
  m(0, 0) = q.w();
  m.block<1, 3>(0, 1) = -v.transpose();
  m.block<3, 1>(1, 0) = v;
  m.block<3, 3>(1, 1) = q.w() * Eigen::Matrix3d::Identity() - skew(v);
  return m;
}

}  // namespace

PreintNoise PreintNoise::from_rig(const SensorRig& rig, double floor) {
  PreintNoise n;
  n.gyro_noise = std::max(rig.imu_noise.gyro_noise, floor);
  n.accel_noise = std::max(rig.imu_noise.accel_noise, 10.0 * floor);
  n.gyro_bias_walk = std::max(rig.imu_noise.gyro_bias_walk, 0.1 * floor);
  n.accel_bias_walk = std::max(rig.imu_noise.accel_bias_walk, floor);
  n.encoder_noise = std::max(rig.encoder_noise, floor);
  n.encoder_scale_walk = std::max(rig.encoder_scale_walk, 0.1 * floor);
  return n;
}

PreintegrationDelta::PreintegrationDelta(const BiasPoint& lin, const PreintNoise& noise)
    : lin_(lin), noise_(noise) {}

void PreintegrationDelta::begin(const ImuSample& first) {
  if (prev_.has_value()) throw std::logic_error("preintegration already seeded");
  prev_ = first;
  first_ = first;
}

void PreintegrationDelta::propagate(const ImuSample& imu, double enc_increment, Duration dt) {
  if (!prev_.has_value()) throw std::logic_error("preintegration not seeded");
  if (dt.nanos() < 0) throw std::invalid_argument("negative preintegration step");
  if (dt.nanos() == 0) return;
  if (!buffer_dropped_) steps_.push_back({imu, enc_increment, dt});
  integrate_step(imu, enc_increment, dt.to_sec());
  span_ = span_ + dt;
  prev_ = imu;
}

void PreintegrationDelta::integrate_step(const ImuSample& imu, double enc_increment, double dt) {
  const Eigen::Vector3d w_mid = 0.5 * (prev_->gyro + imu.gyro) - lin_.gyro_bias;
  const Eigen::Vector3d a0 = prev_->accel - lin_.accel_bias;
  const Eigen::Vector3d a1 = imu.accel - lin_.accel_bias;

  const Quat dq = Quat::exp(w_mid * dt);
  const Quat gamma_next = gamma_ * dq;
  const Eigen::Matrix3d r0 = gamma_.matrix();
  const Eigen::Matrix3d r1 = gamma_next.matrix();
  const Eigen::Vector3d acc_mid = 0.5 * (r0 * a0 + r1 * a1);

  // Odometer arc uses the mid-interval attitude; the increment is the raw
  // (unscaled) encoder reading apportioned to this interval.
  const Quat gamma_half = gamma_ * Quat::exp(0.5 * w_mid * dt);
  const Eigen::Vector3d odo_step =
      gamma_half * Eigen::Vector3d(lin_.encoder_scale * enc_increment, 0, 0);

  // First-order error-state transition, evaluated before the update.
  const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();
  const Eigen::Vector3d a_body_mid = 0.5 * (a0 + a1);
  const Eigen::Matrix3d r_a_skew = r0 * skew(a_body_mid);

  Mat19 a_mat = Mat19::Identity();
  a_mat.block<3, 3>(rows::pos, rows::vel) = i3 * dt;
  a_mat.block<3, 3>(rows::pos, rows::att) = -0.5 * r_a_skew * dt * dt;
  a_mat.block<3, 3>(rows::pos, rows::ba) = -0.5 * r0 * dt * dt;
  a_mat.block<3, 3>(rows::vel, rows::att) = -r_a_skew * dt;
  a_mat.block<3, 3>(rows::vel, rows::ba) = -r0 * dt;
  a_mat.block<3, 3>(rows::att, rows::att) = dq.matrix().transpose();
  a_mat.block<3, 3>(rows::att, rows::bg) = -i3 * dt;
  a_mat.block<3, 3>(rows::odo, rows::att) =
      -gamma_half.matrix() * skew(Eigen::Vector3d(lin_.encoder_scale * enc_increment, 0, 0));
  a_mat.block<3, 1>(rows::odo, rows::scale) =
      gamma_half * Eigen::Vector3d(enc_increment, 0, 0);

  // Additive white noise mapped through the same step.
  Mat19 q_add = Mat19::Zero();
  const double sg2 = noise_.gyro_noise * noise_.gyro_noise * dt;
  const double sa2 = noise_.accel_noise * noise_.accel_noise * dt;
  q_add.block<3, 3>(rows::att, rows::att) = sg2 * i3;
  q_add.block<3, 3>(rows::vel, rows::vel) = sa2 * i3;
  q_add.block<3, 3>(rows::pos, rows::pos) = 0.25 * sa2 * dt * dt * i3;
  q_add.block<3, 3>(rows::pos, rows::vel) = 0.5 * sa2 * dt * i3;
  q_add.block<3, 3>(rows::vel, rows::pos) = 0.5 * sa2 * dt * i3;
  q_add.block<3, 3>(rows::ba, rows::ba) =
      noise_.accel_bias_walk * noise_.accel_bias_walk * dt * i3;
  q_add.block<3, 3>(rows::bg, rows::bg) =
      noise_.gyro_bias_walk * noise_.gyro_bias_walk * dt * i3;
  q_add.block<3, 3>(rows::odo, rows::odo) =
      noise_.encoder_noise * noise_.encoder_noise * dt * i3;
  q_add(rows::scale, rows::scale) =
      noise_.encoder_scale_walk * noise_.encoder_scale_walk * dt;

  cov_ = a_mat * cov_ * a_mat.transpose() + q_add;
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();

  alpha_ += beta_ * dt + 0.5 * acc_mid * dt * dt;
  beta_ += acc_mid * dt;
  gamma_ = gamma_next;
  alpha_ob_ += odo_step;
}

PreintegrationDelta PreintegrationDelta::relinearized(const BiasPoint& new_lin) const {
  if (buffer_dropped_)
    throw std::logic_error("relinearize after buffer drop: window management bug");
  PreintegrationDelta out(new_lin, noise_);
  if (first_.has_value()) out.begin(*first_);
  for (const Step& s : steps_) out.propagate(s.imu, s.enc, s.dt);
  return out;
}

void PreintegrationDelta::drop_buffer() {
  steps_.clear();
  steps_.shrink_to_fit();
  buffer_dropped_ = true;
}

Mat19 PreintegrationDelta::sqrt_information() const {
  Eigen::SelfAdjointEigenSolver<Mat19> es(cov_);
  const Vec19 evals = es.eigenvalues();
  const double lam_max = std::max(evals.maxCoeff(), 1e-300);
  Vec19 inv_sqrt;
  for (int i = 0; i < 19; ++i) {
    const double lam = std::max(evals[i], 1e-14 * lam_max);
    inv_sqrt[i] = 1.0 / std::sqrt(lam);
  }
  return inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
}

Vec19 PreintegrationDelta::residual(const RobotState& sk, const RobotState& sk1,
                                    const GravityModel& gravity) const {
  const double dt = span_.to_sec();
  const Eigen::Matrix3d rk_t = sk.attitude.matrix().transpose();
  Vec19 r;
  r.segment<3>(rows::pos) =
      rk_t * (sk1.position - sk.position + 0.5 * gravity.g * dt * dt - sk.velocity * dt) -
      alpha_;
  r.segment<3>(rows::vel) = rk_t * (sk1.velocity + gravity.g * dt - sk.velocity) - beta_;
  const Quat err = sk.attitude.inverse() * sk1.attitude * gamma_.inverse();
  r.segment<3>(rows::att) = (err.w() >= 0.0 ? 2.0 : -2.0) * err.vec();
  r.segment<3>(rows::ba) = sk1.accel_bias - sk.accel_bias;
  r.segment<3>(rows::bg) = sk1.gyro_bias - sk.gyro_bias;
  r.segment<3>(rows::odo) = rk_t * (sk1.position - sk.position) - alpha_ob_;
  r[rows::scale] = sk1.encoder_scale - sk.encoder_scale;
  return r;
}

void PreintegrationDelta::residual_jacobians(const RobotState& sk, const RobotState& sk1,
                                             const GravityModel& gravity,
                                             Eigen::Matrix<double, 19, 16>& jk,
                                             Eigen::Matrix<double, 19, 16>& jk1) const {
  // Tangent column layout per state: [dtheta 0:3, dp 3:6, dv 6:9,
  // dba 9:12, dbg 12:15, ds 15].
  const double dt = span_.to_sec();
  const Eigen::Matrix3d rk_t = sk.attitude.matrix().transpose();
  const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();
  jk.setZero();
  jk1.setZero();

  const Eigen::Vector3d u_pos =
      sk1.position - sk.position + 0.5 * gravity.g * dt * dt - sk.velocity * dt;
  jk.block<3, 3>(rows::pos, 0) = skew(rk_t * u_pos);
  jk.block<3, 3>(rows::pos, 3) = -rk_t;
  jk.block<3, 3>(rows::pos, 6) = -rk_t * dt;
  jk1.block<3, 3>(rows::pos, 3) = rk_t;

  const Eigen::Vector3d u_vel = sk1.velocity + gravity.g * dt - sk.velocity;
  jk.block<3, 3>(rows::vel, 0) = skew(rk_t * u_vel);
  jk.block<3, 3>(rows::vel, 6) = -rk_t;
  jk1.block<3, 3>(rows::vel, 6) = rk_t;

  // Attitude rows differentiate 2 * vec(q_k^-1 (x) q_k1 (x) gamma^-1) with
  // the retraction q <- q (x) exp(dtheta). The sign flip matches residual().
  const Quat err = sk.attitude.inverse() * sk1.attitude * gamma_.inverse();
  const double sgn = err.w() >= 0.0 ? 1.0 : -1.0;
  jk.block<3, 3>(rows::att, 0) = -sgn * (err.w() * i3 - skew(err.vec()));
  const Eigen::Matrix4d c =
      quat_left(sk.attitude.inverse() * sk1.attitude) * quat_right(gamma_.inverse());
  jk1.block<3, 3>(rows::att, 0) = sgn * c.block<3, 3>(1, 1);

  jk.block<3, 3>(rows::ba, 9) = -i3;
  jk1.block<3, 3>(rows::ba, 9) = i3;
  jk.block<3, 3>(rows::bg, 12) = -i3;
  jk1.block<3, 3>(rows::bg, 12) = i3;

  const Eigen::Vector3d u_odo = sk1.position - sk.position;
  jk.block<3, 3>(rows::odo, 0) = skew(rk_t * u_odo);
  jk.block<3, 3>(rows::odo, 3) = -rk_t;
  jk1.block<3, 3>(rows::odo, 3) = rk_t;

  jk(rows::scale, 15) = -1.0;
  jk1(rows::scale, 15) = 1.0;
}

PreintegrationDelta compose(const PreintegrationDelta& ab, const PreintegrationDelta& bc) {
  PreintegrationDelta out(ab.lin_, ab.noise_);
  const Eigen::Matrix3d r_ab = ab.gamma_.matrix();
  const double dt_bc = bc.span_.to_sec();
  out.alpha_ = ab.alpha_ + ab.beta_ * dt_bc + r_ab * bc.alpha_;
  out.beta_ = ab.beta_ + r_ab * bc.beta_;
  out.gamma_ = ab.gamma_ * bc.gamma_;
  out.alpha_ob_ = ab.alpha_ob_ + r_ab * bc.alpha_ob_;
  out.span_ = ab.span_ + bc.span_;
  out.buffer_dropped_ = true;
  return out;
}

}  // namespace mlio::preint
