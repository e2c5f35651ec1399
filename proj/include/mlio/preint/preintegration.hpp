#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mlio/core/types.hpp"

namespace mlio::preint {

// Per-keyframe estimation variable: attitude (body to world), position,
// velocity, IMU biases, and the encoder scale factor.
struct RobotState {
  Quat attitude;
  Eigen::Vector3d position{0, 0, 0};
  Eigen::Vector3d velocity{0, 0, 0};
  Eigen::Vector3d accel_bias{0, 0, 0};
  Eigen::Vector3d gyro_bias{0, 0, 0};
  double encoder_scale = 1.0;
};

struct GravityModel {
  Eigen::Vector3d g{0.0, 0.0, 9.81};
};

// Bias/scale linearization point of a preintegration span.
struct BiasPoint {
  Eigen::Vector3d accel_bias{0, 0, 0};
  Eigen::Vector3d gyro_bias{0, 0, 0};
  double encoder_scale = 1.0;
};

// Noise densities the integrator propagates into the 19x19 weight.
struct PreintNoise {
  double gyro_noise = 1e-3;        // rad/s/sqrt(Hz)
  double accel_noise = 1e-2;       // m/s^2/sqrt(Hz)
  double gyro_bias_walk = 1e-5;    // rad/s^2/sqrt(Hz)
  double accel_bias_walk = 1e-4;   // m/s^3/sqrt(Hz)
  double encoder_noise = 1e-3;     // m/sqrt(s)
  double encoder_scale_walk = 1e-5;

  static PreintNoise from_rig(const SensorRig& rig, double floor = 1e-6);
};

using Vec19 = Eigen::Matrix<double, 19, 1>;
using Mat19 = Eigen::Matrix<double, 19, 19>;

// Residual/error-state row layout shared by the delta covariance and the
// preintegration factor.
namespace rows {
inline constexpr int pos = 0;
inline constexpr int vel = 3;
inline constexpr int att = 6;
inline constexpr int ba = 9;
inline constexpr int bg = 12;
inline constexpr int odo = 15;
inline constexpr int scale = 18;
}  // namespace rows

// Recursive IMU/encoder increment between two keyframes: position,
// velocity, attitude and odometer deltas with accumulated noise.
// Integration is midpoint over consecutive sample pairs; the raw sample
// buffer is retained so bias updates re-propagate exactly.
class PreintegrationDelta {
 public:
  PreintegrationDelta() = default;
  PreintegrationDelta(const BiasPoint& lin, const PreintNoise& noise);

  // Seeds the previous-measurement slot without advancing time. Call with
  // the first sample of the span before the first propagate().
  void begin(const ImuSample& first);

  // Advances the delta by dt. The sample is paired with the previously
  // absorbed one for midpoint integration; enc_increment is the odometer
  // travel within this interval.
  void propagate(const ImuSample& imu, double enc_increment, Duration dt);

  // Exact re-propagation of the retained sample stream at a new
  // linearization point. Throws if the buffer was dropped.
  PreintegrationDelta relinearized(const BiasPoint& new_lin) const;

  // Frees the sample buffer once the owning window slot is marginalized.
  void drop_buffer();
  bool has_buffer() const { return !buffer_dropped_; }

  const Eigen::Vector3d& alpha() const { return alpha_; }
  const Eigen::Vector3d& beta() const { return beta_; }
  const Quat& gamma() const { return gamma_; }
  const Eigen::Vector3d& alpha_ob() const { return alpha_ob_; }
  Duration span() const { return span_; }
  double dt() const { return span_.to_sec(); }
  const BiasPoint& bias_point() const { return lin_; }
  const Mat19& covariance() const { return cov_; }

  // Square root S of the information matrix (S^T S = covariance^-1);
  // weighted residual is S * residual. Near-null directions are clamped.
  Mat19 sqrt_information() const;

  // The 19-row preintegration residual between two keyframe states.
  Vec19 residual(const RobotState& state_k, const RobotState& state_k1,
                 const GravityModel& gravity) const;

  // Analytic Jacobians of residual() w.r.t. the 16-dim tangent
  // [dtheta, dp, dv, dba, dbg, ds] of each state.
  void residual_jacobians(const RobotState& state_k, const RobotState& state_k1,
                          const GravityModel& gravity,
                          Eigen::Matrix<double, 19, 16>& J_k,
                          Eigen::Matrix<double, 19, 16>& J_k1) const;

  friend PreintegrationDelta compose(const PreintegrationDelta& ab,
                                     const PreintegrationDelta& bc);

 private:
  struct Step {
    ImuSample imu;
    double enc = 0.0;
    Duration dt;
  };

  void integrate_step(const ImuSample& imu, double enc_increment, double dt);

  BiasPoint lin_;
  PreintNoise noise_;

  Eigen::Vector3d alpha_{0, 0, 0};
  Eigen::Vector3d beta_{0, 0, 0};
  Quat gamma_;
  Eigen::Vector3d alpha_ob_{0, 0, 0};
  Duration span_;
  Mat19 cov_ = Mat19::Zero();

  std::optional<ImuSample> prev_;
  std::optional<ImuSample> first_;
  std::vector<Step> steps_;
  bool buffer_dropped_ = false;
};

// Composition of adjacent spans (delta over [a,b] followed by [b,c]).
// Covariance and buffers are not composed; geometry only.
PreintegrationDelta compose(const PreintegrationDelta& ab, const PreintegrationDelta& bc);

}  // namespace mlio::preint
