#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <vector>

#include "mlio/core/plane.hpp"
#include "mlio/core/se3.hpp"
#include "mlio/factors/ground.hpp"
#include "mlio/factors/lidar_factors.hpp"
#include "mlio/preint/preintegration.hpp"

namespace mlio::graph {

using preint::RobotState;
using Vec16 = Eigen::Matrix<double, 16, 1>;

inline constexpr int kStateDim = 16;

// Right-perturbation update of a full state in the tangent order
// [dtheta, dp, dv, dba, dbg, ds].
RobotState retract(const RobotState& x, const Vec16& d);

// Tangent coordinates of x at base: retract(base, local_coordinates(base, x))
// recovers x.
Vec16 local_coordinates(const RobotState& base, const RobotState& x);

enum class FactorClass { prior = 0, preintegration, lidar, ground, rtk };
inline constexpr int kFactorClasses = 5;

// Dense normal equations over the stacked window tangent. The step is
// -hessian^-1 gradient.
class Accumulator {
 public:
  explicit Accumulator(int num_states);

  // Adds weight * (J^T J, J^T r) for a residual block whose jacobians[i]
  // differentiates with respect to slots[i].
  void add(const std::vector<int>& slots, const std::vector<Eigen::MatrixXd>& jacobians,
           const Eigen::VectorXd& residual, double weight = 1.0);

  const Eigen::MatrixXd& hessian() const { return h_; }
  const Eigen::VectorXd& gradient() const { return b_; }

 private:
  Eigen::MatrixXd h_;
  Eigen::VectorXd b_;
};

// One residual block over window states addressed by slot index.
class Factor {
 public:
  virtual ~Factor() = default;

  virtual FactorClass factor_class() const = 0;
  virtual int rows() const = 0;

  // One-time refresh before a solve; relinearization lives here so the
  // cost function stays fixed while the solver iterates.
  virtual void prepare(const std::vector<RobotState>&) {}

  // Robust cost at the given states (0.5 weighted squared norm for
  // quadratic factors).
  virtual double cost(const std::vector<RobotState>& x) const = 0;

  // Gauss-Newton contribution at x.
  virtual void accumulate(const std::vector<RobotState>& x, Accumulator* acc) const = 0;

  const std::vector<int>& slots() const { return slots_; }
  void shift_slots(int delta);

 protected:
  explicit Factor(std::vector<int> slots) : slots_(std::move(slots)) {}

  std::vector<int> slots_;
};

// Quadratic factor linear in the boxminus coordinates around stored
// linearization states. The marginalization prior is one of these; toy
// linear-Gaussian problems are built from them directly.
class LinearFactor final : public Factor {
 public:
  LinearFactor(std::vector<int> slots, std::vector<RobotState> linearization,
               Eigen::MatrixXd jacobian, Eigen::VectorXd offset,
               FactorClass cls = FactorClass::prior);

  FactorClass factor_class() const override { return class_; }
  int rows() const override { return static_cast<int>(jacobian_.rows()); }
  double cost(const std::vector<RobotState>& x) const override;
  void accumulate(const std::vector<RobotState>& x, Accumulator* acc) const override;

  const std::vector<RobotState>& linearization() const { return linearization_; }
  const Eigen::MatrixXd& jacobian() const { return jacobian_; }
  const Eigen::VectorXd& offset() const { return offset_; }

 private:
  Eigen::VectorXd stacked_delta(const std::vector<RobotState>& x) const;

  std::vector<RobotState> linearization_;
  Eigen::MatrixXd jacobian_;
  Eigen::VectorXd offset_;
  FactorClass class_;
};

// IMU/encoder preintegration constraint between consecutive keyframes.
// When the bias estimate drifts past relin_threshold from the delta's
// linearization point, prepare() re-propagates the retained samples.
class PreintFactor final : public Factor {
 public:
  PreintFactor(int slot_k, int slot_k1, preint::PreintegrationDelta delta,
               preint::GravityModel gravity = {}, double relin_threshold = 1e-3);

  FactorClass factor_class() const override { return FactorClass::preintegration; }
  int rows() const override { return 19; }
  void prepare(const std::vector<RobotState>& x) override;
  double cost(const std::vector<RobotState>& x) const override;
  void accumulate(const std::vector<RobotState>& x, Accumulator* acc) const override;

  const preint::PreintegrationDelta& delta() const { return delta_; }

 private:
  preint::PreintegrationDelta delta_;
  preint::GravityModel gravity_;
  double relin_threshold_;
  preint::Mat19 sqrt_info_;
};

// Frame-to-map correspondences of one keyframe, Huber-robust per match.
class LidarFactor final : public Factor {
 public:
  LidarFactor(int slot, factors::Correspondences correspondences, double sigma = 0.05,
              double huber_delta = 0.1);

  FactorClass factor_class() const override { return FactorClass::lidar; }
  int rows() const override;
  double cost(const std::vector<RobotState>& x) const override;
  void accumulate(const std::vector<RobotState>& x, Accumulator* acc) const override;

  std::size_t size() const { return correspondences_.total(); }

 private:
  factors::Correspondences correspondences_;
  double sigma_;
  double huber_delta_;
};

// Coherence of the per-keyframe ground planes between neighbors.
class GroundFactor final : public Factor {
 public:
  GroundFactor(int slot_k, int slot_k1, PlaneModel measured_k, PlaneModel measured_k1,
               SE3 lidar_to_body, double normal_sigma = 0.02, double offset_sigma = 0.05);

  FactorClass factor_class() const override { return FactorClass::ground; }
  int rows() const override { return 4; }
  double cost(const std::vector<RobotState>& x) const override;
  void accumulate(const std::vector<RobotState>& x, Accumulator* acc) const override;

 private:
  PlaneModel measured_k_;
  PlaneModel measured_k1_;
  SE3 lidar_to_body_;
  double normal_sigma_;
  double offset_sigma_;
};

// Antenna-position fix on one keyframe, constant-velocity bridged over
// the stamp offset.
class RtkFactor final : public Factor {
 public:
  RtkFactor(int slot, RtkFix fix, Eigen::Vector3d lever_arm, double dt, double sigma);

  FactorClass factor_class() const override { return FactorClass::rtk; }
  int rows() const override { return 3; }
  double cost(const std::vector<RobotState>& x) const override;
  void accumulate(const std::vector<RobotState>& x, Accumulator* acc) const override;

 private:
  RtkFix fix_;
  Eigen::Vector3d lever_arm_;
  double dt_;
  double sigma_;
};

struct SolveConfig {
  int max_iterations = 20;
  double gradient_tolerance = 1e-10;
  double step_tolerance = 1e-8;
  double initial_lambda = 1e-6;
  double lambda_increase = 10.0;
  double lambda_decrease = 0.5;
  double max_lambda = 1e12;
};

struct SolverReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  // Cost after each accepted step; nonincreasing by construction.
  std::vector<double> accepted_costs;
  std::array<double, kFactorClasses> cost_by_class{};
  double gradient_norm = 0.0;
  double min_eigenvalue = 0.0;
  // Hessian eigenvalues indistinguishable from zero at convergence;
  // nonzero means the problem carries gauge freedom, not an error.
  int null_space_dim = 0;
  double final_lambda = 0.0;
};

// Damped Gauss-Newton over the window tangent. Steps are accepted only
// when the robust cost does not increase. Throws on a non-finite cost or
// on a state no factor touches.
SolverReport solve(std::vector<RobotState>* states, const std::vector<Factor*>& factors,
                   const SolveConfig& config = {});

// Schur-complement elimination of drop_slot from the quadratic assembled
// over the given factors at the current estimates. The returned linear
// factor covers the other involved slots in the original numbering;
// nothing is returned when no other state is involved. A singular
// eliminated block is damped and sets *flagged.
std::optional<LinearFactor> marginalize(const std::vector<RobotState>& states,
                                        const std::vector<const Factor*>& factors,
                                        int drop_slot, bool* flagged = nullptr);

}  // namespace mlio::graph
