#include "mlio/graph/graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <set>
#include <stdexcept>

namespace mlio::graph {
namespace {

// Robust cost of one correspondence magnitude.
double huber_cost(double s, double delta) {
  return s <= delta ? 0.5 * s * s : delta * (s - 0.5 * delta);
}

// IRLS weight matching huber_cost's gradient.
double huber_weight(double s, double delta) { return s <= delta ? 1.0 : delta / s; }

SE3 pose_of(const RobotState& x) { return SE3{x.attitude, x.position}; }

}  // namespace

RobotState retract(const RobotState& x, const Vec16& d) {
  RobotState out = x;
  out.attitude = x.attitude * Quat::exp(d.segment<3>(0));
  out.position += d.segment<3>(3);
  out.velocity += d.segment<3>(6);
  out.accel_bias += d.segment<3>(9);
  out.gyro_bias += d.segment<3>(12);
  out.encoder_scale += d(15);
  return out;
}

Vec16 local_coordinates(const RobotState& base, const RobotState& x) {
  Vec16 d;
  d.segment<3>(0) = (base.attitude.conjugate() * x.attitude).log();
  d.segment<3>(3) = x.position - base.position;
  d.segment<3>(6) = x.velocity - base.velocity;
  d.segment<3>(9) = x.accel_bias - base.accel_bias;
  d.segment<3>(12) = x.gyro_bias - base.gyro_bias;
  d(15) = x.encoder_scale - base.encoder_scale;
  return d;
}

Accumulator::Accumulator(int num_states)
    : h_(Eigen::MatrixXd::Zero(num_states * kStateDim, num_states * kStateDim)),
      b_(Eigen::VectorXd::Zero(num_states * kStateDim)) {}

void Accumulator::add(const std::vector<int>& slots,
                      const std::vector<Eigen::MatrixXd>& jacobians,
                      const Eigen::VectorXd& residual, double weight) {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    b_.segment<kStateDim>(slots[i] * kStateDim) +=
        weight * jacobians[i].transpose() * residual;
    for (std::size_t j = 0; j < slots.size(); ++j) {
      h_.block<kStateDim, kStateDim>(slots[i] * kStateDim, slots[j] * kStateDim) +=
          weight * jacobians[i].transpose() * jacobians[j];
    }
  }
}

void Factor::shift_slots(int delta) {
  for (int& s : slots_) s += delta;
}

LinearFactor::LinearFactor(std::vector<int> slots, std::vector<RobotState> linearization,
                           Eigen::MatrixXd jacobian, Eigen::VectorXd offset,
                           FactorClass cls)
    : Factor(std::move(slots)),
      linearization_(std::move(linearization)),
      jacobian_(std::move(jacobian)),
      offset_(std::move(offset)),
      class_(cls) {
  if (linearization_.size() != slots_.size() ||
      jacobian_.cols() != static_cast<Eigen::Index>(slots_.size()) * kStateDim ||
      jacobian_.rows() != offset_.size()) {
    throw std::invalid_argument("linear factor shape mismatch");
  }
}

Eigen::VectorXd LinearFactor::stacked_delta(const std::vector<RobotState>& x) const {
  Eigen::VectorXd dx(static_cast<Eigen::Index>(slots_.size()) * kStateDim);
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    dx.segment<kStateDim>(static_cast<Eigen::Index>(i) * kStateDim) =
        local_coordinates(linearization_[i], x[static_cast<std::size_t>(slots_[i])]);
  }
  return dx;
}

double LinearFactor::cost(const std::vector<RobotState>& x) const {
  return 0.5 * (offset_ + jacobian_ * stacked_delta(x)).squaredNorm();
}

void LinearFactor::accumulate(const std::vector<RobotState>& x, Accumulator* acc) const {
  const Eigen::VectorXd r = offset_ + jacobian_ * stacked_delta(x);
  std::vector<Eigen::MatrixXd> jacs;
  jacs.reserve(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    jacs.push_back(jacobian_.middleCols(static_cast<Eigen::Index>(i) * kStateDim, kStateDim));
  }
  acc->add(slots_, jacs, r);
}

PreintFactor::PreintFactor(int slot_k, int slot_k1, preint::PreintegrationDelta delta,
                           preint::GravityModel gravity, double relin_threshold)
    : Factor({slot_k, slot_k1}),
      delta_(std::move(delta)),
      gravity_(gravity),
      relin_threshold_(relin_threshold),
      sqrt_info_(delta_.sqrt_information()) {}

void PreintFactor::prepare(const std::vector<RobotState>& x) {
  if (!delta_.has_buffer()) return;
  const RobotState& sk = x[static_cast<std::size_t>(slots_[0])];
  const preint::BiasPoint& lin = delta_.bias_point();
  const double drift = std::max({(sk.accel_bias - lin.accel_bias).norm(),
                                 (sk.gyro_bias - lin.gyro_bias).norm(),
                                 std::abs(sk.encoder_scale - lin.encoder_scale)});
  if (drift > relin_threshold_) {
    delta_ = delta_.relinearized({sk.accel_bias, sk.gyro_bias, sk.encoder_scale});
    sqrt_info_ = delta_.sqrt_information();
  }
}

double PreintFactor::cost(const std::vector<RobotState>& x) const {
  const preint::Vec19 r =
      sqrt_info_ * delta_.residual(x[static_cast<std::size_t>(slots_[0])],
                                   x[static_cast<std::size_t>(slots_[1])], gravity_);
  return 0.5 * r.squaredNorm();
}

void PreintFactor::accumulate(const std::vector<RobotState>& x, Accumulator* acc) const {
  const RobotState& sk = x[static_cast<std::size_t>(slots_[0])];
  const RobotState& sk1 = x[static_cast<std::size_t>(slots_[1])];
  Eigen::Matrix<double, 19, 16> jk, jk1;
  delta_.residual_jacobians(sk, sk1, gravity_, jk, jk1);
  const Eigen::VectorXd r = sqrt_info_ * delta_.residual(sk, sk1, gravity_);
  acc->add(slots_, {sqrt_info_ * jk, sqrt_info_ * jk1}, r);
}

LidarFactor::LidarFactor(int slot, factors::Correspondences correspondences, double sigma,
                         double huber_delta)
    : Factor({slot}),
      correspondences_(std::move(correspondences)),
      sigma_(sigma),
      huber_delta_(huber_delta) {}

int LidarFactor::rows() const {
  return static_cast<int>(2 * correspondences_.edges.size() +
                          correspondences_.planes.size());
}

double LidarFactor::cost(const std::vector<RobotState>& x) const {
  const SE3 pose = pose_of(x[static_cast<std::size_t>(slots_[0])]);
  double total = 0.0;
  for (const auto& c : correspondences_.edges) {
    total += huber_cost(factors::edge_residual2(c, pose).norm(), huber_delta_);
  }
  for (const auto& c : correspondences_.planes) {
    total += huber_cost(std::abs(factors::plane_residual(c, pose)), huber_delta_);
  }
  return total / (sigma_ * sigma_);
}

void LidarFactor::accumulate(const std::vector<RobotState>& x, Accumulator* acc) const {
  const SE3 pose = pose_of(x[static_cast<std::size_t>(slots_[0])]);
  const double inv_var = 1.0 / (sigma_ * sigma_);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2, kStateDim);
  for (const auto& c : correspondences_.edges) {
    Eigen::Matrix<double, 2, 6> j6;
    const Eigen::Vector2d r = factors::edge_residual_jacobian(c, pose, &j6);
    j.leftCols<6>() = j6;
    acc->add(slots_, {j}, r, huber_weight(r.norm(), huber_delta_) * inv_var);
  }
  Eigen::MatrixXd jp = Eigen::MatrixXd::Zero(1, kStateDim);
  for (const auto& c : correspondences_.planes) {
    Eigen::Matrix<double, 1, 6> j6;
    const double r = factors::plane_residual_jacobian(c, pose, &j6);
    jp.leftCols<6>() = j6;
    acc->add(slots_, {jp}, Eigen::VectorXd::Constant(1, r),
             huber_weight(std::abs(r), huber_delta_) * inv_var);
  }
}

GroundFactor::GroundFactor(int slot_k, int slot_k1, PlaneModel measured_k,
                           PlaneModel measured_k1, SE3 lidar_to_body, double normal_sigma,
                           double offset_sigma)
    : Factor({slot_k, slot_k1}),
      measured_k_(measured_k),
      measured_k1_(measured_k1),
      lidar_to_body_(lidar_to_body),
      normal_sigma_(normal_sigma),
      offset_sigma_(offset_sigma) {}

double GroundFactor::cost(const std::vector<RobotState>& x) const {
  const SE3 t_rel =
      factors::relative_lidar_pose(pose_of(x[static_cast<std::size_t>(slots_[0])]),
                                   pose_of(x[static_cast<std::size_t>(slots_[1])]),
                                   lidar_to_body_);
  Eigen::Vector4d r = factors::ground_residual(measured_k_, measured_k1_, t_rel);
  r.head<3>() /= normal_sigma_;
  r(3) /= offset_sigma_;
  return 0.5 * r.squaredNorm();
}

void GroundFactor::accumulate(const std::vector<RobotState>& x, Accumulator* acc) const {
  const SE3 pose_k = pose_of(x[static_cast<std::size_t>(slots_[0])]);
  const SE3 pose_k1 = pose_of(x[static_cast<std::size_t>(slots_[1])]);
  Eigen::Matrix<double, 4, 6> j_k, j_k1;
  factors::ground_residual_jacobians(measured_k_, pose_k, pose_k1, lidar_to_body_, &j_k,
                                     &j_k1);
  Eigen::Vector4d r = factors::ground_residual(
      measured_k_, measured_k1_, factors::relative_lidar_pose(pose_k, pose_k1, lidar_to_body_));

  Eigen::Vector4d w;
  w << 1.0 / normal_sigma_, 1.0 / normal_sigma_, 1.0 / normal_sigma_, 1.0 / offset_sigma_;
  Eigen::MatrixXd jw_k = Eigen::MatrixXd::Zero(4, kStateDim);
  Eigen::MatrixXd jw_k1 = Eigen::MatrixXd::Zero(4, kStateDim);
  jw_k.leftCols<6>() = w.asDiagonal() * j_k;
  jw_k1.leftCols<6>() = w.asDiagonal() * j_k1;
  acc->add(slots_, {jw_k, jw_k1}, w.asDiagonal() * r);
}

RtkFactor::RtkFactor(int slot, RtkFix fix, Eigen::Vector3d lever_arm, double dt,
                     double sigma)
    : Factor({slot}), fix_(fix), lever_arm_(std::move(lever_arm)), dt_(dt), sigma_(sigma) {}

double RtkFactor::cost(const std::vector<RobotState>& x) const {
  const Eigen::Vector3d r =
      factors::rtk_residual(fix_, x[static_cast<std::size_t>(slots_[0])], lever_arm_, dt_) /
      sigma_;
  return 0.5 * r.squaredNorm();
}

void RtkFactor::accumulate(const std::vector<RobotState>& x, Accumulator* acc) const {
  const RobotState& s = x[static_cast<std::size_t>(slots_[0])];
  Eigen::Matrix<double, 3, 9> j9;
  factors::rtk_residual_jacobian(fix_, s, lever_arm_, dt_, &j9);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3, kStateDim);
  j.leftCols<9>() = j9 / sigma_;
  acc->add(slots_, {j}, factors::rtk_residual(fix_, s, lever_arm_, dt_) / sigma_);
}

SolverReport solve(std::vector<RobotState>* states, const std::vector<Factor*>& factors,
                   const SolveConfig& config) {
  const int n = static_cast<int>(states->size());
  if (n == 0) throw std::invalid_argument("empty state vector");

  std::vector<char> touched(static_cast<std::size_t>(n), 0);
  for (const Factor* f : factors) {
    for (int s : f->slots()) {
      if (s < 0 || s >= n) throw std::invalid_argument("factor slot out of range");
      touched[static_cast<std::size_t>(s)] = 1;
    }
  }
  for (int s = 0; s < n; ++s) {
    if (!touched[static_cast<std::size_t>(s)]) {
      throw std::invalid_argument("window state has no factor attached");
    }
  }

  for (Factor* f : factors) f->prepare(*states);

  const auto total_cost = [&](const std::vector<RobotState>& x) {
    double c = 0.0;
    for (const Factor* f : factors) c += f->cost(x);
    if (!std::isfinite(c)) throw std::runtime_error("non-finite cost in window solve");
    return c;
  };
  const auto assemble = [&](const std::vector<RobotState>& x) {
    Accumulator acc(n);
    for (const Factor* f : factors) f->accumulate(x, &acc);
    return acc;
  };

  SolverReport rep;
  double cost = total_cost(*states);
  rep.initial_cost = cost;
  double lambda = config.initial_lambda;
  const int dim = n * kStateDim;

  Accumulator acc = assemble(*states);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    rep.gradient_norm = acc.gradient().lpNorm<Eigen::Infinity>();
    if (rep.gradient_norm < config.gradient_tolerance) {
      rep.converged = true;
      break;
    }

    bool stepped = false;
    while (lambda <= config.max_lambda) {
      Eigen::MatrixXd damped = acc.hessian();
      damped.diagonal().array() += lambda;
      const Eigen::VectorXd dx = damped.ldlt().solve(-acc.gradient());

      std::vector<RobotState> candidate(*states);
      for (int s = 0; s < n; ++s) {
        candidate[static_cast<std::size_t>(s)] = retract(
            candidate[static_cast<std::size_t>(s)], dx.segment<kStateDim>(s * kStateDim));
      }
      const double candidate_cost = total_cost(candidate);
      if (candidate_cost <= cost) {
        *states = std::move(candidate);
        cost = candidate_cost;
        rep.accepted_costs.push_back(cost);
        ++rep.iterations;
        lambda = std::max(lambda * config.lambda_decrease, 1e-12);
        stepped = true;
        if (dx.norm() < config.step_tolerance) rep.converged = true;
        break;
      }
      lambda *= config.lambda_increase;
    }
    // No damping value yields an improving step: the cost is locally flat.
    if (!stepped) {
      rep.converged = true;
      break;
    }
    if (rep.converged) break;
    acc = assemble(*states);
  }

  rep.final_cost = cost;
  rep.final_lambda = lambda;
  assert(rep.final_cost <= rep.initial_cost);

  const Accumulator final_acc = assemble(*states);
  rep.gradient_norm = final_acc.gradient().lpNorm<Eigen::Infinity>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(final_acc.hessian());
  rep.min_eigenvalue = es.eigenvalues()(0);
  const double rank_tol = std::max(es.eigenvalues()(dim - 1) * 1e-9, 1e-12);
  rep.null_space_dim =
      static_cast<int>((es.eigenvalues().array() < rank_tol).count());
  for (const Factor* f : factors) {
    rep.cost_by_class[static_cast<std::size_t>(f->factor_class())] += f->cost(*states);
  }
  return rep;
}

std::optional<LinearFactor> marginalize(const std::vector<RobotState>& states,
                                        const std::vector<const Factor*>& factors,
                                        int drop_slot, bool* flagged) {
  if (flagged) *flagged = false;
  if (factors.empty()) return std::nullopt;

  std::set<int> involved;
  for (const Factor* f : factors) involved.insert(f->slots().begin(), f->slots().end());
  if (!involved.count(drop_slot)) {
    throw std::invalid_argument("no factor touches the marginalized slot");
  }
  std::vector<int> remaining(involved.begin(), involved.end());
  remaining.erase(std::find(remaining.begin(), remaining.end(), drop_slot));
  if (remaining.empty()) return std::nullopt;

  Accumulator acc(static_cast<int>(states.size()));
  for (const Factor* f : factors) f->accumulate(states, &acc);

  const int r = static_cast<int>(remaining.size()) * kStateDim;
  const auto seg = [](int slot) { return slot * kStateDim; };
  Eigen::MatrixXd h_mm =
      acc.hessian().block<kStateDim, kStateDim>(seg(drop_slot), seg(drop_slot));
  Eigen::MatrixXd h_mr(kStateDim, r);
  Eigen::MatrixXd h_rr(r, r);
  Eigen::VectorXd b_r(r);
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    const int ri = static_cast<int>(i) * kStateDim;
    h_mr.middleCols<kStateDim>(ri) =
        acc.hessian().block<kStateDim, kStateDim>(seg(drop_slot), seg(remaining[i]));
    b_r.segment<kStateDim>(ri) = acc.gradient().segment<kStateDim>(seg(remaining[i]));
    for (std::size_t j = 0; j < remaining.size(); ++j) {
      h_rr.block<kStateDim, kStateDim>(ri, static_cast<int>(j) * kStateDim) =
          acc.hessian().block<kStateDim, kStateDim>(seg(remaining[i]), seg(remaining[j]));
    }
  }
  const Eigen::VectorXd b_m = acc.gradient().segment<kStateDim>(seg(drop_slot));

  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h_mm);
    const double span = std::max(es.eigenvalues()(kStateDim - 1), 1.0);
    if (es.eigenvalues()(0) < 1e-12 * span) {
      h_mm.diagonal().array() += 1e-8;
      if (flagged) *flagged = true;
    }
  }
  const Eigen::LDLT<Eigen::MatrixXd> chol(h_mm);
  const Eigen::MatrixXd x_mr = chol.solve(h_mr);
  Eigen::MatrixXd h_prior = h_rr - h_mr.transpose() * x_mr;
  h_prior = 0.5 * (h_prior + h_prior.transpose()).eval();
  const Eigen::VectorXd b_prior = b_r - x_mr.transpose() * b_m;

  // Quadratic form back to residual rows: keep the positive eigenpairs.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h_prior);
  const double rank_tol = std::max(es.eigenvalues()(r - 1) * 1e-12, 1e-12);
  std::vector<int> kept;
  for (int i = 0; i < r; ++i) {
    if (es.eigenvalues()(i) > rank_tol) kept.push_back(i);
  }
  if (kept.empty()) return std::nullopt;

  Eigen::MatrixXd jac(static_cast<int>(kept.size()), r);
  Eigen::VectorXd offset(static_cast<int>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const double lambda = es.eigenvalues()(kept[i]);
    const Eigen::VectorXd v = es.eigenvectors().col(kept[i]);
    jac.row(static_cast<Eigen::Index>(i)) = std::sqrt(lambda) * v.transpose();
    offset(static_cast<Eigen::Index>(i)) = v.dot(b_prior) / std::sqrt(lambda);
  }

  std::vector<RobotState> lin;
  lin.reserve(remaining.size());
  for (int slot : remaining) lin.push_back(states[static_cast<std::size_t>(slot)]);
  return LinearFactor(remaining, std::move(lin), std::move(jac), std::move(offset));
}

}  // namespace mlio::graph
