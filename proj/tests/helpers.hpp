#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>

#include "mlio/core/quat.hpp"
#include "mlio/core/se3.hpp"

namespace testutil {

inline Eigen::Vector3d random_vec(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng), n(rng)};
}

inline mlio::Quat random_quat(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return mlio::Quat(u(rng), u(rng), u(rng), u(rng));
}

inline mlio::SE3 random_pose(std::mt19937_64& rng, double span = 5.0) {
  return {random_quat(rng), random_vec(rng, span)};
}

// Central finite difference of a vector function along coordinate
// directions of an n-dim perturbation applied through `apply`.
inline Eigen::MatrixXd central_diff(
    int out_dim, int in_dim,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    double h = 1e-6) {
  Eigen::MatrixXd j(out_dim, in_dim);
  for (int c = 0; c < in_dim; ++c) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(in_dim);
    d[c] = h;
    const Eigen::VectorXd hi = f(d);
    d[c] = -h;
    const Eigen::VectorXd lo = f(d);
    j.col(c) = (hi - lo) / (2.0 * h);
  }
  return j;
}

// Relative error with an absolute floor, suited to mixed-scale Jacobians.
inline double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      const double denom = std::max({1.0, std::abs(a(i, j)), std::abs(b(i, j))});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
    }
  return worst;
}

}  // namespace testutil
