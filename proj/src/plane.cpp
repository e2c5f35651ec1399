#include "mlio/core/plane.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

namespace mlio {

void PlaneModel::normalize() {
  const double n = normal.norm();
  if (n > 0) {
    normal /= n;
    offset /= n;
  }
  if (normal.z() < 0 || (normal.z() == 0 && (normal.y() < 0 || (normal.y() == 0 && normal.x() < 0)))) {
    normal = -normal;
    offset = -offset;
  }
}

PlaneModel transform_plane(const PlaneModel& m, const SE3& t_b_a) {
  PlaneModel out;
  out.normal = t_b_a.rotation * m.normal;
  out.offset = m.offset - out.normal.dot(t_b_a.translation);
  out.normalize();
  return out;
}

std::optional<PlaneModel> fit_plane_lsq(const std::vector<Eigen::Vector3d>& pts,
                                        const std::vector<int>& subset) {
  if (subset.size() < 3) return std::nullopt;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (int i : subset) centroid += pts[static_cast<size_t>(i)];
  centroid /= static_cast<double>(subset.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (int i : subset) {
    const Eigen::Vector3d q = pts[static_cast<size_t>(i)] - centroid;
    scatter += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  // Collinear subsets leave two near-zero eigenvalues and no usable normal.
  if (eig.eigenvalues()(1) <= 1e-12 * std::max(1.0, eig.eigenvalues()(2))) return std::nullopt;
  PlaneModel m;
  m.normal = eig.eigenvectors().col(0);
  m.offset = -m.normal.dot(centroid);
  m.normalize();
  return m;
}

std::optional<PlaneFit> fit_plane_ransac(const std::vector<Eigen::Vector3d>& pts,
                                         int iterations, double inlier_dist,
                                         uint64_t seed, size_t min_points) {
  const size_t n = pts.size();
  if (n < min_points || n < 3) return std::nullopt;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, n - 1);

  PlaneModel best;
  size_t best_count = 0;
  for (int it = 0; it < iterations; ++it) {
    const size_t a = pick(rng);
    const size_t b = pick(rng);
    const size_t c = pick(rng);
    if (a == b || a == c || b == c) continue;
    const Eigen::Vector3d normal =
        (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    if (normal.norm() < 1e-12) continue;
    PlaneModel m;
    m.normal = normal;
    m.offset = -normal.dot(pts[a]);
    m.normalize();
    size_t count = 0;
    for (const auto& p : pts) {
      if (std::abs(m.distance(p)) <= inlier_dist) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = m;
    }
  }
  if (best_count < min_points) return std::nullopt;

  PlaneFit fit;
  fit.inliers.reserve(best_count);
  for (size_t i = 0; i < n; ++i) {
    if (std::abs(best.distance(pts[i])) <= inlier_dist) fit.inliers.push_back(static_cast<int>(i));
  }
  // Polish on the consensus set, then re-gate inliers against the refined
  // plane so the reported set matches the reported model.
  if (auto polished = fit_plane_lsq(pts, fit.inliers)) {
    fit.plane = *polished;
    fit.inliers.clear();
    for (size_t i = 0; i < n; ++i) {
      if (std::abs(fit.plane.distance(pts[i])) <= inlier_dist) {
        fit.inliers.push_back(static_cast<int>(i));
      }
    }
  } else {
    fit.plane = best;
  }
  return fit;
}

}  // namespace mlio
