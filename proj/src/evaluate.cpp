#include "mlio/pipeline/evaluate.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

namespace mlio::pipeline {

namespace {

// Heading of the body x axis in the world plane.
double yaw_of(const Quat& q) {
  const Eigen::Vector3d fwd = q * Eigen::Vector3d::UnitX();
  return std::atan2(fwd.y(), fwd.x());
}

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace

Metrics evaluate_trajectories(const std::vector<io::TrajectoryPoint>& estimate,
                              const std::vector<io::TrajectoryPoint>& truth,
                              double time_tolerance, bool align) {
  // Nearest-in-time pairing over two sorted streams.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t j = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const Timestamp t = estimate[i].t;
    while (j + 1 < truth.size() &&
           std::abs((truth[j + 1].t - t).to_sec()) <= std::abs((truth[j].t - t).to_sec())) {
      ++j;
    }
    if (j < truth.size() && std::abs((truth[j].t - t).to_sec()) <= time_tolerance) {
      pairs.emplace_back(i, j);
    }
  }
  if (pairs.size() < 2) {
    throw std::runtime_error("evaluation: fewer than two timestamp-matched pairs");
  }

  std::vector<Eigen::Vector3d> est_p(pairs.size()), tru_p(pairs.size());
  std::vector<Quat> est_q(pairs.size()), tru_q(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    est_p[k] = estimate[pairs[k].first].pose.translation;
    est_q[k] = estimate[pairs[k].first].pose.rotation;
    tru_p[k] = truth[pairs[k].second].pose.translation;
    tru_q[k] = truth[pairs[k].second].pose.rotation;
  }

  Metrics m;
  m.matched_pairs = pairs.size();
  m.aligned = align;
  if (align) {
    Eigen::Matrix3Xd src(3, static_cast<Eigen::Index>(pairs.size()));
    Eigen::Matrix3Xd dst(3, static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      src.col(static_cast<Eigen::Index>(k)) = est_p[k];
      dst.col(static_cast<Eigen::Index>(k)) = tru_p[k];
    }
    const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
    const Eigen::Matrix3d r = t.topLeftCorner<3, 3>();
    const Eigen::Vector3d p = t.topRightCorner<3, 1>();
    const Quat rq = Quat::from_matrix(r);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      est_p[k] = r * est_p[k] + p;
      est_q[k] = rq * est_q[k];
    }
  }

  double sq_sum = 0.0, x_sum = 0.0, y_sum = 0.0, z_sum = 0.0, yaw_sum = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Eigen::Vector3d e = est_p[k] - tru_p[k];
    sq_sum += e.squaredNorm();
    x_sum += e.x() * e.x();
    y_sum += e.y() * e.y();
    z_sum += e.z() * e.z();
    const double dyaw = wrap_angle(yaw_of(est_q[k]) - yaw_of(tru_q[k]));
    yaw_sum += dyaw * dyaw;
  }
  const double n = static_cast<double>(pairs.size());
  m.ate_rms = std::sqrt(sq_sum / n);
  m.x_rms = std::sqrt(x_sum / n);
  m.y_rms = std::sqrt(y_sum / n);
  m.z_rms = std::sqrt(z_sum / n);
  m.heading_rms_deg = std::sqrt(yaw_sum / n) * 180.0 / M_PI;

  // Truth path length over the matched span drives the drift ratios.
  std::vector<double> dist(pairs.size(), 0.0);
  for (std::size_t k = 1; k < pairs.size(); ++k) {
    dist[k] = dist[k - 1] + (tru_p[k] - tru_p[k - 1]).norm();
  }
  m.distance_traveled = dist.back();
  if (m.distance_traveled > 0.0) {
    m.end_drift_percent =
        (est_p.back() - tru_p.back()).norm() / m.distance_traveled * 100.0;

    // Equal-distance segments; relative displacement error per segment.
    const int segments = 8;
    std::size_t a = 0;
    for (int s = 0; s < segments; ++s) {
      const double target = m.distance_traveled * (s + 1) / segments;
      std::size_t b = a;
      while (b + 1 < pairs.size() && dist[b] < target) ++b;
      const double length = dist[b] - dist[a];
      if (length > 1e-9) {
        const Eigen::Vector3d est_d = est_p[b] - est_p[a];
        const Eigen::Vector3d tru_d = tru_p[b] - tru_p[a];
        m.segment_drift_percent.push_back((est_d - tru_d).norm() / length * 100.0);
      }
      a = b;
    }
  }
  return m;
}

std::string metrics_to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["matched_pairs"] = m.matched_pairs;
  j["ate_rms_m"] = m.ate_rms;
  j["x_rms_m"] = m.x_rms;
  j["y_rms_m"] = m.y_rms;
  j["z_rms_m"] = m.z_rms;
  j["heading_rms_deg"] = m.heading_rms_deg;
  j["end_drift_percent"] = m.end_drift_percent;
  j["distance_traveled_m"] = m.distance_traveled;
  j["segment_drift_percent"] = m.segment_drift_percent;
  j["aligned"] = m.aligned;
  return j.dump(2) + "\n";
}

}  // namespace mlio::pipeline
