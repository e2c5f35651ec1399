#include "mlio/prep/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mlio/core/quat.hpp"

namespace mlio::prep {
namespace {

Duration median_step(const std::vector<ImuSample>& samples) {
  std::vector<int64_t> diffs;
  diffs.reserve(samples.size());
  for (size_t i = 1; i < samples.size(); ++i) {
    diffs.push_back((samples[i].t - samples[i - 1].t).nanos());
  }
  if (diffs.empty()) return Duration::from_nanos(0);
  auto mid = diffs.begin() + static_cast<ptrdiff_t>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  return Duration::from_nanos(*mid);
}

Timestamp midpoint(Timestamp a, Timestamp b) {
  return a + Duration::from_nanos((b - a).nanos() / 2);
}

// Linear interpolation of the gyro stream, clamped at both ends.
Eigen::Vector3d gyro_at(const std::vector<ImuSample>& samples, Timestamp t) {
  if (t <= samples.front().t) return samples.front().gyro;
  if (t >= samples.back().t) return samples.back().gyro;
  auto hi = std::upper_bound(samples.begin(), samples.end(), t,
                             [](Timestamp q, const ImuSample& s) { return q < s.t; });
  auto lo = hi - 1;
  const double dt = (hi->t - lo->t).to_sec();
  if (dt <= 0) return lo->gyro;
  const double u = (t - lo->t).to_sec() / dt;
  return lo->gyro + u * (hi->gyro - lo->gyro);
}

// Cumulative traveled arc from encoder increments, piecewise linear in
// time and flat outside the sampled span.
class ArcCurve {
 public:
  ArcCurve(const std::vector<EncoderSample>& enc, double scale) {
    if (enc.empty()) return;
    Duration step = Duration::from_sec(0.1);
    if (enc.size() >= 2) {
      std::vector<int64_t> diffs;
      for (size_t i = 1; i < enc.size(); ++i) diffs.push_back((enc[i].t - enc[i - 1].t).nanos());
      auto mid = diffs.begin() + static_cast<ptrdiff_t>(diffs.size() / 2);
      std::nth_element(diffs.begin(), mid, diffs.end());
      step = Duration::from_nanos(*mid);
    }
    // Each increment covers the interval ending at its stamp; the first
    // interval start is reconstructed from the typical step.
    knots_.push_back(enc.front().t - step);
    values_.push_back(0.0);
    double cum = 0.0;
    for (const auto& s : enc) {
      cum += scale * s.increment;
      knots_.push_back(s.t);
      values_.push_back(cum);
    }
  }

  bool empty() const { return knots_.empty(); }

  double at(Timestamp t) const {
    if (empty()) return 0.0;
    if (t <= knots_.front()) return values_.front();
    if (t >= knots_.back()) return values_.back();
    auto hi = std::upper_bound(knots_.begin(), knots_.end(), t);
    const size_t k = static_cast<size_t>(hi - knots_.begin());
    const double dt = (knots_[k] - knots_[k - 1]).to_sec();
    if (dt <= 0) return values_[k - 1];
    const double u = (t - knots_[k - 1]).to_sec() / dt;
    return values_[k - 1] + u * (values_[k] - values_[k - 1]);
  }

 private:
  std::vector<Timestamp> knots_;
  std::vector<double> values_;
};

struct PoseTable {
  std::vector<Timestamp> t;
  std::vector<Quat> q;
  std::vector<Eigen::Vector3d> p;

  // Relative body pose at time s in the frame of the first node.
  SE3 interpolate(Timestamp s) const {
    if (s <= t.front()) return {q.front(), p.front()};
    if (s >= t.back()) return {q.back(), p.back()};
    auto hi = std::upper_bound(t.begin(), t.end(), s);
    const size_t k = static_cast<size_t>(hi - t.begin());
    const double dt = (t[k] - t[k - 1]).to_sec();
    const double u = dt > 0 ? (s - t[k - 1]).to_sec() / dt : 0.0;
    return {slerp(q[k - 1], q[k], u), p[k - 1] + u * (p[k] - p[k - 1])};
  }
};

}  // namespace

Sweep range_filter(Sweep sweep, double min_range) {
  std::erase_if(sweep.points, [min_range](const LidarPoint& pt) {
    return pt.position.norm() < min_range;
  });
  return sweep;
}

DeskewResult deskew(const Sweep& sweep,
                    const std::vector<ImuSample>& compensation,
                    const std::vector<EncoderSample>& encoder,
                    const preint::RobotState& prior,
                    const SE3& lidar_to_body) {
  DeskewResult out;
  out.sweep = sweep;
  if (sweep.points.empty()) return out;

  const Timestamp t0 = sweep.t_start;
  Timestamp t_last = t0;
  for (const auto& pt : sweep.points) t_last = std::max(t_last, pt.t);

  const Eigen::Vector3d v_body = prior.attitude.inverse() * prior.velocity;
  const SE3 body_to_lidar = lidar_to_body.inverse();

  const Duration step = median_step(compensation);
  const bool covered = compensation.size() >= 2 && step.nanos() > 0 &&
                       compensation.front().t <= t0 + step &&
                       compensation.back().t + step >= t_last;

  if (!covered) {
    out.constant_velocity_fallback = true;
    for (auto& pt : out.sweep.points) {
      const SE3 rel_b{Quat::identity(), v_body * (pt.t - t0).to_sec()};
      pt.position = (body_to_lidar * rel_b * lidar_to_body) * pt.position;
    }
    return out;
  }

  ArcCurve arc(encoder, prior.encoder_scale);

  PoseTable table;
  table.t.push_back(t0);
  for (const auto& s : compensation) {
    if (s.t > table.t.back()) table.t.push_back(s.t);
  }
  if (table.t.back() < t_last) table.t.push_back(t_last);

  table.q.push_back(Quat::identity());
  table.p.push_back(Eigen::Vector3d::Zero());
  for (size_t i = 1; i < table.t.size(); ++i) {
    const Timestamp ta = table.t[i - 1];
    const Timestamp tb = table.t[i];
    const double dt = (tb - ta).to_sec();
    const Eigen::Vector3d w = gyro_at(compensation, midpoint(ta, tb)) - prior.gyro_bias;
    const Quat q_mid = table.q.back() * Quat::exp(0.5 * dt * w);
    Eigen::Vector3d dp;
    if (arc.empty()) {
      dp = (q_mid * v_body) * dt;
    } else {
      dp = (arc.at(tb) - arc.at(ta)) * (q_mid * Eigen::Vector3d::UnitX());
    }
    table.q.push_back(table.q.back() * Quat::exp(dt * w));
    table.p.push_back(table.p.back() + dp);
  }

  for (auto& pt : out.sweep.points) {
    const SE3 rel_b = table.interpolate(pt.t);
    pt.position = (body_to_lidar * rel_b * lidar_to_body) * pt.position;
  }
  return out;
}

Sweep to_body_frame(Sweep sweep, const SE3& lidar_to_body) {
  for (auto& pt : sweep.points) pt.position = lidar_to_body * pt.position;
  return sweep;
}

GroundSplit segment_ground(const Sweep& sweep, const GroundParams& params) {
  GroundSplit split;
  split.ground.lidar_id = split.nonground.lidar_id = sweep.lidar_id;
  split.ground.t_start = split.nonground.t_start = sweep.t_start;
  split.ground.t_end = split.nonground.t_end = sweep.t_end;

  const double predicted_z = params.sensor_origin.z() - params.sensor_height;
  std::vector<int> candidates;
  std::vector<Eigen::Vector3d> candidate_pts;
  for (size_t i = 0; i < sweep.points.size(); ++i) {
    const Eigen::Vector3d& p = sweep.points[i].position;
    const bool downward = p.z() < params.sensor_origin.z();
    if (downward && std::abs(p.z() - predicted_z) <= params.height_tolerance) {
      candidates.push_back(static_cast<int>(i));
      candidate_pts.push_back(p);
    }
  }

  std::vector<char> is_ground(sweep.points.size(), 0);
  if (candidates.size() >= params.min_candidates) {
    auto fit = fit_plane_ransac(candidate_pts, params.ransac_iterations,
                                params.inlier_distance, params.seed);
    if (fit) {
      split.plane = fit->plane;
      for (int k : fit->inliers) {
        is_ground[static_cast<size_t>(candidates[static_cast<size_t>(k)])] = 1;
      }
    }
  }

  for (size_t i = 0; i < sweep.points.size(); ++i) {
    (is_ground[i] ? split.ground : split.nonground).points.push_back(sweep.points[i]);
  }
  return split;
}

std::vector<double> scan_curvature(const std::vector<LidarPoint>& pts, int neighborhood) {
  const size_t n = pts.size();
  const int h = neighborhood / 2;
  std::vector<double> c(n, std::numeric_limits<double>::quiet_NaN());
  if (h < 1 || n < static_cast<size_t>(2 * h + 1)) return c;

  std::vector<Eigen::Vector3d> prefix(n + 1, Eigen::Vector3d::Zero());
  for (size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + pts[i].position;

  for (size_t i = static_cast<size_t>(h); i + static_cast<size_t>(h) < n; ++i) {
    const Eigen::Vector3d window =
        prefix[i + static_cast<size_t>(h) + 1] - prefix[i - static_cast<size_t>(h)];
    const Eigen::Vector3d sum = window - static_cast<double>(2 * h + 1) * pts[i].position;
    const double range = pts[i].position.norm();
    if (range > 1e-9) c[i] = sum.norm() / (2.0 * h * range);
  }
  return c;
}

namespace {

// Per-azimuth-bin cap then a global cap, ranked by curvature key.
// keep_high selects the largest keys (edges), otherwise the smallest.
std::vector<LidarPoint> select_capped(const std::vector<LidarPoint>& pts,
                                      const std::vector<int>& candidates,
                                      const std::vector<double>& key,
                                      int max_total, int bins, bool keep_high) {
  auto better = [&](int a, int b) {
    const double ka = key[static_cast<size_t>(a)];
    const double kb = key[static_cast<size_t>(b)];
    if (ka != kb) return keep_high ? ka > kb : ka < kb;
    return a < b;
  };

  std::vector<std::vector<int>> by_bin(static_cast<size_t>(bins));
  for (int i : candidates) {
    const Eigen::Vector3d& p = pts[static_cast<size_t>(i)].position;
    const double az = std::atan2(p.y(), p.x());
    int b = static_cast<int>((az + M_PI) / (2.0 * M_PI) * bins);
    b = std::clamp(b, 0, bins - 1);
    by_bin[static_cast<size_t>(b)].push_back(i);
  }

  const int per_bin = std::max(1, max_total / bins);
  std::vector<int> kept;
  for (auto& bin : by_bin) {
    std::sort(bin.begin(), bin.end(), better);
    if (static_cast<int>(bin.size()) > per_bin) bin.resize(static_cast<size_t>(per_bin));
    kept.insert(kept.end(), bin.begin(), bin.end());
  }
  std::sort(kept.begin(), kept.end(), better);
  if (static_cast<int>(kept.size()) > max_total) kept.resize(static_cast<size_t>(max_total));
  // Back to scan order so downstream consumers see time-sorted points.
  std::sort(kept.begin(), kept.end());

  std::vector<LidarPoint> out;
  out.reserve(kept.size());
  for (int i : kept) out.push_back(pts[static_cast<size_t>(i)]);
  return out;
}

// Largest timestamp gap still counting as adjacent rays, three times the
// list's median step so ordinary jitter passes and dropped rays do not.
int64_t neighbor_gap_ns(const std::vector<Timestamp>& times) {
  if (times.size() < 2) return 0;
  std::vector<int64_t> steps;
  steps.reserve(times.size() - 1);
  for (size_t i = 1; i < times.size(); ++i) {
    steps.push_back(std::abs((times[i] - times[i - 1]).nanos()));
  }
  const auto mid = steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2);
  std::nth_element(steps.begin(), mid, steps.end());
  return 3 * std::max<int64_t>(*mid, 1);
}

}  // namespace

sync::FeatureCloud extract_features(const GroundSplit& split, const FeatureParams& params) {
  sync::FeatureCloud cloud;
  cloud.lidar_id = split.nonground.lidar_id;
  cloud.t_start = split.nonground.t_start;
  cloud.t_end = split.nonground.t_end;

  const auto& ng = split.nonground.points;
  const auto& g = split.ground.points;
  const std::vector<double> c_ng = scan_curvature(ng, params.neighborhood);
  const std::vector<double> c_g = scan_curvature(g, params.neighborhood);

  // Discontinuities are judged against the nearest rays in time over the
  // whole sweep, ground included. A silhouette against the floor is a real
  // depth jump even though the floor lives in the other list, while a
  // wall meeting the floor has continuous range and stays unselected.
  const size_t total = ng.size() + g.size();
  std::vector<Timestamp> m_t(total);
  std::vector<Eigen::Vector3d> m_pos(total);
  std::vector<double> m_range(total);
  std::vector<double> m_intensity(total);
  std::vector<size_t> ng_pos(ng.size());
  {
    size_t a = 0;
    size_t b = 0;
    size_t k = 0;
    while (a < ng.size() || b < g.size()) {
      const bool take_ng = b == g.size() || (a < ng.size() && ng[a].t <= g[b].t);
      const LidarPoint& p = take_ng ? ng[a] : g[b];
      m_t[k] = p.t;
      m_pos[k] = p.position;
      m_range[k] = p.position.norm();
      m_intensity[k] = p.intensity;
      if (take_ng) {
        ng_pos[a++] = k;
      } else {
        ++b;
      }
      ++k;
    }
  }
  const int64_t gap_ns = neighbor_gap_ns(m_t);
  const auto contiguous = [&](size_t i, size_t j) {
    return std::abs((m_t[i] - m_t[j]).nanos()) <= gap_ns;
  };

  // A silhouette border is a few rays wide, so the depth jump may sit a
  // couple of time-contiguous steps away. Reflectance boundaries are
  // sharp and only the immediately adjacent pair counts for promotion.
  const auto depth_jump_near = [&](size_t k) {
    const double r0 = m_range[k];
    size_t j = k;
    for (int s = 0; s < 3 && j > 0 && contiguous(j, j - 1); ++s) {
      --j;
      if (std::abs(m_range[j] - r0) > params.range_jump) return true;
    }
    j = k;
    for (int s = 0; s < 3 && j + 1 < total && contiguous(j, j + 1); ++s) {
      ++j;
      if (std::abs(m_range[j] - r0) > params.range_jump) return true;
    }
    return false;
  };

  // Incidence proxy from the continuation side of the surface, the
  // contiguous neighbor with the smaller range step. Near 1 the point
  // displacement runs along the beam and the surface is beam-parallel.
  const auto grazing = [&](size_t k) {
    double best_dr = std::numeric_limits<double>::infinity();
    double ratio = 0.0;
    for (const size_t j : {k == 0 ? k : k - 1, k + 1 >= total ? k : k + 1}) {
      if (j == k || !contiguous(k, j)) continue;
      const double dr = std::abs(m_range[j] - m_range[k]);
      if (dr >= best_dr) continue;
      best_dr = dr;
      const double dp = (m_pos[j] - m_pos[k]).norm();
      ratio = dp > 0.0 ? dr / dp : 0.0;
    }
    return ratio > params.grazing_ratio;
  };

  std::vector<int> edge_candidates;
  for (size_t i = 0; i < ng.size(); ++i) {
    if (std::isnan(c_ng[i])) continue;
    const size_t k = ng_pos[i];
    bool intensity_jump = false;
    if (k > 0 && contiguous(k, k - 1)) {
      intensity_jump |=
          std::abs(m_intensity[k] - m_intensity[k - 1]) > params.intensity_gradient;
    }
    if (k + 1 < total && contiguous(k, k + 1)) {
      intensity_jump |=
          std::abs(m_intensity[k] - m_intensity[k + 1]) > params.intensity_gradient;
    }
    const bool pick =
        (c_ng[i] > params.edge_threshold && depth_jump_near(k) && !grazing(k)) ||
        intensity_jump;
    if (pick) edge_candidates.push_back(static_cast<int>(i));
  }
  cloud.edges = select_capped(ng, edge_candidates, c_ng, params.max_edges,
                              params.azimuth_bins, true);

  std::vector<int> planar_candidates;
  for (size_t i = 0; i < g.size(); ++i) {
    if (!std::isnan(c_g[i]) && c_g[i] < params.planar_threshold) {
      planar_candidates.push_back(static_cast<int>(i));
    }
  }
  cloud.planars = select_capped(g, planar_candidates, c_g, params.max_planars,
                                params.azimuth_bins, false);

  cloud.ground = g;
  return cloud;
}

}  // namespace mlio::prep
