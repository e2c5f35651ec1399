#include "mlio/sim/world.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>

namespace mlio::sim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Parametric hit distance of ray o + r*d against a bounded rectangle.
double hit_rect(const RectPlane& rect, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  const Eigen::Vector3d n = rect.edge_u.cross(rect.edge_v);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-12) return kInf;
  const double r = n.dot(rect.origin - o) / denom;
  if (r <= 1e-6) return kInf;
  const Eigen::Vector3d q = o + r * d - rect.origin;
  const double uu = rect.edge_u.squaredNorm();
  const double vv = rect.edge_v.squaredNorm();
  const double cu = q.dot(rect.edge_u) / uu;
  const double cv = q.dot(rect.edge_v) / vv;
  if (cu < 0.0 || cu > 1.0 || cv < 0.0 || cv > 1.0) return kInf;
  return r;
}

double hit_pole(const Pole& pole, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  // 2D circle intersection in the xy plane, then the z clip.
  const double ox = o.x() - pole.center.x();
  const double oy = o.y() - pole.center.y();
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a < 1e-12) return kInf;
  const double b = 2.0 * (ox * d.x() + oy * d.y());
  const double c = ox * ox + oy * oy - pole.radius * pole.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  for (double r : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (r <= 1e-6) continue;
    const double z = o.z() + r * d.z();
    if (z >= pole.z_min && z <= pole.z_max) return r;
  }
  return kInf;
}

double hit_box(const DynamicBox& box, double t, const Eigen::Vector3d& o,
               const Eigen::Vector3d& d) {
  const Eigen::Vector3d c = box.center_at(t);
  double t_near = -kInf, t_far = kInf;
  for (int ax = 0; ax < 3; ++ax) {
    const double lo = c[ax] - box.half_extent[ax];
    const double hi = c[ax] + box.half_extent[ax];
    if (std::abs(d[ax]) < 1e-12) {
      if (o[ax] < lo || o[ax] > hi) return kInf;
      continue;
    }
    double t0 = (lo - o[ax]) / d[ax];
    double t1 = (hi - o[ax]) / d[ax];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_far <= 1e-6) return kInf;
  return (t_near > 1e-6) ? t_near : t_far;
}

double point_rect_distance(const RectPlane& rect, const Eigen::Vector3d& p) {
  const Eigen::Vector3d q = p - rect.origin;
  const double cu = std::clamp(q.dot(rect.edge_u) / rect.edge_u.squaredNorm(), 0.0, 1.0);
  const double cv = std::clamp(q.dot(rect.edge_v) / rect.edge_v.squaredNorm(), 0.0, 1.0);
  return (rect.origin + cu * rect.edge_u + cv * rect.edge_v - p).norm();
}

double point_pole_distance(const Pole& pole, const Eigen::Vector3d& p) {
  const double radial =
      std::hypot(p.x() - pole.center.x(), p.y() - pole.center.y()) - pole.radius;
  const double dz = std::max({pole.z_min - p.z(), p.z() - pole.z_max, 0.0});
  return std::hypot(std::abs(radial), dz);
}

// Distance to the box surface; the two terms are mutually exclusive.
double point_box_distance(const DynamicBox& box, double t, const Eigen::Vector3d& p) {
  const Eigen::Vector3d q = (p - box.center_at(t)).cwiseAbs() - box.half_extent;
  const Eigen::Vector3d outside = q.cwiseMax(0.0);
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside.norm() + std::abs(inside);
}

uint64_t splitmix64(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double unit_double(uint64_t& s) {
  return (splitmix64(s) >> 11) * 0x1.0p-53;
}

}  // namespace

std::optional<RayHit> WorldModel::raycast(const Eigen::Vector3d& origin,
                                          const Eigen::Vector3d& dir, double t,
                                          double max_range) const {
  double best = max_range;
  double refl = 0.0;
  bool found = false;
  for (const RectPlane& rect : planes) {
    const double r = hit_rect(rect, origin, dir);
    if (r < best) { best = r; refl = rect.reflectivity; found = true; }
  }
  for (const Pole& pole : poles) {
    const double r = hit_pole(pole, origin, dir);
    if (r < best) { best = r; refl = pole.reflectivity; found = true; }
  }
  for (const DynamicBox& box : boxes) {
    const double r = hit_box(box, t, origin, dir);
    if (r < best) { best = r; refl = box.reflectivity; found = true; }
  }
  if (!found) return std::nullopt;
  return RayHit{best, origin + best * dir, refl};
}

double WorldModel::surface_distance(const Eigen::Vector3d& p, double t) const {
  double best = kInf;
  for (const RectPlane& rect : planes) best = std::min(best, point_rect_distance(rect, p));
  for (const Pole& pole : poles) best = std::min(best, point_pole_distance(pole, p));
  for (const DynamicBox& box : boxes) best = std::min(best, point_box_distance(box, t, p));
  return best;
}

WorldModel make_feature_world(double extent, double wall_height, int pole_count,
                              uint64_t seed) {
  WorldModel w;
  const double e = extent;
  w.planes.push_back({{-e, -e, 0}, {2 * e, 0, 0}, {0, 2 * e, 0}, 0.3});  // ground
  w.planes.push_back({{-e, -e, 0}, {2 * e, 0, 0}, {0, 0, wall_height}, 0.5});
  w.planes.push_back({{-e, e, 0}, {2 * e, 0, 0}, {0, 0, wall_height}, 0.5});
  w.planes.push_back({{-e, -e, 0}, {0, 2 * e, 0}, {0, 0, wall_height}, 0.5});
  w.planes.push_back({{e, -e, 0}, {0, 2 * e, 0}, {0, 0, wall_height}, 0.5});

  uint64_t s = seed;
  for (int i = 0; i < pole_count; ++i) {
    Pole p;
    p.center = {(-0.9 + 1.8 * unit_double(s)) * e, (-0.9 + 1.8 * unit_double(s)) * e};
    p.z_min = 0.0;
    p.z_max = 4.0 + 2.0 * unit_double(s);
    p.radius = 0.12 + 0.08 * unit_double(s);
    p.reflectivity = 0.7 + 0.25 * unit_double(s);
    w.poles.push_back(p);
  }
  return w;
}

WorldModel make_corridor_world(double length, double width, double wall_height) {
  WorldModel w;
  const double half_w = 0.5 * width;
  const double margin = 20.0;
  w.planes.push_back(
      {{-margin, -half_w, 0}, {length + 2 * margin, 0, 0}, {0, width, 0}, 0.3});
  w.planes.push_back(
      {{-margin, -half_w, 0}, {length + 2 * margin, 0, 0}, {0, 0, wall_height}, 0.5});
  w.planes.push_back(
      {{-margin, half_w, 0}, {length + 2 * margin, 0, 0}, {0, 0, wall_height}, 0.5});
  return w;
}

}  // namespace mlio::sim
