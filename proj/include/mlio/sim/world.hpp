#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

namespace mlio::sim {

// Bounded rectangle: origin corner plus two spanning edges.
struct RectPlane {
  Eigen::Vector3d origin{0, 0, 0};
  Eigen::Vector3d edge_u{1, 0, 0};
  Eigen::Vector3d edge_v{0, 1, 0};
  double reflectivity = 0.5;
};

// Vertical cylinder segment (lamp post analogue).
struct Pole {
  Eigen::Vector2d center{0, 0};
  double z_min = 0.0;
  double z_max = 5.0;
  double radius = 0.15;
  double reflectivity = 0.8;
};

// Axis-aligned cuboid translating at constant velocity; position is a
// pure function of time.
struct DynamicBox {
  Eigen::Vector3d center{0, 0, 0};  // at t = 0
  Eigen::Vector3d half_extent{1, 1, 1};
  Eigen::Vector3d velocity{0, 0, 0};
  double reflectivity = 0.6;

  Eigen::Vector3d center_at(double t) const { return center + velocity * t; }
};

struct RayHit {
  double range = 0.0;
  Eigen::Vector3d point{0, 0, 0};  // world
  double reflectivity = 0.0;
};

struct WorldModel {
  std::vector<RectPlane> planes;
  std::vector<Pole> poles;
  std::vector<DynamicBox> boxes;

  // Nearest primitive along the ray; dynamic boxes are frozen at time t.
  std::optional<RayHit> raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                double t, double max_range) const;

  // Distance from a point to the nearest primitive surface at time t.
  // Back-projection checks use this as the membership oracle.
  double surface_distance(const Eigen::Vector3d& p, double t) const;
};

// Ground rectangle, four boundary walls and scattered poles; the staple
// feature-rich scene. extent is the half-size of the square footprint.
WorldModel make_feature_world(double extent, double wall_height, int pole_count,
                              uint64_t seed);

// Ground plus two parallel walls and nothing else; along-corridor
// translation is unobservable from geometry alone.
WorldModel make_corridor_world(double length, double width, double wall_height);

}  // namespace mlio::sim
