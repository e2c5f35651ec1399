#pragma once

#include <Eigen/Core>
#include <map>
#include <vector>

#include "mlio/factors/kdtree.hpp"

namespace mlio::factors {

// World-frame edge and planar points from the recent keyframes, indexed
// for exact nearest-neighbor queries. Insertions and expiries rebuild the
// index; queries are read-only and safe to run concurrently.
class LocalFeatureMap {
 public:
  void insert(int keyframe_id, std::vector<Eigen::Vector3d> edges,
              std::vector<Eigen::Vector3d> planars);

  // Drops every keyframe with id < oldest_kept.
  void expire_before(int oldest_kept);

  bool empty() const { return edge_count() == 0 && planar_count() == 0; }
  std::size_t edge_count() const { return edge_tree_.size(); }
  std::size_t planar_count() const { return planar_tree_.size(); }
  std::size_t keyframe_count() const { return frames_.size(); }

  // k nearest within radius, closest first.
  std::vector<Eigen::Vector3d> nearest_edges(const Eigen::Vector3d& query, int k,
                                             double radius) const;
  std::vector<Eigen::Vector3d> nearest_planars(const Eigen::Vector3d& query, int k,
                                               double radius) const;

 private:
  struct FramePoints {
    std::vector<Eigen::Vector3d> edges;
    std::vector<Eigen::Vector3d> planars;
  };

  void rebuild();

  std::map<int, FramePoints> frames_;
  KdTree3 edge_tree_;
  KdTree3 planar_tree_;
};

}  // namespace mlio::factors
