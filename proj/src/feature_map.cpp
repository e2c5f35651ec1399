#include "mlio/factors/feature_map.hpp"

namespace mlio::factors {

void LocalFeatureMap::insert(int keyframe_id, std::vector<Eigen::Vector3d> edges,
                             std::vector<Eigen::Vector3d> planars) {
  auto& frame = frames_[keyframe_id];
  frame.edges = std::move(edges);
  frame.planars = std::move(planars);
  rebuild();
}

void LocalFeatureMap::expire_before(int oldest_kept) {
  const size_t before = frames_.size();
  frames_.erase(frames_.begin(), frames_.lower_bound(oldest_kept));
  if (frames_.size() != before) rebuild();
}

void LocalFeatureMap::rebuild() {
  std::vector<Eigen::Vector3d> edges;
  std::vector<Eigen::Vector3d> planars;
  for (const auto& [id, frame] : frames_) {
    edges.insert(edges.end(), frame.edges.begin(), frame.edges.end());
    planars.insert(planars.end(), frame.planars.begin(), frame.planars.end());
  }
  edge_tree_ = KdTree3(std::move(edges));
  planar_tree_ = KdTree3(std::move(planars));
}

namespace {

std::vector<Eigen::Vector3d> gather(const KdTree3& tree, const Eigen::Vector3d& query,
                                    int k, double radius) {
  std::vector<Eigen::Vector3d> out;
  for (int i : tree.knn(query, k, radius)) out.push_back(tree.point(i));
  return out;
}

}  // namespace

std::vector<Eigen::Vector3d> LocalFeatureMap::nearest_edges(const Eigen::Vector3d& query,
                                                            int k, double radius) const {
  return gather(edge_tree_, query, k, radius);
}

std::vector<Eigen::Vector3d> LocalFeatureMap::nearest_planars(const Eigen::Vector3d& query,
                                                              int k, double radius) const {
  return gather(planar_tree_, query, k, radius);
}

}  // namespace mlio::factors
