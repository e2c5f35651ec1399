#pragma once

#include <Eigen/Core>
#include <limits>
#include <vector>

namespace mlio::factors {

// Exact 3D nearest-neighbor index. Queries must return the true k-nearest
// sets so geometric tests against a linear scan are meaningful.
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(std::vector<Eigen::Vector3d> points);

  // Indices of the k nearest points within radius, sorted by ascending
  // distance; ties broken by index.
  std::vector<int> knn(const Eigen::Vector3d& query, int k,
                       double radius = std::numeric_limits<double>::infinity()) const;

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Eigen::Vector3d& point(int i) const { return points_[static_cast<size_t>(i)]; }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<int>& idx, int lo, int hi, int depth);

  std::vector<Eigen::Vector3d> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace mlio::factors
