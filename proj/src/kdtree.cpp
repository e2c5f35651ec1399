#include "mlio/factors/kdtree.hpp"

#include <algorithm>
#include <cmath>

namespace mlio::factors {

KdTree3::KdTree3(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
  if (points_.empty()) return;
  std::vector<int> idx(points_.size());
  for (size_t i = 0; i < points_.size(); ++i) idx[i] = static_cast<int>(i);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(points_.size()), 0);
}

int KdTree3::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](int a, int b) {
                     const double va = points_[static_cast<size_t>(a)](axis);
                     const double vb = points_[static_cast<size_t>(b)](axis);
                     return va != vb ? va < vb : a < b;
                   });
  const int node_id = static_cast<int>(nodes_.size());
  nodes_.push_back({idx[static_cast<size_t>(mid)], axis, -1, -1});
  const int left = build(idx, lo, mid, depth + 1);
  const int right = build(idx, mid + 1, hi, depth + 1);
  nodes_[static_cast<size_t>(node_id)].left = left;
  nodes_[static_cast<size_t>(node_id)].right = right;
  return node_id;
}

namespace {

struct Candidate {
  double dist2;
  int index;
  bool operator<(const Candidate& o) const {
    return dist2 != o.dist2 ? dist2 < o.dist2 : index < o.index;
  }
};

}  // namespace

std::vector<int> KdTree3::knn(const Eigen::Vector3d& query, int k, double radius) const {
  std::vector<int> out;
  if (root_ < 0 || k <= 0) return out;
  const double radius2 = radius * radius;

  std::vector<Candidate> best;
  auto bound2 = [&]() {
    return best.size() < static_cast<size_t>(k) ? radius2
                                                : std::min(radius2, best.back().dist2);
  };
  auto offer = [&](int point_index) {
    const double d2 = (points_[static_cast<size_t>(point_index)] - query).squaredNorm();
    if (d2 > bound2()) return;
    Candidate c{d2, point_index};
    auto pos = std::lower_bound(best.begin(), best.end(), c);
    if (best.size() == static_cast<size_t>(k)) {
      if (pos == best.end()) return;
      best.pop_back();
      pos = std::lower_bound(best.begin(), best.end(), c);
    }
    best.insert(pos, c);
  };

  // Iterative depth-first descent with pruning on the splitting distance.
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    const int node_id = stack.back();
    stack.pop_back();
    if (node_id < 0) continue;
    const Node& node = nodes_[static_cast<size_t>(node_id)];
    offer(node.point);
    const double split = query(node.axis) - points_[static_cast<size_t>(node.point)](node.axis);
    const int near = split <= 0 ? node.left : node.right;
    const int far = split <= 0 ? node.right : node.left;
    if (split * split <= bound2()) stack.push_back(far);
    stack.push_back(near);
  }

  out.reserve(best.size());
  for (const auto& c : best) out.push_back(c.index);
  return out;
}

}  // namespace mlio::factors
