#include "mlio/sync/sync.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

namespace mlio::sync {

ImuPartition partition_imu(const std::vector<ImuSample>& stream, Timestamp t_prev_k,
                           Timestamp t_k, Timestamp t_prime_k) {
  if (!(t_prev_k < t_k) || !(t_k <= t_prime_k))
    throw std::invalid_argument("imu partition boundaries out of order");

  const auto lo = std::lower_bound(
      stream.begin(), stream.end(), t_prev_k,
      [](const ImuSample& s, const Timestamp& t) { return s.t < t; });
  const auto mid = std::lower_bound(
      lo, stream.end(), t_k,
      [](const ImuSample& s, const Timestamp& t) { return s.t < t; });
  const auto hi = std::lower_bound(
      mid, stream.end(), t_prime_k,
      [](const ImuSample& s, const Timestamp& t) { return s.t < t; });

  ImuPartition part;
  part.preint.assign(lo, mid);
  part.compensation.assign(mid, hi);
  part.stream_gap = part.preint.empty();
  return part;
}

SweepMerger::SweepMerger(int lidar_count, std::ostream* log)
    : lidar_count_(lidar_count),
      log_(log ? log : &std::cerr),
      last_merged_window_(std::max(lidar_count, 1), -1),
      dropout_flagged_(std::max(lidar_count, 1), false) {}

void SweepMerger::add_secondary(FeatureCloud cloud) {
  if (cloud.lidar_id < 0 || cloud.lidar_id >= lidar_count_)
    throw std::out_of_range("secondary cloud from unknown lidar");
  pending_.push_back(std::move(cloud));
}

FusedScan SweepMerger::merge_sweeps(const FeatureCloud& primary, Timestamp t_k,
                                    Timestamp t_k1) {
  if (!(t_k < t_k1)) throw std::invalid_argument("degenerate sweep window");

  FusedScan fused;
  fused.window.k = window_index_;
  fused.window.t_k = t_k;
  fused.window.t_k1 = t_k1;
  fused.window.t_prime_k = t_k;

  auto absorb = [&fused](const FeatureCloud& c) {
    fused.edges.insert(fused.edges.end(), c.edges.begin(), c.edges.end());
    fused.planars.insert(fused.planars.end(), c.planars.begin(), c.planars.end());
    fused.ground.insert(fused.ground.end(), c.ground.begin(), c.ground.end());
    for (const auto* list : {&c.edges, &c.planars, &c.ground})
      for (const auto& p : *list)
        if (fused.window.t_prime_k < p.t) fused.window.t_prime_k = p.t;
  };
  absorb(primary);
  last_merged_window_[primary.lidar_id] = window_index_;

  // Whole sweeps are assigned by start time; anything older than the
  // current window missed its slot and is attached here instead of lost.
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->t_start < t_k1) {
      absorb(*it);
      last_merged_window_[it->lidar_id] = window_index_;
      dropout_flagged_[it->lidar_id] = false;
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }

  for (int id = 0; id < lidar_count_; ++id) {
    if (id == primary.lidar_id || last_merged_window_[id] < 0) continue;
    const int64_t silent = window_index_ - last_merged_window_[id];
    if (silent > 3 && !dropout_flagged_[id]) {
      (*log_) << "warning: lidar " << id << " silent for " << silent
              << " windows (possible dropout)\n";
      dropout_flagged_[id] = true;
    }
  }

  ++window_index_;
  return fused;
}

}  // namespace mlio::sync
