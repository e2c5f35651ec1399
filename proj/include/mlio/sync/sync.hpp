#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <vector>

#include "mlio/core/types.hpp"

namespace mlio::sync {

// One primary-LiDAR period [t_k, t_k1); t_prime_k is the time of the last
// merged point once the fused scan is assembled.
struct SweepWindow {
  int64_t k = 0;
  Timestamp t_k;
  Timestamp t_k1;
  Timestamp t_prime_k;
};

// Feature points of one sweep, already expressed in the body frame so the
// merge is a plain concatenation.
struct FeatureCloud {
  int lidar_id = 0;
  Timestamp t_start;
  Timestamp t_end;
  std::vector<LidarPoint> edges;
  std::vector<LidarPoint> planars;
  std::vector<LidarPoint> ground;
};

// Multi-LiDAR features merged under the primary timestamp.
struct FusedScan {
  SweepWindow window;
  std::vector<LidarPoint> edges;
  std::vector<LidarPoint> planars;
  std::vector<LidarPoint> ground;

  Timestamp timestamp() const { return window.t_k; }
};

struct ImuPartition {
  std::vector<ImuSample> preint;        // [t_prev_k, t_k)
  std::vector<ImuSample> compensation;  // [t_k, t_prime_k)
  bool stream_gap = false;              // no samples available to propagate
};

// Splits a sorted IMU stream at sweep boundaries with exact integer-time
// half-open comparisons.
ImuPartition partition_imu(const std::vector<ImuSample>& stream, Timestamp t_prev_k,
                           Timestamp t_k, Timestamp t_prime_k);

// Window-ordered merge point. Secondary clouds are buffered until the
// window covering their start time is processed; clouds arriving after
// their window closed are attached to the current window rather than
// dropped. A secondary silent for more than 3 windows logs a dropout
// warning and the pipeline carries on.
class SweepMerger {
 public:
  explicit SweepMerger(int lidar_count, std::ostream* log = nullptr);

  void add_secondary(FeatureCloud cloud);

  // Consumes buffered secondaries for [t_k, t_k1) and fills t_prime_k.
  FusedScan merge_sweeps(const FeatureCloud& primary, Timestamp t_k, Timestamp t_k1);

  size_t pending_count() const { return pending_.size(); }

 private:
  int lidar_count_;
  std::ostream* log_;
  int64_t window_index_ = 0;
  std::deque<FeatureCloud> pending_;
  std::vector<int64_t> last_merged_window_;  // per lidar, -1 before first
  std::vector<bool> dropout_flagged_;
};

}  // namespace mlio::sync
