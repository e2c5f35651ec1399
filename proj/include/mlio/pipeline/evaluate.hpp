#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mlio/io/dataset_io.hpp"

namespace mlio::pipeline {

struct Metrics {
  std::size_t matched_pairs = 0;
  double ate_rms = 0.0;  // m
  double x_rms = 0.0;
  double y_rms = 0.0;
  double z_rms = 0.0;
  double heading_rms_deg = 0.0;
  // Final position error over truth path length.
  double end_drift_percent = 0.0;
  double distance_traveled = 0.0;  // m, truth path over the matched span
  // Relative displacement error per equal-distance segment, percent.
  std::vector<double> segment_drift_percent;
  bool aligned = false;
};

// Pairs estimate and truth samples within time_tolerance and computes
// trajectory error statistics. With align set, a single rigid transform
// (no scale) is fitted over all matched positions first; global-frame
// estimates are compared raw. Throws when fewer than two pairs match.
Metrics evaluate_trajectories(const std::vector<io::TrajectoryPoint>& estimate,
                              const std::vector<io::TrajectoryPoint>& truth,
                              double time_tolerance = 0.01, bool align = false);

std::string metrics_to_json(const Metrics& m);

}  // namespace mlio::pipeline
