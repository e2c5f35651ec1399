#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "mlio/io/config.hpp"
#include "mlio/sim/sensors.hpp"
#include "mlio/sim/trajectory.hpp"
#include "mlio/sim/world.hpp"

namespace mlio::pipeline {

struct WorldSpec {
  enum class Kind { feature, corridor } kind = Kind::feature;
  // Feature world: square footprint half-size, boundary walls, poles.
  double extent = 120.0;
  double wall_height = 3.0;
  int pole_count = 40;
  uint64_t seed = 5;
  // Corridor: ground plus two parallel walls only.
  double corridor_length = 700.0;
  double corridor_width = 10.0;
};

struct SimOptions {
  io::Config config;
  sim::TrajectorySpec trajectory;
  WorldSpec world;
  sim::LidarPattern pattern;
  double imu_rate = 200.0;
  double encoder_rate = 100.0;
  double rtk_rate = 1.0;
  // Outage windows in seconds; fixes within report status none.
  std::vector<std::pair<double, double>> rtk_outages;
  uint64_t seed = 1;
};

// Simulates every stream along the trajectory and writes the dataset
// directory plus ground_truth.tum. Fully seeded, byte-deterministic.
void cmd_sim(const SimOptions& options, const std::filesystem::path& out_dir);

struct RunSummary {
  std::size_t fused_scans = 0;
  std::size_t keyframes = 0;
  std::size_t registrations = 0;
  std::size_t degenerate_registrations = 0;
  std::size_t reseeded_registrations = 0;
  std::size_t prediction_fallbacks = 0;
  std::size_t rtk_attached = 0;
  std::size_t ground_factors = 0;
  std::size_t marginalization_flags = 0;
  // Accepted-step cost increases across every window solve; stays zero.
  std::size_t monotonicity_violations = 0;
  std::size_t constant_velocity_deskews = 0;
  double mean_solver_iterations = 0.0;
  double mean_scan_ms = 0.0;
  double max_scan_ms = 0.0;
  double total_seconds = 0.0;
  // Any degenerate registration or damped marginalization occurred; the
  // run is suspect even though it completed.
  bool degeneracy_flagged = false;
};

// Replays a dataset through preprocessing, registration and the sliding
// window, then writes trajectory.tum, map.ply and report.json into
// out_dir. Warnings and degeneracy events go to log.
RunSummary cmd_run(const io::Config& config, const std::filesystem::path& dataset_dir,
                   const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace mlio::pipeline
