#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "mlio/core/types.hpp"
#include "mlio/factors/lidar_factors.hpp"
#include "mlio/graph/sliding_window.hpp"
#include "mlio/prep/preprocess.hpp"

namespace mlio::io {

struct AblationFlags {
  bool use_rtk = true;
  bool use_encoder = true;
  bool use_ground = true;
  // Empty keeps every LiDAR in the dataset.
  std::vector<int> lidar_subset;
};

struct RtkConfig {
  double fix_sigma = 0.05;    // m, status 2
  double float_sigma = 0.5;   // m, status 1
  // Sigma inflation per second of offset between fix and keyframe stamps.
  double time_penalty = 0.5;
  // Fixes farther than this from the keyframe stamp are not attached.
  double match_window = 0.6;  // s
};

// Every tunable of the estimation pipeline. The sensor rig itself lives
// in the dataset's calibration file, except when simulating, where the
// rig section below is the generator input.
struct Config {
  SensorRig rig;
  graph::KeyframeThresholds keyframe;
  double min_range = 3.0;
  prep::FeatureParams features;
  prep::GroundParams ground;
  factors::RegistrationParams registration;
  factors::VerifyParams verify;
  graph::WindowConfig window;
  RtkConfig rtk;
  AblationFlags ablation;
};

Config default_config();

// Serialization is total: every field appears in the JSON and parsing
// rejects unknown keys and type mismatches with the offending path, so a
// stale or misspelled config never passes silently.
std::string config_to_json(const Config& config);
Config config_from_json(const std::string& text);
Config load_config(const std::filesystem::path& file);
void print_config(std::ostream& out, const Config& config);

}  // namespace mlio::io
