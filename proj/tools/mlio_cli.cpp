// Command-line front end: sim writes synthetic datasets, run replays one
// through the estimator, eval scores a trajectory against ground truth.
#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlio/io/config.hpp"
#include "mlio/io/dataset_io.hpp"
#include "mlio/pipeline/evaluate.hpp"
#include "mlio/pipeline/pipeline.hpp"

namespace {

using namespace mlio;

// Failures exit nonzero with a one-line JSON error on stderr so callers
// can branch on the category without parsing prose.
[[noreturn]] void fail(const char* category, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = {{"category", category}, {"message", message}};
  std::cerr << j.dump() << "\n";
  std::exit(code);
}

sim::TrajectoryKind trajectory_kind(const std::string& name) {
  if (name == "stationary") return sim::TrajectoryKind::stationary;
  if (name == "straight") return sim::TrajectoryKind::straight;
  if (name == "circle") return sim::TrajectoryKind::circle;
  if (name == "figure-eight") return sim::TrajectoryKind::figure_eight;
  throw CLI::ValidationError("--trajectory", "unknown trajectory '" + name + "'");
}

std::pair<double, double> outage_span(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw CLI::ValidationError("--rtk-outage", "expected START:END seconds");
  }
  try {
    const double a = std::stod(text.substr(0, colon));
    const double b = std::stod(text.substr(colon + 1));
    if (!(b > a) || a < 0.0) throw std::invalid_argument("span");
    return {a, b};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--rtk-outage", "bad span '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-LiDAR inertial odometry: simulate, run, evaluate"};
  app.require_subcommand(0, 1);

  std::string config_file;
  app.add_option("--config", config_file, "JSON config file (defaults embedded)");
  bool dump_config = false;
  app.add_flag("--print-config", dump_config,
               "print the effective config as JSON and exit");

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "write a synthetic dataset");
  std::string sim_out, world_name = "feature", traj_name = "figure-eight";
  pipeline::SimOptions sopt;
  double sim_duration = 60.0, sim_speed = 5.0, sim_ramp = 5.0;
  double sim_radius_x = 40.0, sim_radius_y = 20.0;
  std::vector<std::string> outage_args;
  sim_cmd->add_option("--out", sim_out, "output dataset directory")->required();
  sim_cmd->add_option("--world", world_name, "feature or corridor");
  sim_cmd->add_option("--trajectory", traj_name,
                      "stationary, straight, circle or figure-eight");
  sim_cmd->add_option("--duration", sim_duration, "trajectory length, s");
  sim_cmd->add_option("--speed", sim_speed, "cruise speed, m/s");
  sim_cmd->add_option("--ramp", sim_ramp, "speed-up time from rest, s");
  sim_cmd->add_option("--radius-x", sim_radius_x, "path half-length, m");
  sim_cmd->add_option("--radius-y", sim_radius_y, "path half-width, m");
  sim_cmd->add_option("--extent", sopt.world.extent, "feature world half-size, m");
  sim_cmd->add_option("--poles", sopt.world.pole_count, "feature world pole count");
  sim_cmd->add_option("--corridor-length", sopt.world.corridor_length, "m");
  sim_cmd->add_option("--corridor-width", sopt.world.corridor_width, "m");
  sim_cmd->add_option("--imu-rate", sopt.imu_rate, "Hz");
  sim_cmd->add_option("--encoder-rate", sopt.encoder_rate, "Hz");
  sim_cmd->add_option("--rtk-rate", sopt.rtk_rate, "Hz");
  sim_cmd->add_option("--rtk-outage", outage_args,
                      "fix dropout window START:END seconds, repeatable");
  sim_cmd->add_option("--sweep-points", sopt.pattern.points_per_sweep,
                      "points per LiDAR sweep");
  sim_cmd->add_option("--range-sigma", sopt.pattern.range_sigma,
                      "LiDAR range noise, m");
  sim_cmd->add_option("--seed", sopt.seed, "master random seed");

  // run
  auto* run_cmd = app.add_subcommand("run", "replay a dataset through the estimator");
  std::string run_dataset, run_out;
  bool no_rtk = false, no_encoder = false, no_ground = false;
  std::vector<int> lidar_subset;
  run_cmd->add_option("--dataset", run_dataset, "dataset directory")->required();
  run_cmd->add_option("--out", run_out, "output directory")->required();
  run_cmd->add_flag("--no-rtk", no_rtk, "drop the RTK stream");
  run_cmd->add_flag("--no-encoder", no_encoder, "drop the wheel encoder");
  run_cmd->add_flag("--no-ground", no_ground, "disable the ground constraint");
  run_cmd->add_option("--lidars", lidar_subset, "comma-separated LiDAR ids to keep")
      ->delimiter(',');

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a trajectory against truth");
  std::string eval_estimate, eval_truth;
  double eval_tolerance = 0.01;
  bool eval_align = false;
  eval_cmd->add_option("--estimate", eval_estimate, "estimated trajectory, TUM")
      ->required();
  eval_cmd->add_option("--truth", eval_truth, "ground-truth trajectory, TUM")
      ->required();
  eval_cmd->add_option("--tolerance", eval_tolerance, "timestamp match window, s");
  eval_cmd->add_flag("--align", eval_align,
                     "rigidly align before scoring (local-frame runs)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::ostringstream msg;
    msg << e.what();
    fail("usage", msg.str(), 2);
  }

  try {
    io::Config config = config_file.empty() ? io::default_config()
                                            : io::load_config(config_file);
    if (dump_config && !run_cmd->parsed() && !sim_cmd->parsed() &&
        !eval_cmd->parsed()) {
      io::print_config(std::cout, config);
      return 0;
    }

    if (sim_cmd->parsed()) {
      sopt.config = config;
      sopt.trajectory.kind = trajectory_kind(traj_name);
      sopt.trajectory.duration = sim_duration;
      sopt.trajectory.speed = sim_speed;
      sopt.trajectory.ramp_time = sim_ramp;
      sopt.trajectory.radius_x = sim_radius_x;
      sopt.trajectory.radius_y = sim_radius_y;
      if (world_name == "feature") {
        sopt.world.kind = pipeline::WorldSpec::Kind::feature;
      } else if (world_name == "corridor") {
        sopt.world.kind = pipeline::WorldSpec::Kind::corridor;
      } else {
        throw CLI::ValidationError("--world", "unknown world '" + world_name + "'");
      }
      for (const std::string& text : outage_args) {
        sopt.rtk_outages.push_back(outage_span(text));
      }
      if (dump_config) {
        io::print_config(std::cout, sopt.config);
        return 0;
      }
      pipeline::cmd_sim(sopt, sim_out);
      std::cout << "dataset written to " << sim_out << "\n";
      return 0;
    }

    if (run_cmd->parsed()) {
      if (no_rtk) config.ablation.use_rtk = false;
      if (no_encoder) config.ablation.use_encoder = false;
      if (no_ground) config.ablation.use_ground = false;
      if (!lidar_subset.empty()) config.ablation.lidar_subset = lidar_subset;
      if (dump_config) {
        io::print_config(std::cout, config);
        return 0;
      }
      const pipeline::RunSummary s =
          pipeline::cmd_run(config, run_dataset, run_out, std::cerr);
      std::printf(
          "run complete: %zu fused scans, %zu keyframes, %zu registrations, "
          "mean %.1f ms/scan\n",
          s.fused_scans, s.keyframes, s.registrations, s.mean_scan_ms);
      if (s.degeneracy_flagged) {
        std::printf("degeneracy flagged: %zu degenerate registrations, "
                    "%zu damped marginalizations\n",
                    s.degenerate_registrations, s.marginalization_flags);
      }
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto estimate = io::read_tum(eval_estimate);
      const auto truth = io::read_tum(eval_truth);
      const pipeline::Metrics m =
          pipeline::evaluate_trajectories(estimate, truth, eval_tolerance, eval_align);
      std::cout << pipeline::metrics_to_json(m) << "\n";
      return 0;
    }

    if (dump_config) {
      io::print_config(std::cout, config);
      return 0;
    }
    fail("usage", "expected a subcommand: sim, run or eval", 2);
  } catch (const CLI::ValidationError& e) {
    fail("usage", e.what(), 2);
  } catch (const std::invalid_argument& e) {
    fail("config", e.what(), 3);
  } catch (const std::system_error& e) {
    fail("io", e.what(), 4);
  } catch (const std::runtime_error& e) {
    fail("io", e.what(), 4);
  } catch (const std::exception& e) {
    fail("internal", e.what(), 5);
  }
  return 0;
}
