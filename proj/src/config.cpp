#include "mlio/io/config.hpp"

#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mlio::io {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json vec3_json(const Eigen::Vector3d& v) {
  return ordered_json::array({v.x(), v.y(), v.z()});
}

Eigen::Vector3d vec3_from(const ordered_json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
      !j[2].is_number()) {
    throw std::invalid_argument("config: " + path + " must be a 3-vector");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Rejects keys outside the schema so typos fail loudly instead of
// silently running on defaults.
void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& path) {
  if (!obj.is_object()) {
    throw std::invalid_argument("config: " + path + " must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("config: unknown key " + path + "/" + key);
    }
  }
}

double num(const ordered_json& obj, const char* key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_number()) {
    throw std::invalid_argument("config: " + path + "/" + key + " must be a number");
  }
  return v.get<double>();
}

int integer(const ordered_json& obj, const char* key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw std::invalid_argument("config: " + path + "/" + key + " must be an integer");
  }
  return v.get<int>();
}

bool boolean(const ordered_json& obj, const char* key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_boolean()) {
    throw std::invalid_argument("config: " + path + "/" + key + " must be a boolean");
  }
  return v.get<bool>();
}

ordered_json rig_json(const SensorRig& rig) {
  ordered_json j;
  j["lidars"] = ordered_json::array();
  for (const LidarMount& m : rig.lidars) {
    const Quat& q = m.lidar_to_body.rotation;
    ordered_json entry;
    entry["pose"] = ordered_json::array(
        {q.w(), q.x(), q.y(), q.z(), m.lidar_to_body.translation.x(),
         m.lidar_to_body.translation.y(), m.lidar_to_body.translation.z()});
    entry["mount_height"] = m.mount_height;
    j["lidars"].push_back(entry);
  }
  j["antenna_lever_arm"] = vec3_json(rig.antenna_lever_arm);
  j["encoder_axis"] = vec3_json(rig.encoder_axis);
  j["imu_noise"] = {{"gyro_noise", rig.imu_noise.gyro_noise},
                    {"accel_noise", rig.imu_noise.accel_noise},
                    {"gyro_bias_walk", rig.imu_noise.gyro_bias_walk},
                    {"accel_bias_walk", rig.imu_noise.accel_bias_walk}};
  j["encoder_noise"] = rig.encoder_noise;
  j["encoder_scale_walk"] = rig.encoder_scale_walk;
  j["encoder_scale"] = rig.encoder_scale;
  j["rtk_sigma"] = rig.rtk_sigma;
  j["rtk_reported_sigma"] = vec3_json(rig.rtk_reported_sigma);
  return j;
}

SensorRig rig_from(const ordered_json& j) {
  check_keys(j,
             {"lidars", "antenna_lever_arm", "encoder_axis", "imu_noise",
              "encoder_noise", "encoder_scale_walk", "encoder_scale", "rtk_sigma",
              "rtk_reported_sigma"},
             "rig");
  SensorRig rig;
  const auto& lidars = j.at("lidars");
  if (!lidars.is_array()) {
    throw std::invalid_argument("config: rig/lidars must be an array");
  }
  for (const auto& entry : lidars) {
    check_keys(entry, {"pose", "mount_height"}, "rig/lidars[]");
    const auto& p = entry.at("pose");
    if (!p.is_array() || p.size() != 7) {
      throw std::invalid_argument("config: rig/lidars[]/pose must be 7 numbers");
    }
    LidarMount m;
    m.lidar_to_body.rotation = Quat(p[0].get<double>(), p[1].get<double>(),
                                    p[2].get<double>(), p[3].get<double>());
    m.lidar_to_body.translation =
        Eigen::Vector3d(p[4].get<double>(), p[5].get<double>(), p[6].get<double>());
    m.mount_height = num(entry, "mount_height", "rig/lidars[]");
    rig.lidars.push_back(m);
  }
  rig.antenna_lever_arm = vec3_from(j.at("antenna_lever_arm"), "rig/antenna_lever_arm");
  rig.encoder_axis = vec3_from(j.at("encoder_axis"), "rig/encoder_axis");
  const auto& noise = j.at("imu_noise");
  check_keys(noise, {"gyro_noise", "accel_noise", "gyro_bias_walk", "accel_bias_walk"},
             "rig/imu_noise");
  rig.imu_noise.gyro_noise = num(noise, "gyro_noise", "rig/imu_noise");
  rig.imu_noise.accel_noise = num(noise, "accel_noise", "rig/imu_noise");
  rig.imu_noise.gyro_bias_walk = num(noise, "gyro_bias_walk", "rig/imu_noise");
  rig.imu_noise.accel_bias_walk = num(noise, "accel_bias_walk", "rig/imu_noise");
  rig.encoder_noise = num(j, "encoder_noise", "rig");
  rig.encoder_scale_walk = num(j, "encoder_scale_walk", "rig");
  rig.encoder_scale = num(j, "encoder_scale", "rig");
  rig.rtk_sigma = num(j, "rtk_sigma", "rig");
  rig.rtk_reported_sigma =
      vec3_from(j.at("rtk_reported_sigma"), "rig/rtk_reported_sigma");
  return rig;
}

}  // namespace

Config default_config() {
  Config c;
  // Two roof LiDARs looking fore and aft; heights match a van-scale rig.
  for (int i = 0; i < 2; ++i) {
    LidarMount m;
    m.lidar_to_body = SE3(Quat::from_yaw(i * M_PI), Eigen::Vector3d(0.0, 0.0, 1.8));
    m.mount_height = 1.8;
    c.rig.lidars.push_back(m);
  }
  c.rig.antenna_lever_arm = Eigen::Vector3d(-0.1, 0.0, 1.2);
  c.rig.imu_noise = {0.005, 0.05, 1e-5, 1e-4};
  c.rig.encoder_noise = 1e-3;
  c.rig.encoder_scale_walk = 1e-6;
  c.rig.rtk_sigma = 0.05;
  return c;
}

std::string config_to_json(const Config& c) {
  ordered_json j;
  j["rig"] = rig_json(c.rig);
  j["keyframe"] = {{"distance", c.keyframe.distance},
                   {"rotation_deg", c.keyframe.rotation_deg}};
  j["preprocess"] = {
      {"min_range", c.min_range},
      {"features",
       {{"neighborhood", c.features.neighborhood},
        {"edge_threshold", c.features.edge_threshold},
        {"planar_threshold", c.features.planar_threshold},
        {"range_jump", c.features.range_jump},
        {"grazing_ratio", c.features.grazing_ratio},
        {"intensity_gradient", c.features.intensity_gradient},
        {"max_edges", c.features.max_edges},
        {"max_planars", c.features.max_planars},
        {"azimuth_bins", c.features.azimuth_bins}}},
      // The geometric anchor (sensor height and origin) comes from the
      // dataset calibration at runtime, not from here.
      {"ground",
       {{"height_tolerance", c.ground.height_tolerance},
        {"ransac_iterations", c.ground.ransac_iterations},
        {"inlier_distance", c.ground.inlier_distance},
        {"seed", c.ground.seed},
        {"min_candidates", c.ground.min_candidates}}}};
  j["registration"] = {
      {"correspondence",
       {{"radius", c.registration.correspondence.radius},
        {"min_separation", c.registration.correspondence.min_separation},
        {"min_triangle_area", c.registration.correspondence.min_triangle_area},
        {"min_total", c.registration.correspondence.min_total}}},
      {"max_iterations", c.registration.max_iterations},
      {"huber_delta", c.registration.huber_delta},
      {"sigma", c.registration.sigma},
      {"min_eigenvalue", c.registration.min_eigenvalue},
      {"step_tolerance", c.registration.step_tolerance}};
  j["verify"] = {{"translation_threshold", c.verify.translation_threshold},
                 {"rotation_threshold_deg", c.verify.rotation_threshold_deg}};
  j["window"] = {{"capacity", c.window.capacity},
                 {"solver",
                  {{"max_iterations", c.window.solver.max_iterations},
                   {"gradient_tolerance", c.window.solver.gradient_tolerance},
                   {"step_tolerance", c.window.solver.step_tolerance},
                   {"initial_lambda", c.window.solver.initial_lambda},
                   {"lambda_increase", c.window.solver.lambda_increase},
                   {"lambda_decrease", c.window.solver.lambda_decrease},
                   {"max_lambda", c.window.solver.max_lambda}}},
                 {"lidar_sigma", c.window.lidar_sigma},
                 {"huber_delta", c.window.huber_delta},
                 {"ground_normal_sigma", c.window.ground_normal_sigma},
                 {"ground_offset_sigma", c.window.ground_offset_sigma},
                 {"anchor",
                  {{"rotation_sigma", c.window.anchor_rotation_sigma},
                   {"position_sigma", c.window.anchor_position_sigma},
                   {"velocity_sigma", c.window.anchor_velocity_sigma},
                   {"accel_bias_sigma", c.window.anchor_accel_bias_sigma},
                   {"gyro_bias_sigma", c.window.anchor_gyro_bias_sigma},
                   {"scale_sigma", c.window.anchor_scale_sigma}}}};
  j["rtk"] = {{"fix_sigma", c.rtk.fix_sigma},
              {"float_sigma", c.rtk.float_sigma},
              {"time_penalty", c.rtk.time_penalty},
              {"match_window", c.rtk.match_window}};
  j["ablation"] = {{"use_rtk", c.ablation.use_rtk},
                   {"use_encoder", c.ablation.use_encoder},
                   {"use_ground", c.ablation.use_ground},
                   {"lidar_subset", c.ablation.lidar_subset}};
  return j.dump(2) + "\n";
}

Config config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
  }
  try {
    check_keys(j,
               {"rig", "keyframe", "preprocess", "registration", "verify", "window",
                "rtk", "ablation"},
               "");
    Config c;
    c.rig = rig_from(j.at("rig"));

    const auto& kf = j.at("keyframe");
    check_keys(kf, {"distance", "rotation_deg"}, "keyframe");
    c.keyframe.distance = num(kf, "distance", "keyframe");
    c.keyframe.rotation_deg = num(kf, "rotation_deg", "keyframe");

    const auto& prep = j.at("preprocess");
    check_keys(prep, {"min_range", "features", "ground"}, "preprocess");
    c.min_range = num(prep, "min_range", "preprocess");
    const auto& feat = prep.at("features");
    check_keys(feat,
               {"neighborhood", "edge_threshold", "planar_threshold", "range_jump",
                "grazing_ratio", "intensity_gradient", "max_edges", "max_planars",
                "azimuth_bins"},
               "preprocess/features");
    c.features.neighborhood = integer(feat, "neighborhood", "preprocess/features");
    c.features.edge_threshold = num(feat, "edge_threshold", "preprocess/features");
    c.features.planar_threshold = num(feat, "planar_threshold", "preprocess/features");
    c.features.range_jump = num(feat, "range_jump", "preprocess/features");
    c.features.grazing_ratio = num(feat, "grazing_ratio", "preprocess/features");
    c.features.intensity_gradient =
        num(feat, "intensity_gradient", "preprocess/features");
    c.features.max_edges = integer(feat, "max_edges", "preprocess/features");
    c.features.max_planars = integer(feat, "max_planars", "preprocess/features");
    c.features.azimuth_bins = integer(feat, "azimuth_bins", "preprocess/features");
    const auto& ground = prep.at("ground");
    check_keys(ground,
               {"height_tolerance", "ransac_iterations", "inlier_distance", "seed",
                "min_candidates"},
               "preprocess/ground");
    c.ground.height_tolerance = num(ground, "height_tolerance", "preprocess/ground");
    c.ground.ransac_iterations =
        integer(ground, "ransac_iterations", "preprocess/ground");
    c.ground.inlier_distance = num(ground, "inlier_distance", "preprocess/ground");
    c.ground.seed =
        static_cast<std::uint64_t>(integer(ground, "seed", "preprocess/ground"));
    c.ground.min_candidates = static_cast<std::size_t>(
        integer(ground, "min_candidates", "preprocess/ground"));

    const auto& reg = j.at("registration");
    check_keys(reg,
               {"correspondence", "max_iterations", "huber_delta", "sigma",
                "min_eigenvalue", "step_tolerance"},
               "registration");
    const auto& corr = reg.at("correspondence");
    check_keys(corr, {"radius", "min_separation", "min_triangle_area", "min_total"},
               "registration/correspondence");
    c.registration.correspondence.radius =
        num(corr, "radius", "registration/correspondence");
    c.registration.correspondence.min_separation =
        num(corr, "min_separation", "registration/correspondence");
    c.registration.correspondence.min_triangle_area =
        num(corr, "min_triangle_area", "registration/correspondence");
    c.registration.correspondence.min_total = static_cast<std::size_t>(
        integer(corr, "min_total", "registration/correspondence"));
    c.registration.max_iterations = integer(reg, "max_iterations", "registration");
    c.registration.huber_delta = num(reg, "huber_delta", "registration");
    c.registration.sigma = num(reg, "sigma", "registration");
    c.registration.min_eigenvalue = num(reg, "min_eigenvalue", "registration");
    c.registration.step_tolerance = num(reg, "step_tolerance", "registration");

    const auto& ver = j.at("verify");
    check_keys(ver, {"translation_threshold", "rotation_threshold_deg"}, "verify");
    c.verify.translation_threshold = num(ver, "translation_threshold", "verify");
    c.verify.rotation_threshold_deg = num(ver, "rotation_threshold_deg", "verify");

    const auto& win = j.at("window");
    check_keys(win,
               {"capacity", "solver", "lidar_sigma", "huber_delta",
                "ground_normal_sigma", "ground_offset_sigma", "anchor"},
               "window");
    c.window.capacity = integer(win, "capacity", "window");
    const auto& sol = win.at("solver");
    check_keys(sol,
               {"max_iterations", "gradient_tolerance", "step_tolerance",
                "initial_lambda", "lambda_increase", "lambda_decrease", "max_lambda"},
               "window/solver");
    c.window.solver.max_iterations = integer(sol, "max_iterations", "window/solver");
    c.window.solver.gradient_tolerance =
        num(sol, "gradient_tolerance", "window/solver");
    c.window.solver.step_tolerance = num(sol, "step_tolerance", "window/solver");
    c.window.solver.initial_lambda = num(sol, "initial_lambda", "window/solver");
    c.window.solver.lambda_increase = num(sol, "lambda_increase", "window/solver");
    c.window.solver.lambda_decrease = num(sol, "lambda_decrease", "window/solver");
    c.window.solver.max_lambda = num(sol, "max_lambda", "window/solver");
    c.window.lidar_sigma = num(win, "lidar_sigma", "window");
    c.window.huber_delta = num(win, "huber_delta", "window");
    c.window.ground_normal_sigma = num(win, "ground_normal_sigma", "window");
    c.window.ground_offset_sigma = num(win, "ground_offset_sigma", "window");
    const auto& anchor = win.at("anchor");
    check_keys(anchor,
               {"rotation_sigma", "position_sigma", "velocity_sigma",
                "accel_bias_sigma", "gyro_bias_sigma", "scale_sigma"},
               "window/anchor");
    c.window.anchor_rotation_sigma = num(anchor, "rotation_sigma", "window/anchor");
    c.window.anchor_position_sigma = num(anchor, "position_sigma", "window/anchor");
    c.window.anchor_velocity_sigma = num(anchor, "velocity_sigma", "window/anchor");
    c.window.anchor_accel_bias_sigma =
        num(anchor, "accel_bias_sigma", "window/anchor");
    c.window.anchor_gyro_bias_sigma = num(anchor, "gyro_bias_sigma", "window/anchor");
    c.window.anchor_scale_sigma = num(anchor, "scale_sigma", "window/anchor");

    const auto& rtk = j.at("rtk");
    check_keys(rtk, {"fix_sigma", "float_sigma", "time_penalty", "match_window"},
               "rtk");
    c.rtk.fix_sigma = num(rtk, "fix_sigma", "rtk");
    c.rtk.float_sigma = num(rtk, "float_sigma", "rtk");
    c.rtk.time_penalty = num(rtk, "time_penalty", "rtk");
    c.rtk.match_window = num(rtk, "match_window", "rtk");

    const auto& abl = j.at("ablation");
    check_keys(abl, {"use_rtk", "use_encoder", "use_ground", "lidar_subset"},
               "ablation");
    c.ablation.use_rtk = boolean(abl, "use_rtk", "ablation");
    c.ablation.use_encoder = boolean(abl, "use_encoder", "ablation");
    c.ablation.use_ground = boolean(abl, "use_ground", "ablation");
    const auto& subset = abl.at("lidar_subset");
    if (!subset.is_array()) {
      throw std::invalid_argument("config: ablation/lidar_subset must be an array");
    }
    c.ablation.lidar_subset.clear();
    for (const auto& v : subset) {
      if (!v.is_number_integer()) {
        throw std::invalid_argument(
            "config: ablation/lidar_subset entries must be integers");
      }
      c.ablation.lidar_subset.push_back(v.get<int>());
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

Config load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(std::move(buf).str());
}

void print_config(std::ostream& out, const Config& config) {
  out << config_to_json(config);
}

}  // namespace mlio::io
