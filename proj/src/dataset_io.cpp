#include "mlio/io/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace mlio::io {

namespace {

using ordered_json = nlohmann::ordered_json;

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  return out;
}

std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

// %.17g survives a parse round trip for every finite double.
int put_double(char* dst, double v) { return std::snprintf(dst, 32, "%.17g", v); }

[[noreturn]] void parse_fail(const std::filesystem::path& file, std::size_t line) {
  throw std::runtime_error("malformed row in " + file.string() + " at line " +
                           std::to_string(line));
}

// Comma/space tokenizer over one line; from_chars keeps parsed doubles
// bit-exact with the written text.
class FieldReader {
 public:
  FieldReader(const char* begin, const char* end) : cur_(begin), end_(end) {}

  bool next_double(double* out) {
    skip_sep();
    const auto res = std::from_chars(cur_, end_, *out);
    if (res.ec != std::errc{}) return false;
    cur_ = res.ptr;
    return true;
  }

  bool next_int(int64_t* out) {
    skip_sep();
    const auto res = std::from_chars(cur_, end_, *out);
    if (res.ec != std::errc{}) return false;
    cur_ = res.ptr;
    return true;
  }

  bool exhausted() {
    skip_sep();
    return cur_ == end_;
  }

 private:
  void skip_sep() {
    while (cur_ != end_ && (*cur_ == ',' || *cur_ == ' ' || *cur_ == '\t')) ++cur_;
  }

  const char* cur_;
  const char* end_;
};

// Calls row(FieldReader&, line_number) for every nonempty line.
template <typename Row>
void for_each_line(const std::filesystem::path& file, const Row& row) {
  const std::string text = slurp(file);
  const char* p = text.data();
  const char* end = p + text.size();
  std::size_t line = 0;
  while (p < end) {
    const char* eol = std::find(p, end, '\n');
    ++line;
    if (eol != p) {
      FieldReader fields(p, eol);
      row(fields, line);
    }
    p = eol + 1;
  }
}

bool read_stamp(FieldReader& f, Timestamp* t) {
  int64_t sec = 0, nsec = 0;
  if (!f.next_int(&sec) || !f.next_int(&nsec)) return false;
  if (nsec < 0 || nsec >= 1000000000) return false;
  *t = Timestamp(sec, static_cast<uint32_t>(nsec));
  return true;
}

int put_stamp(char* dst, Timestamp t) {
  return std::snprintf(dst, 32, "%lld,%u", static_cast<long long>(t.sec()), t.nsec());
}

ordered_json vec3_json(const Eigen::Vector3d& v) {
  return ordered_json::array({v.x(), v.y(), v.z()});
}

Eigen::Vector3d vec3_from(const ordered_json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) {
    throw std::runtime_error("calib field " + what + " is not a 3-vector");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void write_imu_csv(const std::filesystem::path& file, const std::vector<ImuSample>& s) {
  std::ofstream out = open_out(file);
  char buf[256];
  for (const ImuSample& m : s) {
    int n = put_stamp(buf, m.t);
    for (int i = 0; i < 3; ++i) {
      buf[n++] = ',';
      n += put_double(buf + n, m.gyro(i));
    }
    for (int i = 0; i < 3; ++i) {
      buf[n++] = ',';
      n += put_double(buf + n, m.accel(i));
    }
    buf[n++] = '\n';
    out.write(buf, n);
  }
}

std::vector<ImuSample> read_imu_csv(const std::filesystem::path& file) {
  std::vector<ImuSample> out;
  for_each_line(file, [&](FieldReader& f, std::size_t line) {
    ImuSample m;
    if (!read_stamp(f, &m.t)) parse_fail(file, line);
    for (int i = 0; i < 3; ++i) {
      if (!f.next_double(&m.gyro(i))) parse_fail(file, line);
    }
    for (int i = 0; i < 3; ++i) {
      if (!f.next_double(&m.accel(i))) parse_fail(file, line);
    }
    if (!f.exhausted()) parse_fail(file, line);
    out.push_back(m);
  });
  return out;
}

void write_encoder_csv(const std::filesystem::path& file,
                       const std::vector<EncoderSample>& s) {
  std::ofstream out = open_out(file);
  char buf[128];
  for (const EncoderSample& m : s) {
    int n = put_stamp(buf, m.t);
    buf[n++] = ',';
    n += put_double(buf + n, m.increment);
    buf[n++] = '\n';
    out.write(buf, n);
  }
}

std::vector<EncoderSample> read_encoder_csv(const std::filesystem::path& file) {
  std::vector<EncoderSample> out;
  for_each_line(file, [&](FieldReader& f, std::size_t line) {
    EncoderSample m;
    if (!read_stamp(f, &m.t) || !f.next_double(&m.increment) || !f.exhausted()) {
      parse_fail(file, line);
    }
    out.push_back(m);
  });
  return out;
}

void write_rtk_csv(const std::filesystem::path& file, const std::vector<RtkFix>& s) {
  std::ofstream out = open_out(file);
  char buf[320];
  for (const RtkFix& m : s) {
    int n = put_stamp(buf, m.t);
    for (int i = 0; i < 3; ++i) {
      buf[n++] = ',';
      n += put_double(buf + n, m.position(i));
    }
    n += std::snprintf(buf + n, 8, ",%d", static_cast<int>(m.status));
    for (int i = 0; i < 3; ++i) {
      buf[n++] = ',';
      n += put_double(buf + n, m.reported_sigma(i));
    }
    buf[n++] = '\n';
    out.write(buf, n);
  }
}

std::vector<RtkFix> read_rtk_csv(const std::filesystem::path& file) {
  std::vector<RtkFix> out;
  for_each_line(file, [&](FieldReader& f, std::size_t line) {
    RtkFix m;
    if (!read_stamp(f, &m.t)) parse_fail(file, line);
    for (int i = 0; i < 3; ++i) {
      if (!f.next_double(&m.position(i))) parse_fail(file, line);
    }
    int64_t status = 0;
    if (!f.next_int(&status) || status < 0 || status > 2) parse_fail(file, line);
    m.status = static_cast<RtkStatus>(status);
    for (int i = 0; i < 3; ++i) {
      if (!f.next_double(&m.reported_sigma(i))) parse_fail(file, line);
    }
    if (!f.exhausted()) parse_fail(file, line);
    out.push_back(m);
  });
  return out;
}

void write_sweep_csv(const std::filesystem::path& file, const Sweep& sweep) {
  std::ofstream out = open_out(file);
  char buf[256];
  for (const LidarPoint& p : sweep.points) {
    int n = put_stamp(buf, p.t);
    for (int i = 0; i < 3; ++i) {
      buf[n++] = ',';
      n += put_double(buf + n, p.position(i));
    }
    buf[n++] = ',';
    n += put_double(buf + n, p.intensity);
    buf[n++] = '\n';
    out.write(buf, n);
  }
}

Sweep read_sweep_csv(const std::filesystem::path& file, int lidar_id) {
  Sweep sweep;
  sweep.lidar_id = lidar_id;
  for_each_line(file, [&](FieldReader& f, std::size_t line) {
    LidarPoint p;
    p.lidar_id = lidar_id;
    if (!read_stamp(f, &p.t)) parse_fail(file, line);
    for (int i = 0; i < 3; ++i) {
      if (!f.next_double(&p.position(i))) parse_fail(file, line);
    }
    if (!f.next_double(&p.intensity) || !f.exhausted()) parse_fail(file, line);
    sweep.points.push_back(p);
  });
  if (!sweep.points.empty()) {
    sweep.t_start = sweep.points.front().t;
    sweep.t_end = sweep.points.back().t;
  }
  return sweep;
}

std::string sweep_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sweep_%05d.csv", index);
  return buf;
}

void write_calib_json(const std::filesystem::path& file, const SensorRig& rig) {
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
  std::ofstream out = open_out(file);
  out << j.dump(2) << '\n';
}

SensorRig read_calib_json(const std::filesystem::path& file) {
  ordered_json j;
  try {
    j = ordered_json::parse(slurp(file));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("cannot parse " + file.string() + ": " + e.what());
  }
  try {
    SensorRig rig;
    for (const auto& entry : j.at("lidars")) {
      const auto& p = entry.at("pose");
      if (!p.is_array() || p.size() != 7) {
        throw std::runtime_error("lidar pose is not 7 numbers");
      }
      LidarMount m;
      m.lidar_to_body.rotation =
          Quat(p[0].get<double>(), p[1].get<double>(), p[2].get<double>(),
               p[3].get<double>());
      m.lidar_to_body.translation =
          Eigen::Vector3d(p[4].get<double>(), p[5].get<double>(), p[6].get<double>());
      m.mount_height = entry.at("mount_height").get<double>();
      rig.lidars.push_back(m);
    }
    rig.antenna_lever_arm = vec3_from(j.at("antenna_lever_arm"), "antenna_lever_arm");
    rig.encoder_axis = vec3_from(j.at("encoder_axis"), "encoder_axis");
    const auto& noise = j.at("imu_noise");
    rig.imu_noise.gyro_noise = noise.at("gyro_noise").get<double>();
    rig.imu_noise.accel_noise = noise.at("accel_noise").get<double>();
    rig.imu_noise.gyro_bias_walk = noise.at("gyro_bias_walk").get<double>();
    rig.imu_noise.accel_bias_walk = noise.at("accel_bias_walk").get<double>();
    rig.encoder_noise = j.at("encoder_noise").get<double>();
    rig.encoder_scale_walk = j.at("encoder_scale_walk").get<double>();
    rig.encoder_scale = j.at("encoder_scale").get<double>();
    rig.rtk_sigma = j.at("rtk_sigma").get<double>();
    rig.rtk_reported_sigma = vec3_from(j.at("rtk_reported_sigma"), "rtk_reported_sigma");
    return rig;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad calibration in " + file.string() + ": " + e.what());
  }
}

void write_tum(const std::filesystem::path& file,
               const std::vector<TrajectoryPoint>& trajectory) {
  std::ofstream out = open_out(file);
  char buf[320];
  for (const TrajectoryPoint& p : trajectory) {
    int n = std::snprintf(buf, 32, "%lld.%09u", static_cast<long long>(p.t.sec()),
                          p.t.nsec());
    const Quat& q = p.pose.rotation;
    const double fields[7] = {p.pose.translation.x(), p.pose.translation.y(),
                              p.pose.translation.z(), q.x(), q.y(), q.z(), q.w()};
    for (double v : fields) {
      buf[n++] = ' ';
      n += put_double(buf + n, v);
    }
    buf[n++] = '\n';
    out.write(buf, n);
  }
}

std::vector<TrajectoryPoint> read_tum(const std::filesystem::path& file) {
  std::vector<TrajectoryPoint> out;
  for_each_line(file, [&](FieldReader& f, std::size_t line) {
    double v[8];
    for (double& x : v) {
      if (!f.next_double(&x)) parse_fail(file, line);
    }
    if (!f.exhausted()) parse_fail(file, line);
    TrajectoryPoint p;
    p.t = Timestamp::from_sec(v[0]);
    p.pose.translation = Eigen::Vector3d(v[1], v[2], v[3]);
    p.pose.rotation = Quat(v[7], v[4], v[5], v[6]);
    out.push_back(p);
  });
  return out;
}

void write_ply(const std::filesystem::path& file,
               const std::vector<LidarPoint>& points) {
  std::ofstream out = open_out(file);
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property float intensity\nend_header\n";
  char buf[160];
  for (const LidarPoint& p : points) {
    const int n =
        std::snprintf(buf, sizeof(buf), "%.4f %.4f %.4f %.4f\n", p.position.x(),
                      p.position.y(), p.position.z(), p.intensity);
    out.write(buf, n);
  }
}

namespace {

template <typename Sample>
StreamInfo stream_info(const std::string& name, const std::vector<Sample>& samples,
                       const std::filesystem::path& file) {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].t < samples[i - 1].t) {
      throw std::runtime_error("stream not time-sorted: " + file.string());
    }
  }
  StreamInfo info;
  info.name = name;
  info.count = samples.size();
  if (!samples.empty()) {
    info.first = samples.front().t;
    info.last = samples.back().t;
  }
  return info;
}

}  // namespace

DatasetManifest scan_dataset(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    throw std::runtime_error("dataset directory missing: " + directory.string());
  }
  DatasetManifest m;
  m.directory = directory;
  m.streams.push_back(
      stream_info("imu", read_imu_csv(directory / "imu.csv"), directory / "imu.csv"));
  m.streams.push_back(stream_info("encoder", read_encoder_csv(directory / "encoder.csv"),
                                  directory / "encoder.csv"));
  m.streams.push_back(
      stream_info("rtk", read_rtk_csv(directory / "rtk.csv"), directory / "rtk.csv"));

  for (int id = 0;; ++id) {
    const std::filesystem::path dir = directory / ("lidar_" + std::to_string(id));
    if (!std::filesystem::is_directory(dir)) break;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no sweeps in " + dir.string());
    const Sweep first = read_sweep_csv(files.front(), id);
    const Sweep last = read_sweep_csv(files.back(), id);
    StreamInfo info;
    info.name = "lidar_" + std::to_string(id);
    info.count = files.size();
    info.first = first.t_start;
    info.last = last.t_end;
    m.streams.push_back(info);
    m.sweeps.push_back(std::move(files));
  }
  if (m.sweeps.empty()) {
    throw std::runtime_error("no lidar_<id> directories in " + directory.string());
  }

  bool any = false;
  for (const StreamInfo& s : m.streams) {
    if (s.count == 0) continue;
    if (!any) {
      m.overlap_begin = s.first;
      m.overlap_end = s.last;
      any = true;
    } else {
      m.overlap_begin = std::max(m.overlap_begin, s.first);
      m.overlap_end = std::min(m.overlap_end, s.last);
    }
  }
  if (!any || !(m.overlap_begin < m.overlap_end)) {
    throw std::runtime_error("streams do not overlap in time: " + directory.string());
  }
  return m;
}

}  // namespace mlio::io
