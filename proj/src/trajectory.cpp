#include "mlio/sim/trajectory.hpp"

#include <cmath>
#include <stdexcept>

namespace mlio::sim {
namespace {

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGlNode[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
constexpr double kGlWeight[5] = {0.2369268850561891, 0.4786286704993665,
                                 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};

// Smoothstep and its derivative for the speed ramp.
double ramp_sigma(double s) { return s * s * (3.0 - 2.0 * s); }
double ramp_dsigma(double s) { return 6.0 * s * (1.0 - s); }

}  // namespace

Trajectory::Trajectory(const TrajectorySpec& spec) : spec_(spec) {
  if (spec_.duration <= 0.0) throw std::invalid_argument("trajectory duration must be positive");
  if (spec_.ramp_time < 0.0) throw std::invalid_argument("negative ramp time");
  if (spec_.kind == TrajectoryKind::piecewise_spline && spec_.knots.size() < 4)
    throw std::invalid_argument("spline trajectory needs at least 4 knots");

  switch (spec_.kind) {
    case TrajectoryKind::stationary:
      u_rate_ = 0.0;
      break;
    case TrajectoryKind::straight:
      u_rate_ = spec_.speed;  // |dP/du| = 1
      break;
    case TrajectoryKind::circle:
      u_rate_ = spec_.speed / spec_.radius_x;  // |dP/du| = r
      break;
    case TrajectoryKind::figure_eight:
    case TrajectoryKind::piecewise_spline: {
      // Average-speed calibration: integrate |dP/du| over the path once and
      // pick du/dt so one traversal advances at the nominal speed.
      const double u_span = (spec_.kind == TrajectoryKind::figure_eight)
                                ? 2.0 * M_PI
                                : static_cast<double>(spec_.knots.size() - 3);
      const int cells = 4096;
      double len = 0.0;
      for (int i = 0; i < cells; ++i) {
        const double a = u_span * i / cells;
        const double b = u_span * (i + 1) / cells;
        for (int g = 0; g < 5; ++g) {
          const double u = 0.5 * (a + b) + 0.5 * (b - a) * kGlNode[g];
          len += 0.5 * (b - a) * kGlWeight[g] * path(u).d1.norm();
        }
      }
      if (len <= 0.0) throw std::invalid_argument("degenerate path");
      u_rate_ = spec_.speed * u_span / len;
      break;
    }
  }

  // Spin the path about its start point so motion always begins along +x.
  // The zero-initial-heading convention is assumed by every consumer of the
  // ground truth; stationary, straight and circle paths already satisfy it,
  // so heading_fix_ stays the identity there.
  const PathEval e0 = path(0.0);
  path_origin_ = e0.p;
  const double psi0 = std::atan2(e0.d1.y(), e0.d1.x());
  const double c = std::cos(psi0), s = std::sin(psi0);
  heading_fix_ << c, s, -s, c;
}

Trajectory::PathEval Trajectory::path(double u) const {
  PathEval e;
  switch (spec_.kind) {
    case TrajectoryKind::stationary:
      e.p = {0, 0};
      e.d1 = {1, 0};  // tangent defines the (constant) heading
      e.d2 = {0, 0};
      break;
    case TrajectoryKind::straight:
      e.p = {u, 0};
      e.d1 = {1, 0};
      e.d2 = {0, 0};
      break;
    case TrajectoryKind::circle: {
      const double r = spec_.radius_x;
      e.p = {r * std::sin(u), r * (1.0 - std::cos(u))};
      e.d1 = {r * std::cos(u), r * std::sin(u)};
      e.d2 = {-r * std::sin(u), r * std::cos(u)};
      break;
    }
    case TrajectoryKind::figure_eight: {
      // Lemniscate of Gerono scaled to half-length A, half-width B/2; the
      // self-crossing sits at u = pi where the heading rate flips sign.
      const double a = spec_.radius_x, b = 0.5 * spec_.radius_y;
      e.p = {a * std::sin(u), b * std::sin(2.0 * u)};
      e.d1 = {a * std::cos(u), 2.0 * b * std::cos(2.0 * u)};
      e.d2 = {-a * std::sin(u), -4.0 * b * std::sin(2.0 * u)};
      break;
    }
    case TrajectoryKind::piecewise_spline: {
      // Centripetal-free Catmull-Rom over interior knots, one unit of u
      // per segment, C1 at the joins.
      const auto& k = spec_.knots;
      const int nseg = static_cast<int>(k.size()) - 3;
      double ui = std::floor(u);
      int seg = static_cast<int>(ui);
      if (seg < 0) { seg = 0; ui = 0.0; }
      if (seg >= nseg) { seg = nseg - 1; ui = nseg - 1; }
      const double s = u - ui;
      const Eigen::Vector2d& p0 = k[seg];
      const Eigen::Vector2d& p1 = k[seg + 1];
      const Eigen::Vector2d& p2 = k[seg + 2];
      const Eigen::Vector2d& p3 = k[seg + 3];
      const Eigen::Vector2d c0 = p1;
      const Eigen::Vector2d c1 = 0.5 * (p2 - p0);
      const Eigen::Vector2d c2 = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
      const Eigen::Vector2d c3 = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
      e.p = c0 + s * (c1 + s * (c2 + s * c3));
      e.d1 = c1 + s * (2.0 * c2 + 3.0 * s * c3);
      e.d2 = 2.0 * c2 + 6.0 * s * c3;
      break;
    }
  }
  e.p = path_origin_ + heading_fix_ * (e.p - path_origin_);
  e.d1 = heading_fix_ * e.d1;
  e.d2 = heading_fix_ * e.d2;
  return e;
}

double Trajectory::u_of_t(double t) const {
  if (t <= 0.0) return 0.0;
  const double tr = spec_.ramp_time;
  if (tr == 0.0 || t >= tr) {
    const double ramp_part = (tr == 0.0) ? 0.0 : 0.5 * tr;
    return u_rate_ * (ramp_part + (t - tr));
  }
  const double s = t / tr;
  return u_rate_ * tr * s * s * s * (1.0 - 0.5 * s);
}

double Trajectory::udot_of_t(double t) const {
  const double tr = spec_.ramp_time;
  if (t <= 0.0) return (tr == 0.0) ? u_rate_ : 0.0;
  if (tr == 0.0 || t >= tr) return u_rate_;
  return u_rate_ * ramp_sigma(t / tr);
}

double Trajectory::uddot_of_t(double t) const {
  const double tr = spec_.ramp_time;
  if (tr == 0.0 || t <= 0.0 || t >= tr) return 0.0;
  return u_rate_ * ramp_dsigma(t / tr) / tr;
}

TrajectorySample Trajectory::at(Timestamp t) const {
  if (t < start() || t > end()) throw std::out_of_range("trajectory time outside span");
  const double ts = (t - start()).to_sec();
  const double u = u_of_t(ts);
  const double ud = udot_of_t(ts);
  const double udd = uddot_of_t(ts);
  const PathEval e = path(u);

  const double norm2 = e.d1.squaredNorm();
  const double psi = std::atan2(e.d1.y(), e.d1.x());
  // d(psi)/du from the tangent, then chained through u(t).
  const double dpsi_du = (e.d1.x() * e.d2.y() - e.d1.y() * e.d2.x()) / norm2;

  TrajectorySample out;
  out.pose.rotation = Quat::from_yaw(psi);
  out.pose.translation = {e.p.x(), e.p.y(), spec_.height};
  out.velocity = {e.d1.x() * ud, e.d1.y() * ud, 0.0};
  out.body_rate = {0.0, 0.0, dpsi_du * ud};
  const Eigen::Vector2d acc2 = e.d2 * ud * ud + e.d1 * udd;
  const Eigen::Vector3d accel_world(acc2.x(), acc2.y(), 0.0);
  const Eigen::Vector3d g(0.0, 0.0, 9.81);
  out.specific_force = out.pose.rotation.inverse() * (accel_world + g);
  return out;
}

double Trajectory::arc_length(Timestamp a, Timestamp b) const {
  if (b < a) return -arc_length(b, a);
  const double ta = (a - start()).to_sec();
  const double tb = (b - start()).to_sec();
  // Split at the ramp end where the speed profile has a derivative kink.
  double cuts[3] = {ta, tb, tb};
  if (spec_.ramp_time > ta && spec_.ramp_time < tb) cuts[1] = spec_.ramp_time;
  double total = 0.0;
  for (int c = 0; c + 1 < 3; ++c) {
    const double lo = cuts[c], hi = cuts[c + 1];
    if (hi <= lo) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.05)));
    for (int pnl = 0; pnl < panels; ++pnl) {
      const double plo = lo + (hi - lo) * pnl / panels;
      const double phi = lo + (hi - lo) * (pnl + 1) / panels;
      for (int g = 0; g < 5; ++g) {
        const double tt = 0.5 * (plo + phi) + 0.5 * (phi - plo) * kGlNode[g];
        total += 0.5 * (phi - plo) * kGlWeight[g] * path(u_of_t(tt)).d1.norm() * udot_of_t(tt);
      }
    }
  }
  return total;
}

}  // namespace mlio::sim
