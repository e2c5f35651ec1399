#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "mlio/core/quat.hpp"
#include "mlio/core/se3.hpp"
#include "mlio/core/time.hpp"

using namespace mlio;

namespace {

// Independent rotation-vector to matrix conversion (Rodrigues form).
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
  const double th = w.norm();
  const Eigen::Matrix3d k = skew(w);
  if (th < 1e-12) return Eigen::Matrix3d::Identity() + k;
  return Eigen::Matrix3d::Identity() + (std::sin(th) / th) * k +
         ((1.0 - std::cos(th)) / (th * th)) * k * k;
}

Eigen::Vector3d random_vec(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng), n(rng)};
}

Quat random_quat(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Quat(u(rng), u(rng), u(rng), u(rng));
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("exp matches rodrigues matrix over magnitude sweep") {
  std::mt19937_64 rng(11);
  for (double scale : {1e-10, 1e-6, 1e-3, 0.1, 1.0, 3.0}) {
    for (int i = 0; i < 50; ++i) {
      const Eigen::Vector3d w = random_vec(rng, scale);
      CHECK((Quat::exp(w).matrix() - rodrigues(w)).norm() < 1e-12);
    }
  }
}

TEST_CASE("log inverts exp up to the angle cut") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> mag(1e-9, M_PI - 1e-6);
  for (int i = 0; i < 500; ++i) {
    Eigen::Vector3d axis = random_vec(rng, 1.0);
    if (axis.norm() < 1e-6) axis = Eigen::Vector3d::UnitX();
    axis.normalize();
    const Eigen::Vector3d w = mag(rng) * axis;
    CHECK((Quat::exp(w).log() - w).norm() < 1e-9);
  }
}

TEST_CASE("log stays in the principal interval for any sign pattern") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const Quat q = random_quat(rng);
    const double angle = q.log().norm();
    CHECK(angle >= 0.0);
    CHECK(angle <= M_PI + 1e-12);
    CHECK(Quat::exp(q.log()).angle_to(q) < 1e-9);
  }
}

TEST_CASE("construction flips to the positive hemisphere") {
  const Quat q(-0.5, 0.5, 0.5, 0.5);
  CHECK(q.w() >= 0.0);
  const Quat p(0.0, -1.0, 0.0, 0.0);
  CHECK(p.w() == 0.0);
}

TEST_CASE("rotation agrees with matrix action") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 100; ++i) {
    const Quat q = random_quat(rng);
    const Eigen::Vector3d v = random_vec(rng, 10.0);
    CHECK((q * v - q.matrix() * v).norm() < 1e-12 * (1.0 + v.norm()));
  }
}

TEST_CASE("product matches matrix product") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 100; ++i) {
    const Quat a = random_quat(rng);
    const Quat b = random_quat(rng);
    CHECK(((a * b).matrix() - a.matrix() * b.matrix()).norm() < 1e-12);
  }
}

TEST_CASE("from_matrix round-trips all conjugation branches") {
  std::mt19937_64 rng(16);
  for (int i = 0; i < 400; ++i) {
    const Quat q = random_quat(rng);
    CHECK(Quat::from_matrix(q.matrix()).angle_to(q) < 1e-9);
  }
  // Near-pi rotations about each axis hit the off-diagonal branches.
  for (int axis = 0; axis < 3; ++axis) {
    Eigen::Vector3d w = Eigen::Vector3d::Zero();
    w[axis] = M_PI - 1e-7;
    const Quat q = Quat::exp(w);
    CHECK(Quat::from_matrix(q.matrix()).angle_to(q) < 1e-9);
  }
}

TEST_CASE("slerp is exact at the endpoints and follows the angle ratio") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const Quat a = random_quat(rng);
    const Quat b = random_quat(rng);
    const Quat s0 = slerp(a, b, 0.0);
    const Quat s1 = slerp(a, b, 1.0);
    CHECK(s0.w() == a.w());
    CHECK((s0.vec() - a.vec()).norm() == 0.0);
    CHECK(s1.w() == b.w());
    const double full = a.angle_to(b);
    std::uniform_real_distribution<double> ut(0.0, 1.0);
    const double t = ut(rng);
    const Quat st = slerp(a, b, t);
    CHECK(std::abs(a.angle_to(st) - t * full) < 1e-10);
    // Geodesic oracle: a * exp(t * log(a^-1 b)); log takes the short arc.
    const Quat rel = a.inverse() * b;
    CHECK(st.angle_to(a * Quat::exp(t * rel.log())) < 1e-10);
  }
}

TEST_CASE("slerp interpolation angle is monotone in t") {
  std::mt19937_64 rng(18);
  const Quat a = random_quat(rng);
  const Quat b = random_quat(rng);
  double prev = -1.0;
  for (int i = 0; i <= 64; ++i) {
    const double t = i / 64.0;
    const double ang = a.angle_to(slerp(a, b, t));
    CHECK(ang >= prev - 1e-12);
    prev = ang;
  }
}

TEST_CASE("pose composition matches homogeneous matrix product") {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 50; ++i) {
    SE3 chain;
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    for (int j = 0; j < 4; ++j) {
      const SE3 p{random_quat(rng), random_vec(rng, 5.0)};
      chain = chain * p;
      m = m * p.matrix();
    }
    CHECK((chain.matrix() - m).norm() < 1e-12 * (1.0 + m.norm()));
    const Eigen::Vector3d x = random_vec(rng, 3.0);
    const Eigen::Vector4d hx = m * x.homogeneous();
    CHECK((chain * x - hx.head<3>()).norm() < 1e-10);
  }
}

TEST_CASE("pose inverse composes to identity") {
  std::mt19937_64 rng(20);
  for (int i = 0; i < 100; ++i) {
    const SE3 p{random_quat(rng), random_vec(rng, 5.0)};
    const SE3 e = p * p.inverse();
    CHECK(e.rotation.angle_to(Quat()) < 1e-12);
    CHECK(e.translation.norm() < 1e-12);
  }
}

TEST_CASE("timestamps use exact integer arithmetic") {
  const Timestamp t{5, 999999999};
  const Duration d{2};
  const Timestamp t2 = t + d;
  CHECK(t2.sec() == 6);
  CHECK(t2.nsec() == 1);
  CHECK((t2 - t).nanos() == 2);

  const Timestamp a{100, 250000000};
  const Timestamp b{99, 750000000};
  CHECK((a - b).nanos() == 500000000);
  CHECK((b - a).nanos() == -500000000);

  // Repeated accumulation of a 5 ms step stays exact.
  Timestamp acc{0, 0};
  const Duration step{5000000};
  for (int i = 0; i < 200; ++i) acc = acc + step;
  CHECK(acc.sec() == 1);
  CHECK(acc.nsec() == 0);
}

TEST_CASE("from_sec rounds to the nearest nanosecond") {
  CHECK(Timestamp::from_sec(1.25).sec() == 1);
  CHECK(Timestamp::from_sec(1.25).nsec() == 250000000);
  CHECK(Duration::from_sec(0.1).nanos() == 100000000);
  CHECK(Duration::from_sec(-0.25).nanos() == -250000000);
}

TEST_CASE("half-open window membership") {
  const Timestamp lo{10, 0};
  const Timestamp hi{10, 100000000};
  CHECK(in_half_open(lo, lo, hi));
  CHECK(!in_half_open(hi, lo, hi));
  CHECK(in_half_open(Timestamp{10, 99999999}, lo, hi));
  CHECK(!in_half_open(Timestamp{9, 999999999}, lo, hi));
}

TEST_CASE("ordering operators agree with nanosecond order") {
  CHECK(Timestamp{1, 0} < Timestamp{1, 1});
  CHECK(Timestamp{0, 999999999} < Timestamp{1, 0});
  CHECK(Duration{-1} < Duration{0});
  CHECK(Timestamp{3, 5} == Timestamp{3, 5});
}

}  // TEST_SUITE
