#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mlio/preint/preintegration.hpp"

using namespace mlio;
using namespace mlio::preint;
using testutil::random_vec;

namespace {

PreintNoise tiny_noise() {
  PreintNoise n;
  n.gyro_noise = 1e-4;
  n.accel_noise = 1e-3;
  n.gyro_bias_walk = 1e-6;
  n.accel_bias_walk = 1e-5;
  n.encoder_noise = 1e-4;
  n.encoder_scale_walk = 1e-6;
  return n;
}

// Integrates an analytic measurement stream at the given rate.
template <typename GyroFn, typename AccelFn, typename EncFn>
PreintegrationDelta integrate(const BiasPoint& lin, double duration, double rate,
                              GyroFn gyro, AccelFn accel, EncFn enc_rate) {
  PreintegrationDelta d(lin, tiny_noise());
  const Duration dt = Duration::from_sec(1.0 / rate);
  const int steps = static_cast<int>(std::llround(duration * rate));
  Timestamp t{0, 0};
  d.begin({t, gyro(0.0), accel(0.0)});
  for (int i = 1; i <= steps; ++i) {
    const Timestamp ti = t + Duration(dt.nanos() * i);
    const double s = ti.to_sec();
    const double s_prev = (ti + Duration(-dt.nanos())).to_sec();
    d.propagate({ti, gyro(s), accel(s)},
                enc_rate(0.5 * (s_prev + s)) * dt.to_sec(), dt);
  }
  return d;
}

RobotState random_state(std::mt19937_64& rng) {
  RobotState s;
  s.attitude = testutil::random_quat(rng);
  s.position = random_vec(rng, 10.0);
  s.velocity = random_vec(rng, 3.0);
  s.accel_bias = random_vec(rng, 0.05);
  s.gyro_bias = random_vec(rng, 0.01);
  s.encoder_scale = 1.0 + 0.05 * random_vec(rng, 1.0).x();
  return s;
}

RobotState retract(const RobotState& s, const Eigen::VectorXd& d) {
  RobotState out = s;
  out.attitude = s.attitude * Quat::exp(d.segment<3>(0));
  out.position += d.segment<3>(3);
  out.velocity += d.segment<3>(6);
  out.accel_bias += d.segment<3>(9);
  out.gyro_bias += d.segment<3>(12);
  out.encoder_scale += d[15];
  return out;
}

}  // namespace

TEST_SUITE("preint") {

TEST_CASE("stationary stream integrates the gravity reading") {
  const GravityModel grav;
  const Eigen::Vector3d f(0, 0, 9.81);
  auto d = integrate(
      {}, 1.0, 200.0, [](double) { return Eigen::Vector3d::Zero(); },
      [&](double) { return f; }, [](double) { return 0.0; });

  CHECK(d.dt() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((d.beta() - f).norm() < 1e-12);
  CHECK((d.alpha() - 0.5 * f).norm() < 1e-12);
  CHECK(d.gamma().angle_to(Quat()) < 1e-15);

  RobotState s;
  const Vec19 r = d.residual(s, s, grav);
  CHECK(r.norm() < 1e-12);
}

TEST_CASE("constant rate stream matches the exponential map") {
  const Eigen::Vector3d w(0.3, -0.2, 0.5);
  auto d = integrate(
      {}, 1.0, 200.0, [&](double) { return w; },
      [](double) { return Eigen::Vector3d::Zero(); }, [](double) { return 0.0; });
  CHECK(d.gamma().angle_to(Quat::exp(w)) < 1e-12);
}

TEST_CASE("circular motion residual vanishes at true states") {
  // Planar circle, heading locked to the path tangent so the odometer row
  // is exercised too.
  const double r = 20.0, omega = 0.5, scale_true = 1.02;
  const GravityModel grav;
  const double speed = r * omega;

  auto attitude_at = [&](double t) { return Quat::from_yaw(omega * t); };
  auto gyro = [&](double) { return Eigen::Vector3d(0, 0, omega); };
  auto accel = [&](double t) {
    const Eigen::Vector3d a_w(-r * omega * omega * std::sin(omega * t),
                              r * omega * omega * std::cos(omega * t), 0);
    return attitude_at(t).inverse() * (a_w + grav.g);
  };
  auto enc_rate = [&](double) { return speed / scale_true; };

  BiasPoint lin;
  lin.encoder_scale = scale_true;
  auto d = integrate(lin, 1.0, 200.0, gyro, accel, enc_rate);

  auto state_at = [&](double t) {
    RobotState s;
    s.attitude = attitude_at(t);
    s.position = Eigen::Vector3d(r * std::sin(omega * t), r * (1 - std::cos(omega * t)), 0);
    s.velocity = Eigen::Vector3d(speed * std::cos(omega * t), speed * std::sin(omega * t), 0);
    s.encoder_scale = scale_true;
    return s;
  };

  const Vec19 res = d.residual(state_at(0.0), state_at(1.0), grav);
  CHECK(res.norm() < 1e-4);
  // Midpoint integration should land well under the contract bound.
  CHECK(res.norm() < 1e-5);
}

TEST_CASE("split and composed spans agree with one full span") {
  std::mt19937_64 rng(31);
  auto gyro = [&](double t) {
    return Eigen::Vector3d(0.4 * std::sin(t), 0.3 * std::cos(2 * t), -0.2);
  };
  auto accel = [&](double t) {
    return Eigen::Vector3d(std::sin(3 * t), 9.5, 0.3 * t);
  };
  auto enc = [](double t) { return 1.0 + 0.1 * t; };

  auto full = integrate({}, 1.0, 200.0, gyro, accel, enc);

  PreintegrationDelta first(BiasPoint{}, tiny_noise());
  PreintegrationDelta second(BiasPoint{}, tiny_noise());
  const Duration dt = Duration::from_sec(1.0 / 200.0);
  first.begin({Timestamp{0, 0}, gyro(0), accel(0)});
  for (int i = 1; i <= 200; ++i) {
    const double s = i * dt.to_sec();
    const double mid = s - 0.5 * dt.to_sec();
    auto& target = (i <= 100) ? first : second;
    if (i == 101) second.begin({Timestamp::from_sec(0.5), gyro(0.5), accel(0.5)});
    target.propagate({Timestamp::from_sec(s), gyro(s), accel(s)}, enc(mid) * dt.to_sec(), dt);
  }
  const PreintegrationDelta joined = compose(first, second);

  CHECK((joined.alpha() - full.alpha()).norm() < 1e-9);
  CHECK((joined.beta() - full.beta()).norm() < 1e-9);
  CHECK(joined.gamma().angle_to(full.gamma()) < 1e-9);
  CHECK((joined.alpha_ob() - full.alpha_ob()).norm() < 1e-9);
  CHECK(joined.span() == full.span());
}

TEST_CASE("zero span is the two-sided identity under composition") {
  auto d = integrate(
      {}, 0.5, 100.0, [](double t) { return Eigen::Vector3d(0.1, t, 0); },
      [](double) { return Eigen::Vector3d(0, 0, 9.81); }, [](double) { return 0.5; });
  PreintegrationDelta zero(BiasPoint{}, tiny_noise());
  const PreintegrationDelta left = compose(zero, d);
  const PreintegrationDelta right = compose(d, zero);
  for (const PreintegrationDelta* j : {&left, &right}) {
    CHECK((j->alpha() - d.alpha()).norm() == 0.0);
    CHECK((j->beta() - d.beta()).norm() == 0.0);
    CHECK(j->gamma().angle_to(d.gamma()) < 1e-15);
    CHECK(j->span() == d.span());
  }
}

TEST_CASE("relinearizing at the same bias reproduces the delta exactly") {
  auto d = integrate(
      {}, 0.8, 200.0, [](double t) { return Eigen::Vector3d(0.2, -0.1 * t, 0.3); },
      [](double t) { return Eigen::Vector3d(0.5, 9.7, 0.1 * t); },
      [](double) { return 2.0; });
  const PreintegrationDelta again = d.relinearized(BiasPoint{});
  CHECK(again.alpha() == d.alpha());
  CHECK(again.beta() == d.beta());
  CHECK(again.alpha_ob() == d.alpha_ob());
  CHECK(again.gamma().w() == d.gamma().w());
  CHECK(again.gamma().vec() == d.gamma().vec());
  CHECK(again.covariance() == d.covariance());
}

TEST_CASE("relinearizing removes an injected measurement bias") {
  std::mt19937_64 rng(32);
  const Eigen::Vector3d bg = random_vec(rng, 0.02);
  const Eigen::Vector3d ba = random_vec(rng, 0.1);
  auto gyro = [](double t) { return Eigen::Vector3d(0.3 * std::sin(t), 0.1, -0.2 * t); };
  auto accel = [](double t) { return Eigen::Vector3d(0.2, 9.8, 0.4 * std::cos(t)); };

  auto clean = integrate({}, 1.0, 200.0, gyro, accel, [](double) { return 1.0; });
  auto biased = integrate(
      {}, 1.0, 200.0,
      [&](double t) -> Eigen::Vector3d { return gyro(t) + bg; },
      [&](double t) -> Eigen::Vector3d { return accel(t) + ba; },
      [](double) { return 1.0; });

  BiasPoint at_bias;
  at_bias.accel_bias = ba;
  at_bias.gyro_bias = bg;
  const PreintegrationDelta fixed = biased.relinearized(at_bias);
  CHECK((fixed.alpha() - clean.alpha()).norm() < 1e-12);
  CHECK((fixed.beta() - clean.beta()).norm() < 1e-12);
  CHECK(fixed.gamma().angle_to(clean.gamma()) < 1e-12);
}

TEST_CASE("relinearize after buffer drop reports the contract breach") {
  auto d = integrate(
      {}, 0.1, 100.0, [](double) { return Eigen::Vector3d::Zero(); },
      [](double) { return Eigen::Vector3d(0, 0, 9.81); }, [](double) { return 0.0; });
  d.drop_buffer();
  CHECK(!d.has_buffer());
  CHECK_THROWS_AS((void)d.relinearized(BiasPoint{}), std::logic_error);
}

TEST_CASE("propagate before begin reports misuse") {
  PreintegrationDelta d(BiasPoint{}, tiny_noise());
  CHECK_THROWS_AS(
      d.propagate({Timestamp{0, 0}, {}, {}}, 0.0, Duration::from_sec(0.01)),
      std::logic_error);
}

TEST_CASE("covariance stays symmetric nonnegative and grows with the span") {
  auto d = PreintegrationDelta(BiasPoint{}, tiny_noise());
  d.begin({Timestamp{0, 0}, Eigen::Vector3d(0.1, 0.2, -0.1), Eigen::Vector3d(0.3, 9.8, 0.1)});
  double prev_trace = 0.0;
  Timestamp t{0, 0};
  const Duration dt = Duration::from_sec(0.005);
  for (int i = 1; i <= 200; ++i) {
    t = t + dt;
    d.propagate({t, Eigen::Vector3d(0.1, 0.2, -0.1), Eigen::Vector3d(0.3, 9.8, 0.1)}, 0.005,
                dt);
    const Mat19& p = d.covariance();
    CHECK((p - p.transpose()).norm() < 1e-18);
    CHECK(p.trace() > prev_trace);
    prev_trace = p.trace();
  }
  Eigen::SelfAdjointEigenSolver<Mat19> es(d.covariance());
  CHECK(es.eigenvalues().minCoeff() > -1e-15);

  const Mat19 s = d.sqrt_information();
  const Mat19 should_be_identity = s * d.covariance() * s.transpose();
  CHECK((should_be_identity - Mat19::Identity()).norm() < 1e-6);
}

TEST_CASE("residual jacobians match central differences") {
  std::mt19937_64 rng(33);
  const GravityModel grav;
  for (int trial = 0; trial < 20; ++trial) {
    auto d = integrate(
        {}, 0.5, 100.0,
        [&](double t) { return Eigen::Vector3d(0.4 * std::sin(t + trial), 0.2, -0.3); },
        [&](double t) { return Eigen::Vector3d(0.5 * t, 9.6, 0.2); },
        [](double) { return 1.5; });

    const RobotState sk = random_state(rng);
    const RobotState sk1 = random_state(rng);
    Eigen::Matrix<double, 19, 16> jk, jk1;
    d.residual_jacobians(sk, sk1, grav, jk, jk1);

    auto fd_k = testutil::central_diff(19, 16, [&](const Eigen::VectorXd& del) {
      return Eigen::VectorXd(d.residual(retract(sk, del), sk1, grav));
    });
    auto fd_k1 = testutil::central_diff(19, 16, [&](const Eigen::VectorXd& del) {
      return Eigen::VectorXd(d.residual(sk, retract(sk1, del), grav));
    });
    CHECK(testutil::max_rel_err(jk, fd_k) < 1e-4);
    CHECK(testutil::max_rel_err(jk1, fd_k1) < 1e-4);
  }
}

}  // TEST_SUITE
