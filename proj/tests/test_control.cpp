#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <doctest.h>
#include <Eigen/Core>

#include "helpers.hpp"
#include "reltrack/control.hpp"
#include "reltrack/dynamics.hpp"
#include "reltrack/random.hpp"
#include "reltrack/so3.hpp"

using reltrack::AttitudeCommand;
using reltrack::LyapunovGate;
using reltrack::RandomStream;
using reltrack::RelativeState;
using reltrack::Rotation;
using reltrack::TrackingParams;
using reltrack::TrajectoryParams;
using reltrack::attitude_random_step;
using reltrack::attitude_trajectory_step;
using reltrack::exp_so3;
using reltrack::kAlphaLower;
using reltrack::kAlphaUpper;
using reltrack::lyapunov_drift;
using reltrack::random_rotation;
using reltrack::tracking_accel;
using reltrack::tracking_error;
using reltrack::zeta;
using testhelpers::max_abs_diff;

namespace {

TrajectoryParams sweep_params(double rho, double bq_norm, double h_value) {
  return TrajectoryParams(rho, [h_value](int) { return h_value; }, bq_norm);
}

}  // namespace

TEST_CASE("stable gain interval endpoints") {
  CHECK(kAlphaLower == doctest::Approx(0.29289321881345254).epsilon(1e-15));
  CHECK(kAlphaUpper == doctest::Approx(1.7071067811865475).epsilon(1e-15));
}

TEST_CASE("random attitude command reaches its target in one step") {
  RandomStream rng(11);
  Rotation r = random_rotation(rng);
  for (int i = 0; i < 200; ++i) {
    const AttitudeCommand cmd = attitude_random_step(r, 0.5, rng);
    const Rotation reached = exp_so3(0.5 * cmd.u2) * r;
    CHECK(max_abs_diff(reached.matrix(), cmd.target.matrix()) < 1e-9);
    r = cmd.target;
  }
  CHECK_THROWS_AS(attitude_random_step(r, 0.0, rng), std::invalid_argument);
}

TEST_CASE("random attitude commands are seed-deterministic") {
  RandomStream a(3);
  RandomStream b(3);
  const Rotation r = Rotation::identity();
  for (int i = 0; i < 20; ++i) {
    const AttitudeCommand ca = attitude_random_step(r, 0.5, a);
    const AttitudeCommand cb = attitude_random_step(r, 0.5, b);
    CHECK(ca.u2 == cb.u2);
    CHECK(max_abs_diff(ca.target.matrix(), cb.target.matrix()) == 0.0);
  }
}

TEST_CASE("trajectory parameters validate their inputs") {
  CHECK_THROWS_AS(sweep_params(0.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sweep_params(0.5, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sweep_params(0.5, -1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TrajectoryParams(0.5, nullptr, 1.0), std::invalid_argument);
  const TrajectoryParams tp(1.0 / 24.0, [](int k) { return 0.1 * k; }, 2.0);
  CHECK(tp.rho() == 1.0 / 24.0);
  CHECK(tp.bq_norm() == 2.0);
  CHECK(tp.h(3) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("trajectory direction sweeps a cone at the requested rate") {
  const double bq_norm = std::sqrt(2.0);
  const TrajectoryParams tp = sweep_params(1.0 / 24.0, bq_norm, 0.5);

  const Eigen::Vector3d z0 = zeta(0, tp);
  CHECK(z0[0] == 0.0);
  CHECK(z0[1] == doctest::Approx(1.4142135623730951).epsilon(1e-15));
  CHECK(z0[2] == doctest::Approx(0.70710678118654757).epsilon(1e-15));

  // A quarter period later the horizontal direction has turned 90 degrees.
  const Eigen::Vector3d z12 = zeta(12, tp);
  CHECK(z12[0] == doctest::Approx(1.4142135623730951).epsilon(1e-15));
  CHECK(std::abs(z12[1]) < 1e-15);
  CHECK(z12[2] == doctest::Approx(0.70710678118654757).epsilon(1e-15));

  const Eigen::Vector3d z24 = zeta(24, tp);
  CHECK(std::abs(z24[0]) < 1e-15);
  CHECK(z24[1] == doctest::Approx(-1.4142135623730951).epsilon(1e-15));

  for (int k = 0; k < 48; ++k) {
    CHECK(zeta(k, tp).norm() ==
          doctest::Approx(bq_norm * std::sqrt(1.25)).epsilon(1e-12));
  }
}

TEST_CASE("trajectory attitude points the baseline along the sweep") {
  const Eigen::Vector3d bq(-1.0, 1.0, 0.0);
  const TrajectoryParams tp = sweep_params(1.0 / 24.0, bq.norm(), 0.5);
  RandomStream rng(17);
  Rotation r = random_rotation(rng);
  for (int k = 0; k < 60; ++k) {
    const AttitudeCommand cmd = attitude_trajectory_step(r, k, bq, tp, 0.5);
    // The command closes the attitude gap in exactly one step.
    CHECK(max_abs_diff((exp_so3(0.5 * cmd.u2) * r).matrix(),
                       cmd.target.matrix()) < 1e-9);
    // The reached attitude aligns the baseline with the sweep direction.
    const Eigen::Vector3d pointed = cmd.target * bq;
    const Eigen::Vector3d want = zeta(k, tp).normalized() * bq.norm();
    CHECK(max_abs_diff(pointed, want) < 1e-9);
    r = cmd.target;
  }
}

TEST_CASE("parallel baseline and sweep direction need no rotation") {
  const Eigen::Vector3d bq(0.0, 2.0, 0.0);
  const TrajectoryParams tp = sweep_params(1.0, 2.0, 0.0);
  // At k = 0 the sweep direction is +y, already aligned with bq.
  const AttitudeCommand cmd =
      attitude_trajectory_step(Rotation::identity(), 0, bq, tp, 0.5);
  CHECK(max_abs_diff(cmd.target.matrix(), Eigen::Matrix3d::Identity()) <
        1e-12);
  CHECK(cmd.u2.norm() < 1e-12);
}

TEST_CASE("antiparallel baseline and sweep direction get a half turn") {
  const Eigen::Vector3d bq(0.0, 2.0, 0.0);
  const TrajectoryParams tp = sweep_params(1.0, 2.0, 0.0);
  // At k = 1 the sweep phase is pi, so the direction is -y.
  const AttitudeCommand cmd =
      attitude_trajectory_step(Rotation::identity(), 1, bq, tp, 0.5);
  const Eigen::Vector3d pointed = cmd.target * bq;
  CHECK(max_abs_diff(pointed, Eigen::Vector3d(0.0, -2.0, 0.0)) < 1e-9);
}

TEST_CASE("trajectory attitude command validates its inputs") {
  const TrajectoryParams tp = sweep_params(0.5, 1.0, 0.0);
  const Rotation r = Rotation::identity();
  CHECK_THROWS_AS(
      attitude_trajectory_step(r, 0, Eigen::Vector3d(1, 0, 0), tp, 0.0),
      std::invalid_argument);
  CHECK_THROWS_AS(
      attitude_trajectory_step(r, 0, Eigen::Vector3d::Zero(), tp, 0.5),
      std::invalid_argument);
  const TrajectoryParams bad_h(
      0.5, [](int) { return std::numeric_limits<double>::quiet_NaN(); }, 1.0);
  CHECK_THROWS_AS(
      attitude_trajectory_step(r, 0, Eigen::Vector3d(1, 0, 0), bad_h, 0.5),
      std::invalid_argument);
}

TEST_CASE("drift coefficient is the gated quadratic in the gain") {
  CHECK(lyapunov_drift(1.0).coeff == -1.0);
  CHECK(lyapunov_drift(1.0).stable);
  CHECK(lyapunov_drift(1.2).coeff ==
        doctest::Approx(-0.92000000000000004).epsilon(1e-15));
  CHECK(lyapunov_drift(0.0).coeff == 1.0);
  CHECK_FALSE(lyapunov_drift(0.0).stable);
  CHECK(lyapunov_drift(2.0).coeff == 1.0);
  CHECK_FALSE(lyapunov_drift(2.0).stable);

  // At the exact interval endpoints the coefficient vanishes to rounding.
  CHECK(std::abs(lyapunov_drift(kAlphaLower).coeff) <= 1e-12);
  CHECK(std::abs(lyapunov_drift(kAlphaUpper).coeff) <= 1e-12);
  // Just inside it is negative, just outside positive.
  CHECK(lyapunov_drift(kAlphaLower + 1e-6).coeff < 0.0);
  CHECK(lyapunov_drift(kAlphaUpper - 1e-6).coeff < 0.0);
  CHECK(lyapunov_drift(kAlphaLower - 1e-6).coeff > 0.0);
  CHECK(lyapunov_drift(kAlphaUpper + 1e-6).coeff > 0.0);
}

TEST_CASE("tracking parameters gate the gain at construction") {
  const Eigen::Vector3d bq_star(-2.0, -2.0, 0.0);
  CHECK_NOTHROW(TrackingParams(1.2, bq_star, 0.5));
  CHECK_NOTHROW(TrackingParams(kAlphaLower + 1e-12, bq_star, 0.5));
  CHECK_NOTHROW(TrackingParams(kAlphaUpper - 1e-12, bq_star, 0.5));
  CHECK_THROWS_AS(TrackingParams(kAlphaLower - 1e-12, bq_star, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(TrackingParams(kAlphaUpper + 1e-12, bq_star, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(TrackingParams(0.0, bq_star, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(TrackingParams(1.2, bq_star, 0.0), std::invalid_argument);

  try {
    TrackingParams(2.5, bq_star, 0.5);
    FAIL("expected a throw");
  } catch (const std::invalid_argument& err) {
    const std::string what = err.what();
    CHECK(what.find("0.292893") != std::string::npos);
    CHECK(what.find("1.707107") != std::string::npos);
  }

  const TrackingParams unstable(2.5, bq_star, 0.5, true);
  CHECK_FALSE(unstable.stable());
  CHECK(unstable.drift_coeff() == doctest::Approx(3.5).epsilon(1e-15));

  const TrackingParams tp(1.2, bq_star, 0.5);
  CHECK(tp.alpha() == 1.2);
  CHECK(tp.bq_star() == bq_star);
  CHECK(tp.t() == 0.5);
  CHECK(tp.stable());
  CHECK(tp.drift_coeff() ==
        doctest::Approx(-0.92000000000000004).epsilon(1e-15));
}

TEST_CASE("tracking acceleration implements the feedback law") {
  const Eigen::Vector3d bq_star(-2.0, -2.0, 0.0);
  const TrackingParams tp(1.2, bq_star, 0.5);
  RelativeState est;
  est.q = Eigen::Vector3d(1.0, -0.5, 2.0);
  est.v = Eigen::Vector3d(0.2, 0.1, -0.3);
  RandomStream rng(19);
  for (int i = 0; i < 50; ++i) {
    const Rotation r = random_rotation(rng);
    const Eigen::Vector3d u1 = tracking_accel(r, est, tp);
    const Eigen::Matrix3d rt = r.matrix().transpose();
    const Eigen::Vector3d expected =
        -(2.0 * 1.2 / 0.25) * (rt * est.q - bq_star) - 4.0 * (rt * est.v);
    CHECK(max_abs_diff(u1, expected) < 1e-12);
  }
}

TEST_CASE("tracking error measures distance to the resolved setpoint") {
  const Eigen::Vector3d bq_star(-2.0, -2.0, 0.0);
  const TrackingParams tp(1.2, bq_star, 0.5);
  const Rotation r = exp_so3(Eigen::Vector3d(0, 0, M_PI_2));
  const Eigen::Vector3d q(1.0, 0.0, 3.0);
  const auto diag = tracking_error(q, r, tp);
  // r maps (-2, -2, 0) to (2, -2, 0).
  CHECK(max_abs_diff(diag.e, Eigen::Vector3d(-1.0, 2.0, 3.0)) < 1e-12);
  CHECK(diag.v == doctest::Approx(14.0).epsilon(1e-12));
  CHECK(diag.drift_coeff == tp.drift_coeff());
}

TEST_CASE("closed loop contracts the error by 1 - alpha each step") {
  const reltrack::DynamicsParams params(0.5);
  RandomStream rng(23);
  for (const double alpha : {0.5, 1.0, 1.2}) {
    const Eigen::Vector3d bq_star(-2.0, -2.0, 0.0);
    const TrackingParams tp(alpha, bq_star, params.t());
    const Rotation r = random_rotation(rng);
    RelativeState truth;
    truth.q = Eigen::Vector3d(4.0, -3.0, 1.5);
    truth.v = Eigen::Vector3d(0.3, 0.2, -0.4);

    Eigen::Vector3d e = tracking_error(truth.q, r, tp).e;
    for (int k = 0; k < 25; ++k) {
      const Eigen::Vector3d u1 = tracking_accel(r, truth, tp);
      truth = reltrack::step_relative(truth, r, u1, Eigen::Vector3d::Zero(),
                                      params);
      const Eigen::Vector3d e_next = tracking_error(truth.q, r, tp).e;
      CHECK((e_next - (1.0 - alpha) * e).norm() < 1e-9);
      // The squared error obeys the drift inequality.
      CHECK(e_next.squaredNorm() - e.squaredNorm() <=
            tp.drift_coeff() * e.squaredNorm() + 1e-9);
      e = e_next;
    }
    CHECK(e.norm() < 1e-3);
  }
}
