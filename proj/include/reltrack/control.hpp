#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "reltrack/dynamics.hpp"
#include "reltrack/random.hpp"
#include "reltrack/so3.hpp"

namespace reltrack {

/// Endpoints of the gain interval on which the tracking error contracts:
/// 2(1 - alpha)^2 - 1 < 0 exactly for alpha strictly between these.
inline constexpr double kAlphaLower = 1.0 - M_SQRT1_2;
inline constexpr double kAlphaUpper = 1.0 + M_SQRT1_2;

/// One attitude command: the angular velocity to apply over the next step
/// and the absolute attitude it reaches.
struct AttitudeCommand {
  Eigen::Vector3d u2 = Eigen::Vector3d::Zero();
  Rotation target;
};

/// Commands a fresh uniformly random attitude each step.
///
/// The angular velocity closes the full gap to the drawn target in one
/// step: exp_so3(u2 * t) * r equals the target. The logarithm's principal
/// branch keeps ||u2|| * t at or below pi.
inline AttitudeCommand attitude_random_step(const Rotation& r, double t,
                                            RandomStream& rng) {
  if (!(t > 0.0)) {
    throw std::invalid_argument("attitude_random_step: period must be positive");
  }
  AttitudeCommand out;
  out.target = random_rotation(rng);
  out.u2 = log_so3(out.target * r.inverse()) / t;
  return out;
}

/// Parameters of the deterministic excitation trajectory.
///
/// rho sets the horizontal sweep rate in multiples of pi per step, h gives
/// the vertical component as a function of the step index, and bq_norm
/// scales the whole curve to the sensor baseline length.
class TrajectoryParams {
 public:
  TrajectoryParams(double rho, std::function<double(int)> h, double bq_norm)
      : rho_(rho), h_(std::move(h)), bq_norm_(bq_norm) {
    if (rho == 0.0) {
      throw std::invalid_argument("TrajectoryParams: rho must be nonzero");
    }
    if (!(bq_norm > 0.0)) {
      throw std::invalid_argument("TrajectoryParams: baseline norm must be positive");
    }
    if (!h_) {
      throw std::invalid_argument("TrajectoryParams: vertical profile must be callable");
    }
  }

  double rho() const { return rho_; }
  double h(int k) const { return h_(k); }
  double bq_norm() const { return bq_norm_; }

 private:
  double rho_;
  std::function<double(int)> h_;
  double bq_norm_;
};

/// Direction the world-frame baseline should point at step k:
/// bq_norm * [sin(rho k pi), cos(rho k pi), h(k)].
inline Eigen::Vector3d zeta(int k, const TrajectoryParams& tp) {
  const double phase = tp.rho() * static_cast<double>(k) * M_PI;
  return tp.bq_norm() *
         Eigen::Vector3d(std::sin(phase), std::cos(phase), tp.h(k));
}

namespace detail {

/// Deterministic unit vector orthogonal to v: the first standard basis
/// vector whose cross product with v is usable.
inline Eigen::Vector3d orthogonal_unit(const Eigen::Vector3d& v) {
  const Eigen::Vector3d unit = v.normalized();
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d cand = Eigen::Vector3d::Unit(i).cross(unit);
    const double norm = cand.norm();
    if (norm > 1e-6) {
      return cand / norm;
    }
  }
  throw std::invalid_argument("orthogonal_unit: zero vector");
}

}  // namespace detail

/// Commands the attitude that swings the baseline onto the excitation
/// trajectory at step k.
///
/// The target attitude is the minimal rotation taking bq onto zeta(k):
/// axis along bq x zeta, angle between the two directions. When the
/// directions are parallel the axis is arbitrary, so a deterministic
/// orthogonal axis is substituted; the angle (0 or pi) still produces the
/// correct target. The angular velocity closes the gap from r in one step.
inline AttitudeCommand attitude_trajectory_step(const Rotation& r, int k,
                                                const Eigen::Vector3d& bq,
                                                const TrajectoryParams& tp,
                                                double t) {
  if (!(t > 0.0)) {
    throw std::invalid_argument("attitude_trajectory_step: period must be positive");
  }
  const double bq_norm = bq.norm();
  if (!(bq_norm > 0.0)) {
    throw std::invalid_argument("attitude_trajectory_step: baseline must be nonzero");
  }
  const Eigen::Vector3d dir = zeta(k, tp);
  const double dir_norm = dir.norm();
  if (!(dir_norm > 0.0)) {
    throw std::invalid_argument("attitude_trajectory_step: zero trajectory direction");
  }
  const Eigen::Vector3d cross = bq.cross(dir);
  const double sin_term = cross.norm() / (bq_norm * dir_norm);
  const double cos_term =
      std::clamp(bq.dot(dir) / (bq_norm * dir_norm), -1.0, 1.0);
  const double angle = std::atan2(std::max(sin_term, 0.0), cos_term);
  const Eigen::Vector3d axis =
      (sin_term > 1e-6) ? (cross / cross.norm()).eval()
                        : detail::orthogonal_unit(bq);
  AttitudeCommand out;
  out.target = exp_so3(angle * axis);
  out.u2 = log_so3(out.target * r.inverse()) / t;
  return out;
}

/// Tracking gain and setpoint, gated for contraction at construction.
///
/// The per-step error contraction factor is 2(1 - alpha)^2 - 1; it is
/// negative exactly for alpha in (kAlphaLower, kAlphaUpper). Construction
/// outside that interval throws unless allow_unstable is set, which is
/// meant for experiments that deliberately study divergence.
class TrackingParams {
 public:
  TrackingParams(double alpha, const Eigen::Vector3d& bq_star, double t,
                 bool allow_unstable = false)
      : alpha_(alpha), bq_star_(bq_star), t_(t) {
    if (!(t > 0.0)) {
      throw std::invalid_argument("TrackingParams: sampling period must be positive");
    }
    drift_coeff_ = 2.0 * (1.0 - alpha) * (1.0 - alpha) - 1.0;
    if (drift_coeff_ >= 0.0 && !allow_unstable) {
      throw std::invalid_argument(
          "TrackingParams: alpha " + std::to_string(alpha) +
          " outside the stable interval (" + std::to_string(kAlphaLower) +
          ", " + std::to_string(kAlphaUpper) + ")");
    }
  }

  double alpha() const { return alpha_; }
  const Eigen::Vector3d& bq_star() const { return bq_star_; }
  double t() const { return t_; }
  double drift_coeff() const { return drift_coeff_; }
  bool stable() const { return drift_coeff_ < 0.0; }

 private:
  double alpha_;
  Eigen::Vector3d bq_star_;
  double t_;
  double drift_coeff_;
};

/// Body-frame acceleration driving the estimated relative position to the
/// setpoint: u1 = -(2 alpha / t^2)(r^T qhat - bq_star) - (2 / t) r^T vhat.
inline Eigen::Vector3d tracking_accel(const Rotation& r,
                                      const RelativeState& est,
                                      const TrackingParams& tp) {
  const Eigen::Matrix3d rt = r.matrix().transpose();
  const double t = tp.t();
  return -(2.0 * tp.alpha() / (t * t)) * (rt * est.q - tp.bq_star()) -
         (2.0 / t) * (rt * est.v);
}

/// Contraction coefficient of the tracking-error Lyapunov function.
struct LyapunovGate {
  double coeff = 0.0;
  bool stable = false;
};

/// Evaluates the gate for a candidate gain without constructing params.
inline LyapunovGate lyapunov_drift(double alpha) {
  LyapunovGate out;
  out.coeff = 2.0 * (1.0 - alpha) * (1.0 - alpha) - 1.0;
  out.stable = out.coeff < 0.0;
  return out;
}

/// Instantaneous tracking error and its Lyapunov value.
struct TrackingDiagnostics {
  Eigen::Vector3d e = Eigen::Vector3d::Zero();
  double v = 0.0;
  double drift_coeff = 0.0;
};

/// Error of the true relative position against the attitude-resolved
/// setpoint: e = q - r * bq_star, with V = e^T e.
inline TrackingDiagnostics tracking_error(const Eigen::Vector3d& q,
                                          const Rotation& r,
                                          const TrackingParams& tp) {
  TrackingDiagnostics out;
  out.e = q - r * tp.bq_star();
  out.v = out.e.squaredNorm();
  out.drift_coeff = tp.drift_coeff();
  return out;
}

}  // namespace reltrack
