#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "reltrack/dynamics.hpp"
#include "reltrack/sensing.hpp"
#include "reltrack/so3.hpp"

namespace reltrack {

/// Posterior estimate of the relative state with its covariance.
struct FilterState {
  RelativeState est;
  Matrix6d cov = Matrix6d::Zero();
};

/// Prior estimate after propagating one step, before the measurement.
struct Prediction {
  RelativeState est;
  Matrix6d cov = Matrix6d::Zero();
};

/// Propagates the filter state through one step of the relative dynamics.
///
/// The commanded vehicle acceleration u1 (body frame, rotated by the
/// attitude r held over the step) is a known input; the unknown target
/// acceleration is zero-mean noise, so it enters only the covariance,
/// as B * W * B^T.
inline Prediction predict(const FilterState& fs, const Rotation& r,
                          const Eigen::Vector3d& u1, const TargetNoise& noise,
                          const DynamicsParams& params) {
  Prediction out;
  out.est = step_relative(fs.est, r, u1, Eigen::Vector3d::Zero(), params);
  const Matrix6d propagated =
      params.A() * fs.cov * params.A().transpose() +
      params.B() * noise.cov() * params.B().transpose();
  out.cov = 0.5 * (propagated + propagated.transpose());
  return out;
}

/// Folds one scalar measurement into the prediction.
///
/// The predicted measurement includes the known noise bias, so the
/// innovation is y - (row * est + mean). The covariance uses the Joseph
/// form (I - K row) cov (I - K row)^T + K var K^T, which stays symmetric
/// positive semidefinite under roundoff, and is symmetrized afterwards.
/// A non-finite innovation indicates corrupted upstream state and is
/// rejected rather than absorbed.
inline FilterState update(const Prediction& pred,
                          const LinearizedMeasurement& meas) {
  const Vector6d est_pred = pred.est.to_vector();
  const double innovation =
      meas.y - (meas.row.dot(est_pred) + meas.noise_mean);
  if (!std::isfinite(innovation)) {
    throw std::runtime_error("update: non-finite innovation");
  }
  const double s = meas.noise_var + meas.row * pred.cov * meas.row.transpose();
  const Vector6d gain = pred.cov * meas.row.transpose() / s;
  const Matrix6d identity_less_gain =
      Matrix6d::Identity() - gain * meas.row;
  const Matrix6d joseph =
      identity_less_gain * pred.cov * identity_less_gain.transpose() +
      gain * meas.noise_var * gain.transpose();
  FilterState out;
  out.est = RelativeState::from_vector(est_pred + gain * innovation);
  out.cov = 0.5 * (joseph + joseph.transpose());
  return out;
}

}  // namespace reltrack
