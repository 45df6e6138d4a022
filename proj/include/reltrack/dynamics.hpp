#pragma once

#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "reltrack/random.hpp"
#include "reltrack/so3.hpp"

namespace reltrack {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix63d = Eigen::Matrix<double, 6, 3>;
using RowVector6d = Eigen::Matrix<double, 1, 6>;

/// Vehicle state in the world frame.
struct BodyState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
};

/// Target state in the world frame.
struct TargetState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
};

/// Vehicle-minus-target position and velocity in the world frame:
/// q = p - pbar, v = v - vbar.
struct RelativeState {
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();

  Vector6d to_vector() const {
    Vector6d x;
    x << q, v;
    return x;
  }

  static RelativeState from_vector(const Vector6d& x) {
    return RelativeState{x.head<3>(), x.tail<3>()};
  }
};

/// Discrete double-integrator transition matrices for a fixed step.
///
/// A = [I tI; 0 I], B = [(t^2/2) I; t I]. Position and velocity evolve as
/// p+ = p + t v + (t^2/2) a and v+ = v + t a for any acceleration a held
/// constant over the step.
class DynamicsParams {
 public:
  explicit DynamicsParams(double t) : t_(t) {
    if (!(t > 0.0)) {
      throw std::invalid_argument("DynamicsParams: sampling period must be positive");
    }
    a_.setIdentity();
    a_.topRightCorner<3, 3>() = t * Eigen::Matrix3d::Identity();
    b_.setZero();
    b_.topRows<3>() = 0.5 * t * t * Eigen::Matrix3d::Identity();
    b_.bottomRows<3>() = t * Eigen::Matrix3d::Identity();
  }

  double t() const { return t_; }
  const Matrix6d& A() const { return a_; }
  const Matrix63d& B() const { return b_; }

 private:
  double t_;
  Matrix6d a_;
  Matrix63d b_;
};

/// Target acceleration noise: zero-mean with covariance W.
///
/// W must be symmetric positive definite; the constructor extracts the
/// eigenvalue range (sigma bounds used by analysis code) and the Cholesky
/// factor used for sampling. Cholesky failure or a non-positive spectrum
/// rejects the matrix.
class TargetNoise {
 public:
  explicit TargetNoise(const Eigen::Matrix3d& w) : w_(w) {
    if (!w.allFinite() || (w - w.transpose()).norm() > 1e-12) {
      throw std::invalid_argument("TargetNoise: covariance must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(w);
    sigma_lower_ = eig.eigenvalues().minCoeff();
    sigma_upper_ = eig.eigenvalues().maxCoeff();
    if (!(sigma_lower_ > 0.0)) {
      throw std::invalid_argument("TargetNoise: covariance must be positive definite");
    }
    Eigen::LLT<Eigen::Matrix3d> llt(w);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("TargetNoise: Cholesky factorization failed");
    }
    chol_lower_ = llt.matrixL();
  }

  const Eigen::Matrix3d& cov() const { return w_; }
  double sigma_lower() const { return sigma_lower_; }
  double sigma_upper() const { return sigma_upper_; }
  const Eigen::Matrix3d& chol_lower() const { return chol_lower_; }

 private:
  Eigen::Matrix3d w_;
  Eigen::Matrix3d chol_lower_;
  double sigma_lower_ = 0.0;
  double sigma_upper_ = 0.0;
};

/// Draws one target acceleration sample with covariance noise.cov().
inline Eigen::Vector3d sample_target_accel(const TargetNoise& noise,
                                           RandomStream& rng) {
  Eigen::Vector3d z;
  for (int i = 0; i < 3; ++i) z[i] = rng.normal();
  return noise.chol_lower() * z;
}

/// Advances the vehicle one step.
///
/// u1 is the translational acceleration command in the body frame (applied
/// in the world frame as R * u1) and u2 the angular velocity command held
/// over the step, so the attitude composes as exp(t * u2) * R.
inline std::pair<BodyState, Rotation> step_uuv(const BodyState& state,
                                               const Rotation& attitude,
                                               const Eigen::Vector3d& u1,
                                               const Eigen::Vector3d& u2,
                                               const DynamicsParams& params) {
  const double t = params.t();
  const Eigen::Vector3d accel = attitude * u1;
  BodyState next;
  next.p = state.p + t * state.v + 0.5 * t * t * accel;
  next.v = state.v + t * accel;
  return {next, exp_so3(t * u2) * attitude};
}

/// Advances the target one step under world-frame acceleration ubar.
inline TargetState step_target(const TargetState& state,
                               const Eigen::Vector3d& ubar,
                               const DynamicsParams& params) {
  const double t = params.t();
  TargetState next;
  next.p = state.p + t * state.v + 0.5 * t * t * ubar;
  next.v = state.v + t * ubar;
  return next;
}

/// Advances the relative state one step.
///
/// The relative acceleration is R * u1 - ubar; the update equals the
/// vehicle step minus the target step composed componentwise.
inline RelativeState step_relative(const RelativeState& state,
                                   const Rotation& attitude,
                                   const Eigen::Vector3d& u1,
                                   const Eigen::Vector3d& ubar,
                                   const DynamicsParams& params) {
  const double t = params.t();
  const Eigen::Vector3d accel = attitude * u1 - ubar;
  RelativeState next;
  next.q = state.q + t * state.v + 0.5 * t * t * accel;
  next.v = state.v + t * accel;
  return next;
}

}  // namespace reltrack
