#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "reltrack/random.hpp"

namespace reltrack {

/// Skew-symmetric matrix such that skew(a) * b = a x b.
inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return s;
}

/// Rotation matrix wrapper that maintains orthonormality and det = +1.
///
/// Checked construction goes through from_matrix; all internal operations
/// (composition, inverse, exponential) produce valid members by
/// construction. orthonormalized() projects back onto the group and is
/// meant to be applied periodically in long integrations so roundoff
/// drift cannot accumulate.
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}

  static Rotation identity() { return Rotation(); }

  /// Validates orthonormality and determinant before wrapping.
  /// Throws std::invalid_argument if the matrix is not a rotation.
  static Rotation from_matrix(const Eigen::Matrix3d& m, double tol = 1e-9) {
    const double ortho_err =
        (m.transpose() * m - Eigen::Matrix3d::Identity()).norm();
    if (!m.allFinite() || ortho_err > tol || m.determinant() < 0.0) {
      throw std::invalid_argument("Rotation::from_matrix: not a rotation matrix");
    }
    return Rotation(m, Unchecked{});
  }

  const Eigen::Matrix3d& matrix() const { return m_; }

  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }

  Rotation operator*(const Rotation& other) const {
    return Rotation(m_ * other.m_, Unchecked{});
  }

  Rotation inverse() const { return Rotation(m_.transpose(), Unchecked{}); }

  /// Nearest rotation in the Frobenius sense (polar factor via SVD).
  Rotation orthonormalized() const {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        m_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) {
      u.col(2) = -u.col(2);
    }
    return Rotation(u * v.transpose(), Unchecked{});
  }

 private:
  struct Unchecked {};
  Rotation(const Eigen::Matrix3d& m, Unchecked) : m_(m) {}

  Eigen::Matrix3d m_;

  friend Rotation exp_so3(const Eigen::Vector3d&);
  friend Rotation random_rotation(RandomStream&);
};

/// Exponential map: rotation vector (axis * angle, radians) to rotation.
///
/// Rodrigues form for regular angles; below 1e-8 rad the sin/versine
/// ratios are replaced by their second-order series so the map stays
/// smooth through zero.
inline Rotation exp_so3(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  const Eigen::Matrix3d s = skew(w);
  double a = 0.0;  // sin(angle) / angle
  double b = 0.0;  // (1 - cos(angle)) / angle^2
  if (angle < 1e-8) {
    const double angle2 = angle * angle;
    a = 1.0 - angle2 / 6.0;
    b = 0.5 - angle2 / 24.0;
  } else {
    a = std::sin(angle) / angle;
    b = (1.0 - std::cos(angle)) / (angle * angle);
  }
  const Eigen::Matrix3d m = Eigen::Matrix3d::Identity() + a * s + b * s * s;
  return Rotation(m, Rotation::Unchecked{});
}

/// Logarithm map: rotation to rotation vector with angle in [0, pi].
///
/// The angle comes from atan2 of the antisymmetric-part norm against
/// (trace - 1) / 2, which is accurate over the whole range. Near pi the
/// antisymmetric part vanishes, so the axis is recovered from the
/// symmetric part instead: squared components from the diagonal of
/// (R + I) / 2, relative signs from the off-diagonal entries, and the
/// overall sign fixed by making the first component of magnitude above
/// 1e-6 positive.
inline Eigen::Vector3d log_so3(const Rotation& r) {
  const Eigen::Matrix3d& m = r.matrix();
  Eigen::Vector3d vee(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  vee *= 0.5;
  const double sin_angle = vee.norm();
  const double cos_angle =
      std::clamp(0.5 * (m.trace() - 1.0), -1.0, 1.0);
  const double angle = std::atan2(sin_angle, cos_angle);

  if (angle < 1e-8) {
    // angle / sin(angle) to second order.
    return vee * (1.0 + angle * angle / 6.0);
  }
  if (angle > M_PI - 1e-6) {
    const double cos_half_sq = 0.5 * (1.0 + cos_angle);
    const double sin_half_sq = std::max(1.0 - cos_half_sq, 1e-300);
    Eigen::Vector3d axis;
    for (int i = 0; i < 3; ++i) {
      const double diag = 0.5 * (m(i, i) + 1.0);
      axis[i] = std::sqrt(std::max(diag - cos_half_sq, 0.0) / sin_half_sq);
    }
    int lead = 0;
    axis.maxCoeff(&lead);
    const double versine = 1.0 - cos_angle;
    for (int i = 0; i < 3; ++i) {
      if (i == lead) continue;
      const double sym = 0.5 * (m(lead, i) + m(i, lead)) / versine;
      if (sym < 0.0) axis[i] = -axis[i];
    }
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-6) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
    axis.normalize();
    return angle * axis;
  }
  return vee * (angle / sin_angle);
}

/// Rotation drawn from the uniform (Haar) distribution on SO(3).
///
/// A 4-vector of independent standard normals, normalized, is a uniform
/// unit quaternion; the draw is rejected and retried while its norm is
/// too small to normalize safely.
inline Rotation random_rotation(RandomStream& rng) {
  Eigen::Vector4d quat;
  double norm = 0.0;
  do {
    for (int i = 0; i < 4; ++i) quat[i] = rng.normal();
    norm = quat.norm();
  } while (norm < 1e-12);
  quat /= norm;
  const double w = quat[0];
  const double x = quat[1];
  const double y = quat[2];
  const double z = quat[3];
  Eigen::Matrix3d m;
  m << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return Rotation(m, Rotation::Unchecked{});
}

}  // namespace reltrack
