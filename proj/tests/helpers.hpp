#pragma once

#include <cmath>

#include <Eigen/Core>

#include "reltrack/random.hpp"

namespace testhelpers {

/// Independent rotation construction: axis-angle to unit quaternion to
/// matrix, sharing no code with the Rodrigues implementation under test.
inline Eigen::Matrix3d quaternion_rotation(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d axis = w / angle;
  const double qw = std::cos(0.5 * angle);
  const double qx = std::sin(0.5 * angle) * axis.x();
  const double qy = std::sin(0.5 * angle) * axis.y();
  const double qz = std::sin(0.5 * angle) * axis.z();
  Eigen::Matrix3d m;
  m << 1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qw * qz),
      2 * (qx * qz + qw * qy), 2 * (qx * qy + qw * qz),
      1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qw * qx),
      2 * (qx * qz - qw * qy), 2 * (qy * qz + qw * qx),
      1 - 2 * (qx * qx + qy * qy);
  return m;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Uniform vector with each component in [lo, hi).
inline Eigen::Vector3d uniform_vec3(reltrack::RandomStream& rng, double lo,
                                    double hi) {
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) v[i] = lo + (hi - lo) * rng.uniform();
  return v;
}

}  // namespace testhelpers
