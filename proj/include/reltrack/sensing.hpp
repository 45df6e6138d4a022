#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "reltrack/dynamics.hpp"
#include "reltrack/random.hpp"
#include "reltrack/so3.hpp"

namespace reltrack {

/// Lower bound applied to every reported measurement variance so that
/// downstream gain computations never divide by zero.
inline constexpr double kNoiseVarFloor = 1e-12;

/// Two range sensors mounted symmetrically about the vehicle center.
///
/// baseline_body points from sensor 2 to sensor 1 in the body frame; the
/// sensors sit at +/- baseline_body / 2 from the vehicle position. At each
/// sampling instant every sensor fires pings_per_sample pings with
/// independent noise. eta1 and eta2 are the range-noise variances of the
/// two sensors.
class SensorRig {
 public:
  SensorRig(const Eigen::Vector3d& baseline_body, int pings_per_sample,
            double eta1, double eta2)
      : baseline_body_(baseline_body),
        baseline_norm_(baseline_body.norm()),
        pings_per_sample_(pings_per_sample),
        eta1_(eta1),
        eta2_(eta2) {
    if (!(baseline_norm_ > 0.0)) {
      throw std::invalid_argument("SensorRig: baseline must be nonzero");
    }
    if (pings_per_sample < 1) {
      throw std::invalid_argument("SensorRig: pings_per_sample must be at least 1");
    }
    if (eta1 < 0.0 || eta2 < 0.0) {
      throw std::invalid_argument("SensorRig: noise variances must be nonnegative");
    }
  }

  const Eigen::Vector3d& baseline_body() const { return baseline_body_; }
  double baseline_norm() const { return baseline_norm_; }
  int pings_per_sample() const { return pings_per_sample_; }
  double eta1() const { return eta1_; }
  double eta2() const { return eta2_; }

 private:
  Eigen::Vector3d baseline_body_;
  double baseline_norm_;
  int pings_per_sample_;
  double eta1_;
  double eta2_;
};

/// Ranges one sensor collected at one sampling instant.
struct PingSet {
  std::vector<double> ranges;

  double first() const { return ranges.front(); }

  double mean_square() const {
    double sum = 0.0;
    for (double r : ranges) sum += r * r;
    return sum / static_cast<double>(ranges.size());
  }
};

/// World-frame sensor positions for the vehicle pose (p, r).
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> sensor_positions(
    const Eigen::Vector3d& p, const Rotation& r, const SensorRig& rig) {
  const Eigen::Vector3d half = 0.5 * (r * rig.baseline_body());
  return {p + half, p - half};
}

/// Collects one sampling instant of range pings from one sensor.
///
/// Each ping is the true range plus zero-mean noise of variance eta.
/// Pings that come out negative are clamped to zero rather than redrawn,
/// which keeps the number of stream draws fixed.
inline PingSet measure_ranges(const Eigen::Vector3d& sensor_pos,
                              const Eigen::Vector3d& target_pos, double eta,
                              int pings, RandomStream& rng) {
  if (pings < 1) {
    throw std::invalid_argument("measure_ranges: ping count must be at least 1");
  }
  const double truth = (target_pos - sensor_pos).norm();
  const double sigma = std::sqrt(eta);
  PingSet out;
  out.ranges.reserve(static_cast<std::size_t>(pings));
  for (int i = 0; i < pings; ++i) {
    out.ranges.push_back(std::max(truth + sigma * rng.normal(), 0.0));
  }
  return out;
}

/// Scalar measurement formed from one ping set per sensor, linear in the
/// relative state: with noiseless pings, y equals row * [q; qdot] exactly
/// for q the vehicle-minus-target position. The range noise enters y with
/// mean noise_mean and variance noise_var.
struct LinearizedMeasurement {
  double y = 0.0;
  RowVector6d row = RowVector6d::Zero();
  double noise_mean = 0.0;
  double noise_var = kNoiseVarFloor;
};

/// Forms the linearized measurement from the two sensors' ping sets.
///
/// With the sensors at +/- d/2 for d the world-frame baseline, the squared
/// ranges to the target are |q + d/2|^2 and |q - d/2|^2, so half their
/// difference is q . d: linear in q with coefficient row [d^T, 0^T]. The
/// first ping of each set provides the value; the remaining pings refine
/// only the noise variance, through the mean of squared pings. That mean
/// estimates the true squared range plus eta, so eta is subtracted before
/// it scales the noise, clamped at zero so sampling variability cannot
/// drive the variance negative. The total variance is floored at
/// kNoiseVarFloor.
inline LinearizedMeasurement linearize(const PingSet& pings1,
                                       const PingSet& pings2,
                                       const Rotation& r,
                                       const SensorRig& rig) {
  if (pings1.ranges.empty() || pings2.ranges.empty()) {
    throw std::invalid_argument("linearize: empty ping set");
  }
  const Eigen::Vector3d d = r * rig.baseline_body();
  const double d1 = pings1.first();
  const double d2 = pings2.first();
  LinearizedMeasurement out;
  out.y = 0.5 * (d1 * d1 - d2 * d2);
  out.row.head<3>() = d.transpose();
  out.noise_mean = rig.eta1() + rig.eta2();
  const double range_sq1 = std::max(pings1.mean_square() - rig.eta1(), 0.0);
  const double range_sq2 = std::max(pings2.mean_square() - rig.eta2(), 0.0);
  const double var = 2.0 * rig.eta1() * rig.eta1() +
                     2.0 * rig.eta2() * rig.eta2() +
                     4.0 * range_sq1 * rig.eta1() +
                     4.0 * range_sq2 * rig.eta2();
  out.noise_var = std::max(var, kNoiseVarFloor);
  return out;
}

}  // namespace reltrack
