#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "reltrack/config.hpp"
#include "reltrack/control.hpp"
#include "reltrack/dynamics.hpp"
#include "reltrack/estimator.hpp"
#include "reltrack/observability.hpp"
#include "reltrack/random.hpp"
#include "reltrack/sensing.hpp"
#include "reltrack/so3.hpp"

namespace reltrack {

/// Everything logged about one step of a run.
struct StepRecord {
  int k = 0;
  RelativeState truth;
  RelativeState est;
  Eigen::Vector3d track_err = Eigen::Vector3d::Zero();
  double y = 0.0;
  double gamma = 0.0;
  double pe_lambda_min = 0.0;
  Eigen::Vector3d attitude = Eigen::Vector3d::Zero();
};

using RunLog = std::vector<StepRecord>;

/// Scalar metrics of one run. The steady-state window is the final third
/// of the horizon; the transient length is the first step at which the
/// position estimation error drops below 10% of its initial value
/// (horizon + 1 when that never happens, 0 when the initial error is
/// already zero). min_pe_lambda is taken over full trailing windows only.
struct RunSummary {
  double est_pos_rmse = 0.0;
  double est_vel_rmse = 0.0;
  double track_rmse = 0.0;
  int transient_steps = 0;
  double min_pe_lambda = 0.0;
  double nees_mean = 0.0;
};

/// Called after each filter update with the step index and the posterior.
using StepCallback = std::function<void(int, const FilterState&)>;

namespace detail {

inline void require_finite(bool ok, int k) {
  if (!ok) {
    throw std::runtime_error("run_scenario: non-finite state at step " +
                             std::to_string(k));
  }
}

}  // namespace detail

/// Runs the closed loop for cfg.horizon steps and returns the per-step log
/// plus summary metrics.
///
/// Per step k >= 1, in order: the attitude command is computed from the
/// state of step k-1 (the deterministic trajectory targets its curve at
/// index k-1, so the attitude reached at k tracks that point); the
/// tracking acceleration comes from the current estimate; truth propagates
/// with a freshly sampled target acceleration; both sensors ping the new
/// geometry; and the filter predicts with the control actually applied
/// over the step before absorbing the measurement. Draws follow a fixed
/// order (attitude, target acceleration, sensor 1 pings, sensor 2 pings),
/// so a seed fully determines the run. The attitude matrix is
/// re-orthonormalized every step to stop roundoff drift from compounding.
inline std::pair<RunLog, RunSummary> run_scenario(const ScenarioConfig& cfg,
                                                  const StepCallback& on_step) {
  validate_config(cfg);
  const DynamicsParams dynamics(cfg.t);
  const TargetNoise noise(cfg.target_accel_cov);
  const SensorRig rig(cfg.baseline_body, cfg.pings_per_sample, cfg.eta1,
                      cfg.eta2);
  const TrackingParams tracking(cfg.alpha, cfg.setpoint_body, cfg.t,
                                cfg.allow_unstable_alpha);
  const bool use_trajectory = cfg.attitude_mode == AttitudeMode::kTrajectory;
  const TrajectoryParams trajectory =
      use_trajectory ? make_trajectory_params(cfg)
                     : TrajectoryParams(1.0, [](int) { return 0.0; }, 1.0);

  RandomStream rng(cfg.seed);
  BodyState vehicle{cfg.init.p, cfg.init.v};
  TargetState target{cfg.init.target_p, cfg.init.target_v};
  Rotation attitude = exp_so3(cfg.init.attitude_axis_angle);
  FilterState filter;
  filter.cov = cfg.xi0_scale * Matrix6d::Identity();

  const std::size_t window =
      static_cast<std::size_t>(std::max(cfg.pe_window, 1));
  std::deque<Eigen::Vector3d> baselines;
  RunLog log;
  log.reserve(static_cast<std::size_t>(cfg.horizon) + 1);
  double nees_sum = 0.0;

  const auto record_step = [&](int k, double y, double gamma) {
    baselines.push_back(attitude * cfg.baseline_body);
    if (baselines.size() > window) baselines.pop_front();
    const PEReport pe =
        pe_gram(std::vector<Eigen::Vector3d>(baselines.begin(),
                                             baselines.end()));
    StepRecord rec;
    rec.k = k;
    rec.truth = RelativeState{vehicle.p - target.p, vehicle.v - target.v};
    rec.est = filter.est;
    rec.track_err = tracking_error(rec.truth.q, attitude, tracking).e;
    rec.y = y;
    rec.gamma = gamma;
    rec.pe_lambda_min = pe.lambda_min;
    rec.attitude = log_so3(attitude);
    const bool finite = rec.truth.q.allFinite() && rec.truth.v.allFinite() &&
                        rec.est.q.allFinite() && rec.est.v.allFinite() &&
                        rec.track_err.allFinite() && std::isfinite(rec.y) &&
                        std::isfinite(rec.gamma) &&
                        std::isfinite(rec.pe_lambda_min) &&
                        rec.attitude.allFinite() && filter.cov.allFinite();
    detail::require_finite(finite, k);
    log.push_back(std::move(rec));
  };

  record_step(0, 0.0, 0.0);

  for (int k = 1; k <= cfg.horizon; ++k) {
    AttitudeCommand command;
    switch (cfg.attitude_mode) {
      case AttitudeMode::kRandom:
        command = attitude_random_step(attitude, cfg.t, rng);
        break;
      case AttitudeMode::kTrajectory:
        command = attitude_trajectory_step(attitude, k - 1, cfg.baseline_body,
                                           trajectory, cfg.t);
        break;
      case AttitudeMode::kFixed:
        command.u2.setZero();
        command.target = attitude;
        break;
    }
    const Eigen::Vector3d u1 = tracking_accel(attitude, filter.est, tracking);
    const Eigen::Vector3d ubar = cfg.zero_target_accel
                                     ? Eigen::Vector3d::Zero().eval()
                                     : sample_target_accel(noise, rng);

    const Rotation attitude_prev = attitude;
    auto [vehicle_next, attitude_next] =
        step_uuv(vehicle, attitude, u1, command.u2, dynamics);
    vehicle = vehicle_next;
    attitude = attitude_next.orthonormalized();
    target = step_target(target, ubar, dynamics);

    const auto [pos1, pos2] = sensor_positions(vehicle.p, attitude, rig);
    const PingSet pings1 =
        measure_ranges(pos1, target.p, cfg.eta1, cfg.pings_per_sample, rng);
    const PingSet pings2 =
        measure_ranges(pos2, target.p, cfg.eta2, cfg.pings_per_sample, rng);
    const LinearizedMeasurement meas = linearize(pings1, pings2, attitude, rig);

    const Prediction pred = predict(filter, attitude_prev, u1, noise, dynamics);
    filter = update(pred, meas);
    if (on_step) on_step(k, filter);

    record_step(k, meas.y, meas.noise_var);

    const Vector6d err =
        log.back().truth.to_vector() - log.back().est.to_vector();
    const Vector6d solved = filter.cov.ldlt().solve(err);
    nees_sum += err.dot(solved);
  }

  RunSummary summary;
  const int steady_start = cfg.horizon - cfg.horizon / 3;
  double pos_sq = 0.0;
  double vel_sq = 0.0;
  double track_sq = 0.0;
  int steady_count = 0;
  for (const StepRecord& rec : log) {
    if (rec.k < steady_start) continue;
    pos_sq += (rec.truth.q - rec.est.q).squaredNorm();
    vel_sq += (rec.truth.v - rec.est.v).squaredNorm();
    track_sq += rec.track_err.squaredNorm();
    ++steady_count;
  }
  summary.est_pos_rmse = std::sqrt(pos_sq / steady_count);
  summary.est_vel_rmse = std::sqrt(vel_sq / steady_count);
  summary.track_rmse = std::sqrt(track_sq / steady_count);

  const double initial_err = (log.front().truth.q - log.front().est.q).norm();
  summary.transient_steps = 0;
  if (initial_err > 0.0) {
    summary.transient_steps = cfg.horizon + 1;
    for (const StepRecord& rec : log) {
      if ((rec.truth.q - rec.est.q).norm() < 0.1 * initial_err) {
        summary.transient_steps = rec.k;
        break;
      }
    }
  }

  summary.min_pe_lambda = 0.0;
  bool have_full_window = false;
  for (const StepRecord& rec : log) {
    if (rec.k < cfg.pe_window - 1) continue;
    if (!have_full_window || rec.pe_lambda_min < summary.min_pe_lambda) {
      summary.min_pe_lambda = rec.pe_lambda_min;
      have_full_window = true;
    }
  }

  summary.nees_mean = nees_sum / static_cast<double>(cfg.horizon);
  return {std::move(log), summary};
}

inline std::pair<RunLog, RunSummary> run_scenario(const ScenarioConfig& cfg) {
  return run_scenario(cfg, StepCallback());
}

/// Five-point summary of one metric across runs. Quantiles interpolate
/// linearly between order statistics.
struct SummaryQuantiles {
  double min = 0.0;
  double p25 = 0.0;
  double median = 0.0;
  double p75 = 0.0;
  double max = 0.0;
};

inline SummaryQuantiles make_quantiles(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto at = [&](double fraction) {
    const double pos = fraction * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  SummaryQuantiles q;
  q.min = values.front();
  q.p25 = at(0.25);
  q.median = at(0.5);
  q.p75 = at(0.75);
  q.max = values.back();
  return q;
}

/// Quantiles of every RunSummary field across a Monte Carlo batch.
struct McAggregate {
  SummaryQuantiles est_pos_rmse;
  SummaryQuantiles est_vel_rmse;
  SummaryQuantiles track_rmse;
  SummaryQuantiles transient_steps;
  SummaryQuantiles min_pe_lambda;
  SummaryQuantiles nees_mean;
};

struct MonteCarloResult {
  std::uint64_t base_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<RunSummary> summaries;
  McAggregate aggregate;
};

/// Runs the scenario under seeds base_seed .. base_seed + n_runs - 1 and
/// aggregates the summaries.
///
/// Runs share nothing but the config, so they fan out across workers
/// (hardware concurrency by default); summaries are indexed by seed before
/// aggregation, which makes the result identical for any worker count. If
/// several runs fail, the failure of the lowest seed is reported.
inline MonteCarloResult monte_carlo(const ScenarioConfig& cfg, int n_runs,
                                    std::uint64_t base_seed, int workers = 0) {
  if (n_runs < 1) {
    throw std::invalid_argument("monte_carlo: n_runs must be at least 1");
  }
  MonteCarloResult result;
  result.base_seed = base_seed;
  result.seeds.resize(static_cast<std::size_t>(n_runs));
  result.summaries.resize(static_cast<std::size_t>(n_runs));
  std::vector<std::exception_ptr> failures(
      static_cast<std::size_t>(n_runs));

  int thread_count = workers > 0
                         ? workers
                         : static_cast<int>(std::thread::hardware_concurrency());
  thread_count = std::clamp(thread_count, 1, n_runs);

  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (int i = next.fetch_add(1); i < n_runs; i = next.fetch_add(1)) {
      const std::size_t idx = static_cast<std::size_t>(i);
      ScenarioConfig run_cfg = cfg;
      run_cfg.seed = base_seed + static_cast<std::uint64_t>(i);
      result.seeds[idx] = run_cfg.seed;
      try {
        result.summaries[idx] = run_scenario(run_cfg).second;
      } catch (...) {
        failures[idx] = std::current_exception();
      }
    }
  };

  if (thread_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  for (int i = 0; i < n_runs; ++i) {
    if (failures[static_cast<std::size_t>(i)]) {
      try {
        std::rethrow_exception(failures[static_cast<std::size_t>(i)]);
      } catch (const std::exception& e) {
        throw std::runtime_error(
            "monte_carlo: run with seed " +
            std::to_string(base_seed + static_cast<std::uint64_t>(i)) +
            " failed: " + e.what());
      }
    }
  }

  const auto collect = [&](const std::function<double(const RunSummary&)>& f) {
    std::vector<double> values;
    values.reserve(result.summaries.size());
    for (const RunSummary& s : result.summaries) values.push_back(f(s));
    return make_quantiles(std::move(values));
  };
  result.aggregate.est_pos_rmse =
      collect([](const RunSummary& s) { return s.est_pos_rmse; });
  result.aggregate.est_vel_rmse =
      collect([](const RunSummary& s) { return s.est_vel_rmse; });
  result.aggregate.track_rmse =
      collect([](const RunSummary& s) { return s.track_rmse; });
  result.aggregate.transient_steps = collect(
      [](const RunSummary& s) { return static_cast<double>(s.transient_steps); });
  result.aggregate.min_pe_lambda =
      collect([](const RunSummary& s) { return s.min_pe_lambda; });
  result.aggregate.nees_mean =
      collect([](const RunSummary& s) { return s.nees_mean; });
  return result;
}

}  // namespace reltrack
