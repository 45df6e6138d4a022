#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>
#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "helpers.hpp"
#include "reltrack/config.hpp"
#include "reltrack/simulation.hpp"

using reltrack::FilterState;
using reltrack::Matrix6d;
using reltrack::McAggregate;
using reltrack::MonteCarloResult;
using reltrack::RunLog;
using reltrack::RunSummary;
using reltrack::ScenarioConfig;
using reltrack::StepRecord;
using reltrack::SummaryQuantiles;
using reltrack::Vector6d;
using reltrack::make_quantiles;
using reltrack::monte_carlo;
using reltrack::run_scenario;
using testhelpers::max_abs_diff;

namespace {

bool records_equal(const StepRecord& a, const StepRecord& b) {
  return a.k == b.k && a.truth.q == b.truth.q && a.truth.v == b.truth.v &&
         a.est.q == b.est.q && a.est.v == b.est.v &&
         a.track_err == b.track_err && a.y == b.y && a.gamma == b.gamma &&
         a.pe_lambda_min == b.pe_lambda_min && a.attitude == b.attitude;
}

}  // namespace

TEST_CASE("a run is fully determined by its config") {
  ScenarioConfig cfg;
  cfg.horizon = 120;
  cfg.seed = 5;
  const auto [log_a, summary_a] = run_scenario(cfg);
  const auto [log_b, summary_b] = run_scenario(cfg);
  REQUIRE(log_a.size() == log_b.size());
  for (std::size_t i = 0; i < log_a.size(); ++i) {
    CHECK(records_equal(log_a[i], log_b[i]));
  }
  CHECK(summary_a.est_pos_rmse == summary_b.est_pos_rmse);
  CHECK(summary_a.est_vel_rmse == summary_b.est_vel_rmse);
  CHECK(summary_a.track_rmse == summary_b.track_rmse);
  CHECK(summary_a.transient_steps == summary_b.transient_steps);
  CHECK(summary_a.min_pe_lambda == summary_b.min_pe_lambda);
  CHECK(summary_a.nees_mean == summary_b.nees_mean);

  ScenarioConfig other = cfg;
  other.seed = 6;
  const auto [log_c, summary_c] = run_scenario(other);
  bool any_diff = false;
  for (std::size_t i = 0; i < log_a.size(); ++i) {
    if (!records_equal(log_a[i], log_c[i])) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("the log covers every step from zero to the horizon") {
  ScenarioConfig cfg;
  cfg.horizon = 40;
  const auto [log, summary] = run_scenario(cfg);
  REQUIRE(log.size() == 41);
  for (int k = 0; k <= 40; ++k) {
    CHECK(log[static_cast<std::size_t>(k)].k == k);
  }
  CHECK(log[0].y == 0.0);
  CHECK(log[0].gamma == 0.0);
  // The initial truth is the configured vehicle-minus-target state.
  CHECK(log[0].truth.q == Eigen::Vector3d(-1.0, -2.0, -2.0));
  CHECK(log[0].truth.v == Eigen::Vector3d(-0.02, -0.1, -0.1));
  // The filter starts at zero.
  CHECK(log[0].est.q == Eigen::Vector3d::Zero());
  CHECK(log[0].est.v == Eigen::Vector3d::Zero());
}

TEST_CASE("noiseless runs converge to machine-level estimation error") {
  ScenarioConfig cfg;
  cfg.horizon = 200;
  cfg.eta1 = 0.0;
  cfg.eta2 = 0.0;
  cfg.zero_target_accel = true;
  const auto [log, summary] = run_scenario(cfg);
  CHECK(summary.est_pos_rmse < 1e-4);
  CHECK(summary.est_vel_rmse < 1e-3);
  CHECK(summary.transient_steps < 50);
  CHECK(summary.min_pe_lambda > 0.0);
  // The loop keeps the vehicle near the rotating setpoint.
  CHECK(summary.track_rmse < 2.0);
}

TEST_CASE("the reference noisy scenario stays healthy end to end") {
  ScenarioConfig cfg;
  const auto [log, summary] = run_scenario(cfg);
  CHECK(summary.est_pos_rmse > 0.0);
  CHECK(summary.est_pos_rmse < 1.0);
  CHECK(summary.est_vel_rmse < 1.0);
  CHECK(summary.track_rmse < 3.0);
  CHECK(summary.transient_steps >= 1);
  CHECK(summary.transient_steps <= cfg.horizon);
  CHECK(summary.min_pe_lambda > 0.0);
  CHECK(summary.nees_mean > 0.01);
  CHECK(summary.nees_mean < 50.0);
  for (const StepRecord& rec : log) {
    CHECK(std::isfinite(rec.y));
    CHECK(std::isfinite(rec.gamma));
    CHECK(rec.truth.q.allFinite());
    CHECK(rec.est.q.allFinite());
  }
}

TEST_CASE("summary metrics recompute from the log and callback") {
  ScenarioConfig cfg;
  cfg.horizon = 150;
  cfg.seed = 9;
  std::vector<Matrix6d> covs;
  const auto [log, summary] = run_scenario(
      cfg, [&](int, const FilterState& fs) { covs.push_back(fs.cov); });
  REQUIRE(covs.size() == 150);

  const int steady_start = cfg.horizon - cfg.horizon / 3;
  double pos_sq = 0.0;
  double vel_sq = 0.0;
  double track_sq = 0.0;
  int count = 0;
  for (const StepRecord& rec : log) {
    if (rec.k < steady_start) continue;
    pos_sq += (rec.truth.q - rec.est.q).squaredNorm();
    vel_sq += (rec.truth.v - rec.est.v).squaredNorm();
    track_sq += rec.track_err.squaredNorm();
    ++count;
  }
  CHECK(summary.est_pos_rmse ==
        doctest::Approx(std::sqrt(pos_sq / count)).epsilon(1e-12));
  CHECK(summary.est_vel_rmse ==
        doctest::Approx(std::sqrt(vel_sq / count)).epsilon(1e-12));
  CHECK(summary.track_rmse ==
        doctest::Approx(std::sqrt(track_sq / count)).epsilon(1e-12));

  const double initial = (log[0].truth.q - log[0].est.q).norm();
  int transient = cfg.horizon + 1;
  for (const StepRecord& rec : log) {
    if ((rec.truth.q - rec.est.q).norm() < 0.1 * initial) {
      transient = rec.k;
      break;
    }
  }
  CHECK(summary.transient_steps == transient);

  double min_pe = 0.0;
  bool seen = false;
  for (const StepRecord& rec : log) {
    if (rec.k < cfg.pe_window - 1) continue;
    if (!seen || rec.pe_lambda_min < min_pe) {
      min_pe = rec.pe_lambda_min;
      seen = true;
    }
  }
  CHECK(seen);
  CHECK(summary.min_pe_lambda == min_pe);

  double nees = 0.0;
  for (int k = 1; k <= cfg.horizon; ++k) {
    const StepRecord& rec = log[static_cast<std::size_t>(k)];
    const Vector6d err = rec.truth.to_vector() - rec.est.to_vector();
    nees += err.dot(covs[static_cast<std::size_t>(k - 1)].ldlt().solve(err));
  }
  CHECK(summary.nees_mean ==
        doctest::Approx(nees / cfg.horizon).epsilon(1e-12));
}

TEST_CASE("the callback sees every posterior in order") {
  ScenarioConfig cfg;
  cfg.horizon = 25;
  std::vector<int> ks;
  run_scenario(cfg, [&](int k, const FilterState& fs) {
    ks.push_back(k);
    CHECK(max_abs_diff(fs.cov, fs.cov.transpose()) == 0.0);
    CHECK(fs.cov.allFinite());
  });
  REQUIRE(ks.size() == 25);
  for (int k = 1; k <= 25; ++k) CHECK(ks[static_cast<std::size_t>(k - 1)] == k);
}

TEST_CASE("zero initial estimation error makes the transient trivial") {
  ScenarioConfig cfg;
  cfg.horizon = 30;
  cfg.init.p = cfg.init.target_p;
  cfg.init.v = cfg.init.target_v;
  const auto [log, summary] = run_scenario(cfg);
  CHECK(summary.transient_steps == 0);
}

TEST_CASE("short runs have no full excitation window") {
  ScenarioConfig cfg;
  cfg.horizon = 50;
  cfg.pe_window = 96;
  const auto [log, summary] = run_scenario(cfg);
  CHECK(summary.min_pe_lambda == 0.0);
}

TEST_CASE("a fixed attitude never excites the baseline") {
  ScenarioConfig cfg;
  cfg.horizon = 150;
  cfg.attitude_mode = reltrack::AttitudeMode::kFixed;
  const auto [log, summary] = run_scenario(cfg);
  for (const StepRecord& rec : log) {
    CHECK(rec.attitude == Eigen::Vector3d::Zero());
  }
  CHECK(summary.min_pe_lambda < 1e-9);
}

TEST_CASE("random attitude runs excite the baseline") {
  ScenarioConfig cfg;
  cfg.horizon = 150;
  cfg.attitude_mode = reltrack::AttitudeMode::kRandom;
  const auto [log, summary] = run_scenario(cfg);
  CHECK(summary.min_pe_lambda > 0.0);
  bool attitude_moves = false;
  for (std::size_t i = 1; i < log.size(); ++i) {
    if (log[i].attitude != log[i - 1].attitude) attitude_moves = true;
  }
  CHECK(attitude_moves);
}

TEST_CASE("invalid configs are rejected before running") {
  ScenarioConfig cfg;
  cfg.horizon = 0;
  CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);
  cfg = ScenarioConfig{};
  cfg.alpha = 5.0;
  CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);
}

TEST_CASE("numerical blowups surface as errors, not silent logs") {
  ScenarioConfig cfg;
  cfg.horizon = 5;
  cfg.init.target_p = Eigen::Vector3d(1e200, 0.0, 0.0);
  CHECK_THROWS_AS(run_scenario(cfg), std::runtime_error);
}

TEST_CASE("quantiles interpolate between order statistics") {
  const SummaryQuantiles q = make_quantiles({5.0, 1.0, 3.0, 2.0, 4.0});
  CHECK(q.min == 1.0);
  CHECK(q.p25 == 2.0);
  CHECK(q.median == 3.0);
  CHECK(q.p75 == 4.0);
  CHECK(q.max == 5.0);

  const SummaryQuantiles r = make_quantiles({1.0, 2.0, 3.0, 4.0});
  CHECK(r.p25 == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(r.median == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(r.p75 == doctest::Approx(3.25).epsilon(1e-15));

  const SummaryQuantiles s = make_quantiles({7.0});
  CHECK(s.min == 7.0);
  CHECK(s.median == 7.0);
  CHECK(s.max == 7.0);
}

TEST_CASE("monte carlo batches are identical for any worker count") {
  ScenarioConfig cfg;
  cfg.horizon = 80;
  const MonteCarloResult serial = monte_carlo(cfg, 6, 100, 1);
  const MonteCarloResult parallel = monte_carlo(cfg, 6, 100, 8);
  REQUIRE(serial.seeds.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(serial.seeds[i] == 100 + i);
    CHECK(parallel.seeds[i] == serial.seeds[i]);
    CHECK(serial.summaries[i].est_pos_rmse ==
          parallel.summaries[i].est_pos_rmse);
    CHECK(serial.summaries[i].nees_mean == parallel.summaries[i].nees_mean);
    CHECK(serial.summaries[i].transient_steps ==
          parallel.summaries[i].transient_steps);
  }
  CHECK(serial.aggregate.est_pos_rmse.median ==
        parallel.aggregate.est_pos_rmse.median);
  CHECK(serial.aggregate.min_pe_lambda.min ==
        parallel.aggregate.min_pe_lambda.min);
  CHECK(serial.base_seed == 100);

  // Quantiles summarize the actual per-run values.
  std::vector<double> rmses;
  for (const RunSummary& s : serial.summaries) rmses.push_back(s.est_pos_rmse);
  const SummaryQuantiles q = make_quantiles(rmses);
  CHECK(serial.aggregate.est_pos_rmse.min == q.min);
  CHECK(serial.aggregate.est_pos_rmse.max == q.max);
  CHECK(serial.aggregate.est_pos_rmse.median == q.median);
}

TEST_CASE("monte carlo failures name the failing seed") {
  ScenarioConfig cfg;
  cfg.horizon = 5;
  cfg.init.target_p = Eigen::Vector3d(1e200, 0.0, 0.0);
  try {
    monte_carlo(cfg, 2, 31, 2);
    FAIL("expected a throw");
  } catch (const std::runtime_error& err) {
    const std::string what = err.what();
    CHECK(what.find("seed 31") != std::string::npos);
  }
  CHECK_THROWS_AS(monte_carlo(ScenarioConfig{}, 0, 1, 1),
                  std::invalid_argument);
}
