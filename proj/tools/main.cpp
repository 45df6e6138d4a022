#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reltrack/reltrack.hpp"

namespace {

void emit_error(const std::string& message, const std::string& kind) {
  const nlohmann::json err = {{"error", message}, {"kind", kind}};
  std::cerr << err.dump() << "\n";
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const std::invalid_argument& e) {
    emit_error(e.what(), "config");
    return 2;
  } catch (const std::exception& e) {
    emit_error(e.what(), "runtime");
    return 3;
  }
}

std::string output_path(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

/// Rebuilds the attitude schedule a config would produce, without any
/// measurement or target noise draws, and returns the world-frame
/// baseline vector at each step.
std::vector<Eigen::Vector3d> generate_baselines(
    const reltrack::ScenarioConfig& cfg) {
  reltrack::RandomStream rng(cfg.seed);
  const bool use_trajectory =
      cfg.attitude_mode == reltrack::AttitudeMode::kTrajectory;
  const reltrack::TrajectoryParams trajectory =
      use_trajectory
          ? reltrack::make_trajectory_params(cfg)
          : reltrack::TrajectoryParams(1.0, [](int) { return 0.0; }, 1.0);
  reltrack::Rotation attitude =
      reltrack::exp_so3(cfg.init.attitude_axis_angle);
  std::vector<Eigen::Vector3d> baselines;
  baselines.reserve(static_cast<std::size_t>(cfg.horizon) + 1);
  baselines.push_back(attitude * cfg.baseline_body);
  for (int k = 1; k <= cfg.horizon; ++k) {
    reltrack::AttitudeCommand command;
    switch (cfg.attitude_mode) {
      case reltrack::AttitudeMode::kRandom:
        command = reltrack::attitude_random_step(attitude, cfg.t, rng);
        break;
      case reltrack::AttitudeMode::kTrajectory:
        command = reltrack::attitude_trajectory_step(
            attitude, k - 1, cfg.baseline_body, trajectory, cfg.t);
        break;
      case reltrack::AttitudeMode::kFixed:
        command.u2.setZero();
        command.target = attitude;
        break;
    }
    attitude = (reltrack::exp_so3(cfg.t * command.u2) * attitude)
                   .orthonormalized();
    baselines.push_back(attitude * cfg.baseline_body);
  }
  return baselines;
}

std::vector<Eigen::Vector3d> baselines_from_log(
    const reltrack::RunLog& log, const Eigen::Vector3d& baseline_body) {
  std::vector<Eigen::Vector3d> baselines;
  baselines.reserve(log.size());
  for (const reltrack::StepRecord& rec : log) {
    baselines.push_back(reltrack::exp_so3(rec.attitude) * baseline_body);
  }
  return baselines;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-only relative state estimation and tracking simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string format = "csv";
  std::string log_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int runs = 0;
  int workers = 0;
  int window_override = 0;
  double alpha = 0.0;

  CLI::App* run_cmd = app.add_subcommand("run", "Run one scenario and export its log");
  run_cmd->add_option("--config", config_path, "Scenario config file")->required();
  run_cmd->add_option("--seed", seed, "Override the config seed")
      ->each([&](const std::string&) { seed_given = true; });
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--format", format, "Log format")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* mc_cmd = app.add_subcommand("mc", "Run a Monte Carlo batch");
  mc_cmd->add_option("--config", config_path, "Scenario config file")->required();
  mc_cmd->add_option("--runs", runs, "Number of runs")->required();
  mc_cmd->add_option("--seed", seed, "Base seed (default: config seed)")
      ->each([&](const std::string&) { seed_given = true; });
  mc_cmd->add_option("--workers", workers, "Worker threads (0 = hardware)");
  mc_cmd->add_option("--out", out_dir, "Output directory");
  mc_cmd->add_option("--format", format, "Per-run table format")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* pe_cmd = app.add_subcommand(
      "check-pe",
      "Report excitation and observability over sliding windows, from a "
      "recorded log or a generated attitude schedule");
  pe_cmd->add_option("--config", config_path, "Scenario config file")->required();
  pe_cmd->add_option("--log", log_path, "Recorded run log (.csv or .json)");
  pe_cmd->add_option("--window", window_override, "Window length override");

  CLI::App* gate_cmd =
      app.add_subcommand("gate", "Evaluate the tracking-gain stability gate");
  gate_cmd->add_option("--alpha", alpha, "Candidate gain")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);
    }
    emit_error(e.what(), "usage");
    return 1;
  }

  if (run_cmd->parsed()) {
    return run_guarded([&] {
      reltrack::ScenarioConfig cfg = reltrack::load_config_file(config_path);
      if (seed_given) cfg.seed = seed;
      const auto [log, summary] = reltrack::run_scenario(cfg);
      const std::string name =
          "run_seed_" + std::to_string(cfg.seed) + "." + format;
      const std::string path = output_path(out_dir, name);
      reltrack::export_run_log(log, format, path);
      nlohmann::json out = {{"seed", cfg.seed},
                            {"log_path", path},
                            {"summary", reltrack::summary_to_json(summary)}};
      std::cout << out.dump(2) << "\n";
    });
  }

  if (mc_cmd->parsed()) {
    return run_guarded([&] {
      reltrack::ScenarioConfig cfg = reltrack::load_config_file(config_path);
      const std::uint64_t base_seed = seed_given ? seed : cfg.seed;
      const reltrack::MonteCarloResult mc =
          reltrack::monte_carlo(cfg, runs, base_seed, workers);
      const std::string name = "mc_seed_" + std::to_string(base_seed) +
                               "_runs_" + std::to_string(runs) + "." + format;
      const std::string path = output_path(out_dir, name);
      if (format == "json") {
        reltrack::write_text_file(
            path, reltrack::monte_carlo_to_json(mc).dump(2) + "\n");
      } else {
        std::string table =
            "seed,est_pos_rmse,est_vel_rmse,track_rmse,transient_steps,"
            "min_pe_lambda,nees_mean\n";
        for (std::size_t i = 0; i < mc.summaries.size(); ++i) {
          const reltrack::RunSummary& s = mc.summaries[i];
          table += std::to_string(mc.seeds[i]);
          table += "," + reltrack::format_double(s.est_pos_rmse);
          table += "," + reltrack::format_double(s.est_vel_rmse);
          table += "," + reltrack::format_double(s.track_rmse);
          table += "," + std::to_string(s.transient_steps);
          table += "," + reltrack::format_double(s.min_pe_lambda);
          table += "," + reltrack::format_double(s.nees_mean);
          table += "\n";
        }
        reltrack::write_text_file(path, table);
      }
      nlohmann::json out = {
          {"base_seed", mc.base_seed},
          {"runs", runs},
          {"table_path", path},
          {"aggregate",
           reltrack::monte_carlo_to_json(mc).at("aggregate")}};
      std::cout << out.dump(2) << "\n";
    });
  }

  if (pe_cmd->parsed()) {
    return run_guarded([&] {
      const reltrack::ScenarioConfig cfg =
          reltrack::load_config_file(config_path);
      std::vector<Eigen::Vector3d> baselines;
      if (!log_path.empty()) {
        const std::string text = reltrack::read_text_file(log_path);
        const reltrack::RunLog log =
            log_path.size() > 5 &&
                    log_path.substr(log_path.size() - 5) == ".json"
                ? reltrack::run_log_from_json(nlohmann::json::parse(text))
                : reltrack::run_log_from_csv(text);
        baselines = baselines_from_log(log, cfg.baseline_body);
      } else {
        baselines = generate_baselines(cfg);
      }
      const int window = window_override > 0 ? window_override : cfg.pe_window;
      if (static_cast<int>(baselines.size()) < window) {
        throw std::invalid_argument(
            "check-pe: window of " + std::to_string(window) +
            " exceeds schedule length " + std::to_string(baselines.size()));
      }
      const reltrack::DynamicsParams dynamics(cfg.t);
      bool all_satisfied = true;
      int worst_start = 0;
      reltrack::PEReport worst;
      bool first = true;
      for (std::size_t start = 0;
           start + static_cast<std::size_t>(window) <= baselines.size();
           ++start) {
        const std::vector<Eigen::Vector3d> slice(
            baselines.begin() + static_cast<std::ptrdiff_t>(start),
            baselines.begin() + static_cast<std::ptrdiff_t>(start) + window);
        const reltrack::PEReport report = reltrack::pe_gram(slice);
        all_satisfied = all_satisfied && report.satisfied;
        if (first || report.lambda_min < worst.lambda_min) {
          worst = report;
          worst_start = static_cast<int>(start);
          first = false;
        }
      }
      std::vector<Eigen::MatrixXd> rows;
      rows.reserve(static_cast<std::size_t>(window));
      for (int m = 0; m < window; ++m) {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 6);
        c.block<1, 3>(0, 0) =
            baselines[static_cast<std::size_t>(worst_start + m)].transpose();
        rows.push_back(std::move(c));
      }
      const reltrack::GramianReport gram =
          reltrack::obs_gramian(dynamics, rows);
      const nlohmann::json out = {
          {"window", window},
          {"windows_checked",
           static_cast<int>(baselines.size()) - window + 1},
          {"all_windows_satisfied", all_satisfied},
          {"worst_window",
           {{"start", worst_start},
            {"pe",
             {{"lambda_min", worst.lambda_min},
              {"lambda_max", worst.lambda_max},
              {"a_hat", worst.a_hat},
              {"a_check", worst.a_check},
              {"satisfied", worst.satisfied}}},
            {"gramian",
             {{"lambda_min", gram.lambda_min},
              {"lambda_max", gram.lambda_max},
              {"satisfied", gram.satisfied}}}}}};
      std::cout << out.dump(2) << "\n";
    });
  }

  return run_guarded([&] {
    const reltrack::LyapunovGate gate = reltrack::lyapunov_drift(alpha);
    const nlohmann::json out = {
        {"alpha", alpha},
        {"coeff", gate.coeff},
        {"stable", gate.stable},
        {"stable_interval",
         {{"lower", reltrack::kAlphaLower}, {"upper", reltrack::kAlphaUpper}}}};
    std::cout << out.dump(2) << "\n";
  });
}
