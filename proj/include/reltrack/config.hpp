#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "reltrack/control.hpp"
#include "reltrack/dynamics.hpp"
#include "reltrack/random.hpp"
#include "reltrack/sensing.hpp"
#include "reltrack/so3.hpp"

namespace reltrack {

enum class AttitudeMode { kRandom, kTrajectory, kFixed };

inline std::string to_string(AttitudeMode mode) {
  switch (mode) {
    case AttitudeMode::kRandom: return "random";
    case AttitudeMode::kTrajectory: return "trajectory";
    case AttitudeMode::kFixed: return "fixed";
  }
  throw std::invalid_argument("to_string: bad attitude mode");
}

inline AttitudeMode attitude_mode_from_string(const std::string& s) {
  if (s == "random") return AttitudeMode::kRandom;
  if (s == "trajectory") return AttitudeMode::kTrajectory;
  if (s == "fixed") return AttitudeMode::kFixed;
  throw std::invalid_argument(
      "config key 'attitude_mode' must be one of random, trajectory, fixed");
}

/// Vertical component of the excitation trajectory, selected by type:
/// a cosine amplitude * cos(frequency * k * pi), the constant zero, or
/// independent Gaussian noise of standard deviation sigma per step.
struct VerticalProfile {
  enum class Kind { kCosine, kZero, kNoise };
  Kind kind = Kind::kCosine;
  double amplitude = 0.5;
  double frequency = 1.0 / 6.0;
  double sigma = 0.0;

  bool operator==(const VerticalProfile&) const = default;
};

/// Initial truth state: vehicle, target, and the vehicle attitude as an
/// axis-angle rotation vector.
struct InitialConditions {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d target_p = Eigen::Vector3d(1.0, 2.0, 2.0);
  Eigen::Vector3d target_v = Eigen::Vector3d(0.02, 0.1, 0.1);
  Eigen::Vector3d attitude_axis_angle = Eigen::Vector3d::Zero();
};

/// Full scenario description. The defaults reproduce the reference
/// tracking scenario: 0.5 s steps, anisotropic target acceleration noise,
/// two sonars on a (-1, 1, 0) baseline, setpoint (-2, -2, 0), gain 1.2,
/// and the deterministic excitation trajectory.
struct ScenarioConfig {
  double t = 0.5;
  int horizon = 600;
  std::uint64_t seed = 1;
  Eigen::Matrix3d target_accel_cov =
      Eigen::Vector3d(0.004, 0.001, 0.001).asDiagonal();
  double eta1 = 0.01;
  double eta2 = 0.01;
  int pings_per_sample = 1;
  Eigen::Vector3d baseline_body = Eigen::Vector3d(-1.0, 1.0, 0.0);
  Eigen::Vector3d setpoint_body = Eigen::Vector3d(-2.0, -2.0, 0.0);
  double alpha = 1.2;
  AttitudeMode attitude_mode = AttitudeMode::kTrajectory;
  double rho = 1.0 / 24.0;
  VerticalProfile h;
  InitialConditions init;
  double xi0_scale = 10.0;
  int pe_window = 96;
  bool allow_unstable_alpha = false;
  bool zero_target_accel = false;
};

inline bool operator==(const InitialConditions& a, const InitialConditions& b) {
  return a.p == b.p && a.v == b.v && a.target_p == b.target_p &&
         a.target_v == b.target_v &&
         a.attitude_axis_angle == b.attitude_axis_angle;
}

inline bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  return a.t == b.t && a.horizon == b.horizon && a.seed == b.seed &&
         a.target_accel_cov == b.target_accel_cov && a.eta1 == b.eta1 &&
         a.eta2 == b.eta2 && a.pings_per_sample == b.pings_per_sample &&
         a.baseline_body == b.baseline_body &&
         a.setpoint_body == b.setpoint_body && a.alpha == b.alpha &&
         a.attitude_mode == b.attitude_mode && a.rho == b.rho && a.h == b.h &&
         a.init == b.init && a.xi0_scale == b.xi0_scale &&
         a.pe_window == b.pe_window &&
         a.allow_unstable_alpha == b.allow_unstable_alpha &&
         a.zero_target_accel == b.zero_target_accel;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed,
                                const std::string& scope) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("config: unknown key '" + scope + item.key() +
                                  "'");
    }
  }
}

inline double get_number(const nlohmann::json& j, const std::string& key,
                         double fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (!v.is_number()) {
    throw std::invalid_argument("config key '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline int get_int(const nlohmann::json& j, const std::string& key,
                   int fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (!v.is_number_integer()) {
    throw std::invalid_argument("config key '" + key + "' must be an integer");
  }
  return v.get<int>();
}

inline std::uint64_t get_u64(const nlohmann::json& j, const std::string& key,
                             std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0)) {
    throw std::invalid_argument("config key '" + key +
                                "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

inline bool get_bool(const nlohmann::json& j, const std::string& key,
                     bool fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (!v.is_boolean()) {
    throw std::invalid_argument("config key '" + key + "' must be a boolean");
  }
  return v.get<bool>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& key,
                              const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (!v.is_string()) {
    throw std::invalid_argument("config key '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

inline Eigen::Vector3d get_vec3(const nlohmann::json& j, const std::string& key,
                                const Eigen::Vector3d& fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) {
    throw std::invalid_argument("config key '" + key +
                                "' must be an array of 3 numbers");
  }
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) {
      throw std::invalid_argument("config key '" + key +
                                  "' must be an array of 3 numbers");
    }
    out[i] = v[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

inline Eigen::Matrix3d get_mat3(const nlohmann::json& j, const std::string& key,
                                const Eigen::Matrix3d& fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) {
    throw std::invalid_argument("config key '" + key +
                                "' must be a 3x3 array of numbers");
  }
  Eigen::Matrix3d out;
  for (int r = 0; r < 3; ++r) {
    const nlohmann::json& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 3) {
      throw std::invalid_argument("config key '" + key +
                                  "' must be a 3x3 array of numbers");
    }
    for (int c = 0; c < 3; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) {
        throw std::invalid_argument("config key '" + key +
                                    "' must be a 3x3 array of numbers");
      }
      out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return out;
}

inline nlohmann::json vec3_to_json(const Eigen::Vector3d& v) {
  return nlohmann::json::array({v.x(), v.y(), v.z()});
}

inline nlohmann::json mat3_to_json(const Eigen::Matrix3d& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back(nlohmann::json::array({m(r, 0), m(r, 1), m(r, 2)}));
  }
  return rows;
}

}  // namespace detail

/// Validates the semantic invariants of a config by constructing every
/// derived object that enforces them. Throws std::invalid_argument with
/// the offending key or constraint.
inline void validate_config(const ScenarioConfig& cfg) {
  if (cfg.horizon < 1) {
    throw std::invalid_argument("config key 'horizon' must be at least 1");
  }
  if (cfg.pe_window < 1) {
    throw std::invalid_argument("config key 'pe_window' must be at least 1");
  }
  if (!(cfg.xi0_scale >= 0.0)) {
    throw std::invalid_argument("config key 'xi0_scale' must be nonnegative");
  }
  if (cfg.h.kind == VerticalProfile::Kind::kNoise && cfg.h.sigma < 0.0) {
    throw std::invalid_argument("config key 'h.sigma' must be nonnegative");
  }
  DynamicsParams dynamics(cfg.t);
  TargetNoise noise(cfg.target_accel_cov);
  SensorRig rig(cfg.baseline_body, cfg.pings_per_sample, cfg.eta1, cfg.eta2);
  TrackingParams tracking(cfg.alpha, cfg.setpoint_body, cfg.t,
                          cfg.allow_unstable_alpha);
  if (cfg.attitude_mode == AttitudeMode::kTrajectory && cfg.rho == 0.0) {
    throw std::invalid_argument(
        "config key 'rho' must be nonzero in trajectory attitude mode");
  }
}

/// Parses and validates a config document. Omitted keys take the scenario
/// defaults; unknown keys are rejected by name.
inline ScenarioConfig load_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("config: document must be an object");
  }
  detail::reject_unknown_keys(
      j,
      {"t", "horizon", "seed", "target_accel_cov", "eta1", "eta2",
       "pings_per_sample", "baseline_body", "setpoint_body", "alpha",
       "attitude_mode", "rho", "h", "init", "xi0_scale", "pe_window",
       "allow_unstable_alpha", "zero_target_accel"},
      "");

  ScenarioConfig cfg;
  cfg.t = detail::get_number(j, "t", cfg.t);
  cfg.horizon = detail::get_int(j, "horizon", cfg.horizon);
  cfg.seed = detail::get_u64(j, "seed", cfg.seed);
  cfg.target_accel_cov =
      detail::get_mat3(j, "target_accel_cov", cfg.target_accel_cov);
  cfg.eta1 = detail::get_number(j, "eta1", cfg.eta1);
  cfg.eta2 = detail::get_number(j, "eta2", cfg.eta2);
  cfg.pings_per_sample =
      detail::get_int(j, "pings_per_sample", cfg.pings_per_sample);
  cfg.baseline_body = detail::get_vec3(j, "baseline_body", cfg.baseline_body);
  cfg.setpoint_body = detail::get_vec3(j, "setpoint_body", cfg.setpoint_body);
  cfg.alpha = detail::get_number(j, "alpha", cfg.alpha);
  cfg.attitude_mode =
      attitude_mode_from_string(detail::get_string(
          j, "attitude_mode", to_string(cfg.attitude_mode)));
  cfg.rho = detail::get_number(j, "rho", cfg.rho);

  if (j.contains("h")) {
    const nlohmann::json& h = j.at("h");
    if (!h.is_object()) {
      throw std::invalid_argument("config key 'h' must be an object");
    }
    detail::reject_unknown_keys(
        h, {"type", "amplitude", "frequency", "sigma"}, "h.");
    const std::string type = detail::get_string(h, "type", "cosine");
    if (type == "cosine") {
      cfg.h.kind = VerticalProfile::Kind::kCosine;
      cfg.h.amplitude = detail::get_number(h, "amplitude", cfg.h.amplitude);
      cfg.h.frequency = detail::get_number(h, "frequency", cfg.h.frequency);
      cfg.h.sigma = 0.0;
    } else if (type == "zero") {
      cfg.h.kind = VerticalProfile::Kind::kZero;
      cfg.h.amplitude = 0.0;
      cfg.h.frequency = 0.0;
      cfg.h.sigma = 0.0;
    } else if (type == "noise") {
      cfg.h.kind = VerticalProfile::Kind::kNoise;
      cfg.h.amplitude = 0.0;
      cfg.h.frequency = 0.0;
      cfg.h.sigma = detail::get_number(h, "sigma", 0.1);
    } else {
      throw std::invalid_argument(
          "config key 'h.type' must be one of cosine, zero, noise");
    }
  }

  if (j.contains("init")) {
    const nlohmann::json& init = j.at("init");
    if (!init.is_object()) {
      throw std::invalid_argument("config key 'init' must be an object");
    }
    detail::reject_unknown_keys(
        init, {"p", "v", "target_p", "target_v", "attitude_axis_angle"},
        "init.");
    cfg.init.p = detail::get_vec3(init, "p", cfg.init.p);
    cfg.init.v = detail::get_vec3(init, "v", cfg.init.v);
    cfg.init.target_p = detail::get_vec3(init, "target_p", cfg.init.target_p);
    cfg.init.target_v = detail::get_vec3(init, "target_v", cfg.init.target_v);
    cfg.init.attitude_axis_angle =
        detail::get_vec3(init, "attitude_axis_angle",
                         cfg.init.attitude_axis_angle);
  }

  cfg.xi0_scale = detail::get_number(j, "xi0_scale", cfg.xi0_scale);
  cfg.pe_window = detail::get_int(j, "pe_window", cfg.pe_window);
  cfg.allow_unstable_alpha =
      detail::get_bool(j, "allow_unstable_alpha", cfg.allow_unstable_alpha);
  cfg.zero_target_accel =
      detail::get_bool(j, "zero_target_accel", cfg.zero_target_accel);

  validate_config(cfg);
  return cfg;
}

/// Loads and validates a config file.
inline ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_config(buf.str());
}

/// Serializes a config with every field spelled out, so that loading the
/// output reproduces the config exactly.
inline std::string serialize_config(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["t"] = cfg.t;
  j["horizon"] = cfg.horizon;
  j["seed"] = cfg.seed;
  j["target_accel_cov"] = detail::mat3_to_json(cfg.target_accel_cov);
  j["eta1"] = cfg.eta1;
  j["eta2"] = cfg.eta2;
  j["pings_per_sample"] = cfg.pings_per_sample;
  j["baseline_body"] = detail::vec3_to_json(cfg.baseline_body);
  j["setpoint_body"] = detail::vec3_to_json(cfg.setpoint_body);
  j["alpha"] = cfg.alpha;
  j["attitude_mode"] = to_string(cfg.attitude_mode);
  j["rho"] = cfg.rho;
  switch (cfg.h.kind) {
    case VerticalProfile::Kind::kCosine:
      j["h"] = {{"type", "cosine"},
                {"amplitude", cfg.h.amplitude},
                {"frequency", cfg.h.frequency}};
      break;
    case VerticalProfile::Kind::kZero:
      j["h"] = {{"type", "zero"}};
      break;
    case VerticalProfile::Kind::kNoise:
      j["h"] = {{"type", "noise"}, {"sigma", cfg.h.sigma}};
      break;
  }
  j["init"] = {{"p", detail::vec3_to_json(cfg.init.p)},
               {"v", detail::vec3_to_json(cfg.init.v)},
               {"target_p", detail::vec3_to_json(cfg.init.target_p)},
               {"target_v", detail::vec3_to_json(cfg.init.target_v)},
               {"attitude_axis_angle",
                detail::vec3_to_json(cfg.init.attitude_axis_angle)}};
  j["xi0_scale"] = cfg.xi0_scale;
  j["pe_window"] = cfg.pe_window;
  j["allow_unstable_alpha"] = cfg.allow_unstable_alpha;
  j["zero_target_accel"] = cfg.zero_target_accel;
  return j.dump(2) + "\n";
}

/// Builds the vertical profile function for the excitation trajectory.
/// The noise profile derives its draws from the run seed through a salted
/// stateless hash, so it is reproducible and independent of the main
/// measurement stream.
inline std::function<double(int)> make_h_function(const ScenarioConfig& cfg) {
  switch (cfg.h.kind) {
    case VerticalProfile::Kind::kCosine: {
      const double amplitude = cfg.h.amplitude;
      const double frequency = cfg.h.frequency;
      return [amplitude, frequency](int k) {
        return amplitude * std::cos(frequency * static_cast<double>(k) * M_PI);
      };
    }
    case VerticalProfile::Kind::kZero:
      return [](int) { return 0.0; };
    case VerticalProfile::Kind::kNoise: {
      const double sigma = cfg.h.sigma;
      const std::uint64_t salt = cfg.seed ^ 0x76657274ULL;
      return [sigma, salt](int k) {
        return sigma * indexed_normal(salt, static_cast<std::uint64_t>(k));
      };
    }
  }
  throw std::invalid_argument("make_h_function: bad profile kind");
}

/// Builds the excitation trajectory parameters from a config.
inline TrajectoryParams make_trajectory_params(const ScenarioConfig& cfg) {
  return TrajectoryParams(cfg.rho, make_h_function(cfg),
                          cfg.baseline_body.norm());
}

}  // namespace reltrack
