#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "reltrack/simulation.hpp"

namespace reltrack {

/// Shortest round-trip decimal rendering of a double; parsing the output
/// recovers the exact bits, and equal inputs always render identically.
inline std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (res.ec != std::errc()) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buf.data(), res.ptr);
}

inline constexpr const char* kRunLogHeader =
    "k,qx,qy,qz,vx,vy,vz,qhat_x,qhat_y,qhat_z,vhat_x,vhat_y,vhat_z,"
    "ex,ey,ez,Y,Gamma,pe_lambda_min,att_wx,att_wy,att_wz";

namespace detail {

inline void append_record_values(const StepRecord& rec,
                                 std::vector<double>& out) {
  out.clear();
  for (int i = 0; i < 3; ++i) out.push_back(rec.truth.q[i]);
  for (int i = 0; i < 3; ++i) out.push_back(rec.truth.v[i]);
  for (int i = 0; i < 3; ++i) out.push_back(rec.est.q[i]);
  for (int i = 0; i < 3; ++i) out.push_back(rec.est.v[i]);
  for (int i = 0; i < 3; ++i) out.push_back(rec.track_err[i]);
  out.push_back(rec.y);
  out.push_back(rec.gamma);
  out.push_back(rec.pe_lambda_min);
  for (int i = 0; i < 3; ++i) out.push_back(rec.attitude[i]);
}

inline StepRecord record_from_values(int k, const std::vector<double>& v) {
  StepRecord rec;
  rec.k = k;
  rec.truth.q = Eigen::Vector3d(v[0], v[1], v[2]);
  rec.truth.v = Eigen::Vector3d(v[3], v[4], v[5]);
  rec.est.q = Eigen::Vector3d(v[6], v[7], v[8]);
  rec.est.v = Eigen::Vector3d(v[9], v[10], v[11]);
  rec.track_err = Eigen::Vector3d(v[12], v[13], v[14]);
  rec.y = v[15];
  rec.gamma = v[16];
  rec.pe_lambda_min = v[17];
  rec.attitude = Eigen::Vector3d(v[18], v[19], v[20]);
  return rec;
}

inline double parse_double_token(std::string_view token) {
  double value = 0.0;
  const auto res =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw std::invalid_argument("log parse: bad number '" +
                                std::string(token) + "'");
  }
  return value;
}

}  // namespace detail

/// Renders a run log as CSV with one row per step.
inline std::string run_log_to_csv(const RunLog& log) {
  std::string out(kRunLogHeader);
  out.push_back('\n');
  std::vector<double> values;
  for (const StepRecord& rec : log) {
    out += std::to_string(rec.k);
    detail::append_record_values(rec, values);
    for (double v : values) {
      out.push_back(',');
      out += format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

/// Parses a CSV produced by run_log_to_csv, validating the header.
inline RunLog run_log_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRunLogHeader) {
    throw std::invalid_argument("log parse: missing or unexpected CSV header");
  }
  RunLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> tokens;
    std::string_view rest(line);
    while (true) {
      const std::size_t comma = rest.find(',');
      tokens.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (tokens.size() != 22) {
      throw std::invalid_argument("log parse: expected 22 columns, got " +
                                  std::to_string(tokens.size()));
    }
    int k = 0;
    const auto res = std::from_chars(
        tokens[0].data(), tokens[0].data() + tokens[0].size(), k);
    if (res.ec != std::errc()) {
      throw std::invalid_argument("log parse: bad step index '" +
                                  std::string(tokens[0]) + "'");
    }
    std::vector<double> values;
    values.reserve(21);
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      values.push_back(detail::parse_double_token(tokens[i]));
    }
    log.push_back(detail::record_from_values(k, values));
  }
  return log;
}

/// JSON form of a run log: an array of objects keyed by the CSV column
/// names, carrying exactly the same values.
inline nlohmann::json run_log_to_json(const RunLog& log) {
  static const std::array<const char*, 21> kKeys = {
      "qx", "qy", "qz", "vx", "vy", "vz",
      "qhat_x", "qhat_y", "qhat_z", "vhat_x", "vhat_y", "vhat_z",
      "ex", "ey", "ez", "Y", "Gamma", "pe_lambda_min",
      "att_wx", "att_wy", "att_wz"};
  nlohmann::json arr = nlohmann::json::array();
  std::vector<double> values;
  for (const StepRecord& rec : log) {
    nlohmann::json obj;
    obj["k"] = rec.k;
    detail::append_record_values(rec, values);
    for (std::size_t i = 0; i < kKeys.size(); ++i) {
      obj[kKeys[i]] = values[i];
    }
    arr.push_back(std::move(obj));
  }
  return arr;
}

inline RunLog run_log_from_json(const nlohmann::json& arr) {
  static const std::array<const char*, 21> kKeys = {
      "qx", "qy", "qz", "vx", "vy", "vz",
      "qhat_x", "qhat_y", "qhat_z", "vhat_x", "vhat_y", "vhat_z",
      "ex", "ey", "ez", "Y", "Gamma", "pe_lambda_min",
      "att_wx", "att_wy", "att_wz"};
  if (!arr.is_array()) {
    throw std::invalid_argument("log parse: JSON log must be an array");
  }
  RunLog log;
  std::vector<double> values;
  for (const nlohmann::json& obj : arr) {
    values.clear();
    for (const char* key : kKeys) {
      values.push_back(obj.at(key).get<double>());
    }
    log.push_back(detail::record_from_values(obj.at("k").get<int>(), values));
  }
  return log;
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  return nlohmann::json{{"est_pos_rmse", s.est_pos_rmse},
                        {"est_vel_rmse", s.est_vel_rmse},
                        {"track_rmse", s.track_rmse},
                        {"transient_steps", s.transient_steps},
                        {"min_pe_lambda", s.min_pe_lambda},
                        {"nees_mean", s.nees_mean}};
}

inline nlohmann::json quantiles_to_json(const SummaryQuantiles& q) {
  return nlohmann::json{{"min", q.min},
                        {"p25", q.p25},
                        {"median", q.median},
                        {"p75", q.p75},
                        {"max", q.max}};
}

inline nlohmann::json monte_carlo_to_json(const MonteCarloResult& mc) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < mc.summaries.size(); ++i) {
    nlohmann::json entry = summary_to_json(mc.summaries[i]);
    entry["seed"] = mc.seeds[i];
    runs.push_back(std::move(entry));
  }
  return nlohmann::json{
      {"base_seed", mc.base_seed},
      {"runs", runs},
      {"aggregate",
       {{"est_pos_rmse", quantiles_to_json(mc.aggregate.est_pos_rmse)},
        {"est_vel_rmse", quantiles_to_json(mc.aggregate.est_vel_rmse)},
        {"track_rmse", quantiles_to_json(mc.aggregate.track_rmse)},
        {"transient_steps", quantiles_to_json(mc.aggregate.transient_steps)},
        {"min_pe_lambda", quantiles_to_json(mc.aggregate.min_pe_lambda)},
        {"nees_mean", quantiles_to_json(mc.aggregate.nees_mean)}}}};
}

/// Writes text to a file, surfacing the path on failure.
inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << text;
  out.flush();
  if (!out) {
    throw std::runtime_error("write to '" + path + "' failed");
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "' for reading");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Exports a run log in the requested format ("csv" or "json").
inline void export_run_log(const RunLog& log, const std::string& format,
                           const std::string& path) {
  if (format == "csv") {
    write_text_file(path, run_log_to_csv(log));
  } else if (format == "json") {
    write_text_file(path, run_log_to_json(log).dump(2) + "\n");
  } else {
    throw std::invalid_argument("export: unknown format '" + format + "'");
  }
}

}  // namespace reltrack
