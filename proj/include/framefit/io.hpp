#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "framefit/diagnostics.hpp"
#include "framefit/newton.hpp"
#include "framefit/radar.hpp"
#include "framefit/variational.hpp"

namespace framefit::io {

struct MovingTarget {
  TargetState<double> state;
  Vector<double> acceleration;  // zero unless given

  // Position and velocity at time t after the reference instant.
  TargetState<double> at(double t) const;
};

struct Scenario {
  RadarGeometry<double> geometry;
  std::optional<MovingTarget> target;
  NoiseModel noise;
};

// Structural problems (bad JSON, missing or mistyped fields) raise
// ParseError; violated invariants raise ValidationError. Messages name the
// source and the offending field.
Scenario parse_scenario(std::string_view text, const std::string& source);
Measurement<double> parse_measurement(std::string_view text, const std::string& source);
TimeSeries<double> parse_time_series(std::string_view text, const std::string& source);

Scenario read_scenario(const std::filesystem::path& path);
Measurement<double> read_measurement(const std::filesystem::path& path);
TimeSeries<double> read_time_series(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Shortest text that reads back to the same double; "inf"/"-inf"/"nan"
// for non-finite values.
std::string format_number(double value);

std::string scenario_json(const Scenario& scenario);
std::string measurement_json(const Measurement<double>& w);
std::string time_series_json(const TimeSeries<double>& data);

// CSV tables, one header line, comma separated, '\n' line ends.
std::string level_set_csv(const LevelSetReport<double>& report);         // x_1..x_P,E
std::string trace_csv(const SolveResult<double>& result);                // k,x_1..x_P,E,grad_norm
std::string trajectory_csv(const Trajectory<double>& trajectory);        // t,x_1..x_M,v_1..v_M
std::string shooting_csv(const ShootingResult<double>& result);          // candidate,x_1..,v_1..,value

}  // namespace framefit::io
