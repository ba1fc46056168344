#include "framefit/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace framefit::io {

namespace {

using json = nlohmann::json;

[[noreturn]] void parse_fail(const std::string& source, const std::string& field, const std::string& what) {
  fail(ErrorCode::ParseError, source + ": field '" + field + "': " + what);
}

[[noreturn]] void invalid(const std::string& source, const std::string& field, const std::string& what) {
  fail(ErrorCode::ValidationError, source + ": field '" + field + "': " + what);
}

json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // Drop the "[json.exception.parse_error.101] " prefix; the rest carries
    // line and column.
    std::string what = e.what();
    if (const auto pos = what.find("] "); pos != std::string::npos) what = what.substr(pos + 2);
    fail(ErrorCode::ParseError, source + ": " + what);
  }
}

const json& member(const json& obj, const std::string& key, const std::string& source, const std::string& path) {
  if (!obj.is_object()) parse_fail(source, path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) parse_fail(source, path.empty() ? key : path + "." + key, "missing");
  return *it;
}

double number(const json& j, const std::string& source, const std::string& field) {
  if (!j.is_number()) parse_fail(source, field, "expected a number, got " + std::string(j.type_name()));
  const double v = j.get<double>();
  if (!std::isfinite(v)) invalid(source, field, "must be finite");
  return v;
}

Vector<double> number_array(const json& j, const std::string& source, const std::string& field,
                            std::optional<Index> length = std::nullopt) {
  if (!j.is_array()) parse_fail(source, field, "expected an array of numbers, got " + std::string(j.type_name()));
  if (length && static_cast<Index>(j.size()) != *length) {
    parse_fail(source, field, "expected " + std::to_string(*length) + " numbers, got " + std::to_string(j.size()));
  }
  Vector<double> v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], source, field + "[" + std::to_string(i) + "]");
  return v;
}

Matrix<double> point_columns(const json& j, const std::string& source, const std::string& field, Index dim) {
  if (!j.is_array()) parse_fail(source, field, "expected an array of points");
  Matrix<double> m(dim, static_cast<Index>(j.size()));
  for (std::size_t n = 0; n < j.size(); ++n) {
    m.col(static_cast<Index>(n)) = number_array(j[n], source, field + "[" + std::to_string(n) + "]", dim);
  }
  return m;
}

json to_json(const Vector<double>& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json columns_json(const Matrix<double>& m) {
  json a = json::array();
  for (Index c = 0; c < m.cols(); ++c) a.push_back(to_json(m.col(c)));
  return a;
}

std::string header(std::string_view first, std::string_view prefix, Index count) {
  std::string out(first);
  for (Index i = 1; i <= count; ++i) out += "," + std::string(prefix) + std::to_string(i);
  return out;
}

void append_row(std::string& out, std::initializer_list<const Vector<double>*> parts, std::string_view lead) {
  out += lead;
  bool first = true;
  for (const auto* part : parts) {
    for (Index i = 0; i < part->size(); ++i) {
      if (!first) out += ',';
      out += format_number((*part)(i));
      first = false;
    }
  }
  out += '\n';
}

}  // namespace

TargetState<double> MovingTarget::at(double t) const {
  return {state.position + t * state.velocity + 0.5 * t * t * acceleration, state.velocity + t * acceleration};
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

Scenario parse_scenario(std::string_view text, const std::string& source) {
  const json root = parse_json(text, source);
  if (!root.is_object()) parse_fail(source, "<root>", "expected an object");
  const json& dim_json = member(root, "dim", source, "");
  if (!dim_json.is_number_integer()) parse_fail(source, "dim", "expected an integer");
  const auto dim = dim_json.get<Index>();
  if (dim != 2 && dim != 3) invalid(source, "dim", "must be 2 or 3, got " + std::to_string(dim));

  Scenario s;
  s.geometry.transmitters = point_columns(member(root, "transmitters", source, ""), source, "transmitters", dim);
  s.geometry.receivers = point_columns(member(root, "receivers", source, ""), source, "receivers", dim);
  if (s.geometry.transmitters.cols() != s.geometry.receivers.cols()) {
    invalid(source, "receivers", "expected as many receivers as transmitters (" +
                                     std::to_string(s.geometry.transmitters.cols()) + "), got " +
                                     std::to_string(s.geometry.receivers.cols()));
  }
  if (s.geometry.pairs() < 1) invalid(source, "transmitters", "need at least one transmitter/receiver pair");

  if (const auto it = root.find("target"); it != root.end() && !it->is_null()) {
    MovingTarget target;
    target.state.position = number_array(member(*it, "position", source, "target"), source, "target.position", dim);
    target.state.velocity = number_array(member(*it, "velocity", source, "target"), source, "target.velocity", dim);
    target.acceleration = Vector<double>::Zero(dim);
    if (const auto acc = it->find("acceleration"); acc != it->end()) {
      target.acceleration = number_array(*acc, source, "target.acceleration", dim);
    }
    const double tol = singularity_tolerance(s.geometry);
    for (Index n = 0; n < s.geometry.pairs(); ++n) {
      const bool at_tx = (target.state.position - s.geometry.transmitters.col(n)).norm() <= tol;
      const bool at_rx = (target.state.position - s.geometry.receivers.col(n)).norm() <= tol;
      if (at_tx || at_rx) {
        invalid(source, "target.position", std::string("coincides with ") + (at_tx ? "transmitter " : "receiver ") +
                                               std::to_string(n) + " (targets must stay away from sensors)");
      }
    }
    s.target = std::move(target);
  }

  if (const auto it = root.find("noise"); it != root.end() && !it->is_null()) {
    if (const auto sigma = it->find("sigma"); sigma != it->end()) {
      s.noise.sigma = number(*sigma, source, "noise.sigma");
      if (s.noise.sigma < 0) invalid(source, "noise.sigma", "must be >= 0");
    }
    if (const auto seed = it->find("seed"); seed != it->end()) {
      if (!seed->is_number_unsigned()) parse_fail(source, "noise.seed", "expected a non-negative integer");
      s.noise.seed = seed->get<std::uint64_t>();
    }
  }
  return s;
}

Measurement<double> parse_measurement(std::string_view text, const std::string& source) {
  const json root = parse_json(text, source);
  return number_array(member(root, "w", source, ""), source, "w");
}

TimeSeries<double> parse_time_series(std::string_view text, const std::string& source) {
  const json root = parse_json(text, source);
  TimeSeries<double> ts;
  ts.times = number_array(member(root, "times", source, ""), source, "times");
  const json& w = member(root, "w", source, "");
  if (!w.is_array()) parse_fail(source, "w", "expected an array of arrays");
  if (w.size() != static_cast<std::size_t>(ts.times.size())) {
    invalid(source, "w", "expected one sample per time (" + std::to_string(ts.times.size()) + "), got " +
                             std::to_string(w.size()));
  }
  const Index N = w.empty() ? 0 : static_cast<Index>(w[0].is_array() ? w[0].size() : 0);
  ts.values.resize(N, ts.times.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    ts.values.col(static_cast<Index>(k)) = number_array(w[k], source, "w[" + std::to_string(k) + "]", N);
  }
  try {
    validate(ts);
  } catch (const FrameError& e) {
    fail(ErrorCode::ValidationError, source + ": " + e.what());
  }
  return ts;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ParseError, path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Scenario read_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path), path.string()); }

Measurement<double> read_measurement(const std::filesystem::path& path) {
  return parse_measurement(read_file(path), path.string());
}

TimeSeries<double> read_time_series(const std::filesystem::path& path) {
  return parse_time_series(read_file(path), path.string());
}

std::string scenario_json(const Scenario& s) {
  json root;
  root["dim"] = s.geometry.dim();
  root["transmitters"] = columns_json(s.geometry.transmitters);
  root["receivers"] = columns_json(s.geometry.receivers);
  if (s.target) {
    root["target"] = {{"position", to_json(s.target->state.position)},
                      {"velocity", to_json(s.target->state.velocity)},
                      {"acceleration", to_json(s.target->acceleration)}};
  }
  root["noise"] = {{"sigma", s.noise.sigma}, {"seed", s.noise.seed}};
  return root.dump(2) + "\n";
}

std::string measurement_json(const Measurement<double>& w) {
  json root;
  root["w"] = to_json(w);
  return root.dump(2) + "\n";
}

std::string time_series_json(const TimeSeries<double>& data) {
  json root;
  root["times"] = to_json(data.times);
  root["w"] = columns_json(data.values);
  return root.dump(2) + "\n";
}

std::string level_set_csv(const LevelSetReport<double>& report) {
  std::string out = header("", "x_", report.grid.dim()).substr(1) + ",E\n";
  for (const auto& p : report.points) {
    const Vector<double> value = Vector<double>::Constant(1, p.value);
    append_row(out, {&p.x, &value}, "");
  }
  return out;
}

std::string trace_csv(const SolveResult<double>& result) {
  const Index P = result.iterates.empty() ? 0 : result.iterates.front().x.size();
  std::string out = header("k", "x_", P) + ",E,grad_norm\n";
  for (std::size_t k = 0; k < result.iterates.size(); ++k) {
    const auto& it = result.iterates[k];
    Vector<double> tail(2);
    tail << it.value, it.grad_norm;
    append_row(out, {&it.x, &tail}, std::to_string(k) + ",");
  }
  return out;
}

std::string trajectory_csv(const Trajectory<double>& traj) {
  const Index M = traj.positions.rows();
  std::string out = header("t", "x_", M) + header("", "v_", M) + "\n";
  for (Index k = 0; k < traj.samples(); ++k) {
    const Vector<double> t = Vector<double>::Constant(1, traj.times(k));
    const Vector<double> x = traj.positions.col(k);
    const Vector<double> v = traj.velocities.col(k);
    append_row(out, {&t, &x, &v}, "");
  }
  return out;
}

std::string shooting_csv(const ShootingResult<double>& result) {
  const Index M = result.trace.empty() ? 0 : result.trace.front().position.size();
  std::string out = header("candidate", "x_", M) + header("", "v_", M) + ",value\n";
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    const auto& c = result.trace[i];
    const Vector<double> value = Vector<double>::Constant(1, c.value);
    append_row(out, {&c.position, &c.velocity, &value}, std::to_string(i) + ",");
  }
  return out;
}

}  // namespace framefit::io
