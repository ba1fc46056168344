#include "framefit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "framefit/framefit.hpp"
#include "framefit/io.hpp"

#ifndef FRAMEFIT_VERSION
#define FRAMEFIT_VERSION "0.0.0"
#endif

namespace framefit::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// E at most this fraction of |w|^2 over the whole grid means the data fit
// every position equally well.
constexpr double kDegenerateFraction = 1e-18;

struct GridFlags {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<long long> counts;
};

struct Options {
  std::string scenario;
  std::string measurement;
  std::string timeseries;
  std::string out_dir;
  GridFlags grid{{-10.0}, {10.0}, {21}};
  GridFlags velocity{{-15.0}, {15.0}, {7}};
  double gamma = 1.0;
  int max_iters = 100;
  double grad_tol = 1e-10;
  double step_tol = 1e-12;
  std::optional<double> sigma;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  double duration = 1.0;
  long long steps = 0;
};

std::vector<double> broadcast(const std::vector<double>& v, Index dim, const std::string& flag) {
  if (static_cast<Index>(v.size()) == dim) return v;
  if (v.size() == 1) return std::vector<double>(static_cast<std::size_t>(dim), v[0]);
  throw UsageError(flag + " needs 1 or " + std::to_string(dim) + " values, got " + std::to_string(v.size()));
}

GridSpec<double> make_grid(const GridFlags& flags, Index dim, const std::string& prefix) {
  const auto lower = broadcast(flags.lower, dim, prefix + "-lower");
  const auto upper = broadcast(flags.upper, dim, prefix + "-upper");
  std::vector<double> counts_real(flags.counts.begin(), flags.counts.end());
  const auto counts = broadcast(counts_real, dim, prefix + "-counts");
  GridSpec<double> grid;
  grid.lower = Eigen::Map<const Vector<double>>(lower.data(), dim);
  grid.upper = Eigen::Map<const Vector<double>>(upper.data(), dim);
  for (Index p = 0; p < dim; ++p) {
    const auto i = static_cast<std::size_t>(p);
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw UsageError(prefix + "-lower must be below " + prefix + "-upper in coordinate " + std::to_string(p + 1));
    }
    if (counts[i] < 1) throw UsageError(prefix + "-counts must be positive in coordinate " + std::to_string(p + 1));
    grid.counts.push_back(static_cast<Index>(counts[i]));
  }
  return grid;
}

json vector_json(const Vector<double>& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json grid_json(const GridSpec<double>& g) {
  return {{"lower", vector_json(g.lower)}, {"upper", vector_json(g.upper)}, {"counts", g.counts}};
}

// Shared state of one command invocation: parsed scenario, effective noise,
// output directory and the manifest collected along the way.
class Run {
 public:
  Run(std::string command, const Options& opts, const CLI::App& sub, const std::vector<std::string>& args,
      std::ostream& out, std::ostream& err)
      : command_(std::move(command)), opts_(opts), out_(out), err_(err) {
    if (opts.sigma && !(*opts.sigma >= 0 && std::isfinite(*opts.sigma))) throw UsageError("--sigma must be finite and >= 0");
    if (opts.tau && !(*opts.tau >= 0 && std::isfinite(*opts.tau))) throw UsageError("--tau must be finite and >= 0");
    scenario_ = io::read_scenario(opts.scenario);
    noise_ = scenario_.noise;
    if (opts.sigma) noise_.sigma = *opts.sigma;
    if (opts.seed) noise_.seed = *opts.seed;

    manifest_["command"] = command_;
    manifest_["scenario"] = opts.scenario;
    manifest_["out_dir"] = opts.out_dir;
    manifest_["version"] = version();
    manifest_["seed"] = noise_.seed;
    manifest_["arguments"] = args;
    json overrides = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
      if (opt->count() == 0 || opt->get_lnames().empty() || opt->get_required()) continue;
      overrides["--" + opt->get_lnames().front()] = opt->results();
    }
    manifest_["overrides"] = overrides;
    manifest_["config"] = json::object();
    manifest_["inputs"] = json::object();
    manifest_["outputs"] = json::array();
    manifest_["warnings"] = json::array();
  }

  const io::Scenario& scenario() const { return scenario_; }
  const NoiseModel& noise() const { return noise_; }
  Index dim() const { return scenario_.geometry.dim(); }
  json& config() { return manifest_["config"]; }
  json& inputs() { return manifest_["inputs"]; }

  const io::MovingTarget& target() const {
    if (!scenario_.target) {
      fail(ErrorCode::ValidationError, opts_.scenario + ": field 'target': required to simulate measurements");
    }
    return *scenario_.target;
  }

  // The measurement file if one was given, otherwise a simulation of the
  // scenario's target with the effective noise model.
  Measurement<double> measurement() {
    config()["sigma"] = noise_.sigma;
    if (!opts_.measurement.empty()) {
      inputs()["measurement"] = opts_.measurement;
      return io::read_measurement(opts_.measurement);
    }
    inputs()["measurement"] = nullptr;
    return simulate_fdoa(scenario_.geometry, target().state, noise_);
  }

  void warn(const std::string& message) {
    err_ << "warning: " << message << '\n';
    manifest_["warnings"].push_back(message);
  }

  void write(const std::string& name, const std::string& content) {
    if (!dir_ready_) {
      fs::create_directories(opts_.out_dir);
      dir_ready_ = true;
    }
    io::write_file(fs::path(opts_.out_dir) / name, content);
    manifest_["outputs"].push_back(name);
    out_ << "wrote " << (fs::path(opts_.out_dir) / name).string() << '\n';
  }

  void finish() { write("manifest.json", manifest_.dump(2) + "\n"); }

 private:
  std::string command_;
  const Options& opts_;
  std::ostream& out_;
  std::ostream& err_;
  io::Scenario scenario_;
  NoiseModel noise_;
  json manifest_;
  bool dir_ready_ = false;
};

// F^*(x(t)) xdot(t) along the scenario's target path, plus noise drawn
// sample by sample from one seeded stream.
TimeSeries<double> simulate_series(const io::Scenario& s, const io::MovingTarget& target, const NoiseModel& noise,
                                   double duration, Index steps) {
  const RadarFamily<double> family(s.geometry);
  TimeSeries<double> ts;
  ts.times = Vector<double>::LinSpaced(steps + 1, 0.0, duration);
  ts.values.resize(s.geometry.pairs(), steps + 1);
  SplitMix64 rng(noise.seed);
  for (Index k = 0; k <= steps; ++k) {
    const auto state = target.at(ts.times(k));
    Vector<double> w = fdoa_coefficients(family, state.position, state.velocity);
    add_noise(w, rng, noise.sigma);
    ts.values.col(k) = w;
  }
  return ts;
}

void check_series_flags(const Options& opts) {
  if (!(opts.duration > 0 && std::isfinite(opts.duration))) throw UsageError("--duration must be positive");
  if (opts.steps < 2) throw UsageError("--steps must be at least 2");
}

void cmd_simulate(Run& run, const Options& opts) {
  const auto& target = run.target();
  const Measurement<double> w = run.measurement();
  run.write("measurement.json", io::measurement_json(w));
  if (opts.steps != 0) {
    check_series_flags(opts);
    run.config()["duration"] = opts.duration;
    run.config()["steps"] = opts.steps;
    run.write("timeseries.json", io::time_series_json(simulate_series(run.scenario(), target, run.noise(),
                                                                      opts.duration, static_cast<Index>(opts.steps))));
  }
}

SolverConfig<double> solver_config(const Options& opts, Index dim) {
  SolverConfig<double> cfg;
  if (!(opts.gamma > 0 && opts.gamma <= 1)) throw UsageError("--gamma must lie in (0, 1]");
  if (opts.max_iters < 1) throw UsageError("--max-iters must be positive");
  if (!(opts.grad_tol > 0)) throw UsageError("--grad-tol must be positive");
  cfg.step_size = opts.gamma;
  cfg.max_iters = opts.max_iters;
  cfg.grad_tol = opts.grad_tol;
  cfg.step_tol = opts.step_tol;
  cfg.grid = make_grid(opts.grid, dim, "--grid");
  return cfg;
}

void cmd_localize(Run& run, const Options& opts) {
  const SolverConfig<double> cfg = solver_config(opts, run.dim());
  run.config()["grid"] = grid_json(cfg.grid);
  run.config()["gamma"] = cfg.step_size;
  run.config()["max_iters"] = cfg.max_iters;
  run.config()["grad_tol"] = cfg.grad_tol;
  run.config()["step_tol"] = cfg.step_tol;
  run.config()["max_backtracks"] = cfg.max_backtracks;
  run.config()["regularization"] = cfg.regularization;

  const Measurement<double> w = run.measurement();
  const RadarFamily<double> family(run.scenario().geometry);
  const SolveResult<double> result = localize(family, w, cfg);

  json out;
  out["minimizer"] = vector_json(result.minimizer);
  out["value"] = result.value;
  out["status"] = std::string(to_string(result.status));
  out["iterations"] = result.iterations();
  out["grid_start"] = vector_json(result.initial.best);
  out["grid_start_value"] = result.initial.best_value;
  out["grid_points_in_domain"] = result.initial.in_domain;
  out["warnings"] = json::array();
  if (result.initial.max_value <= kDegenerateFraction * w.squaredNorm()) {
    const std::string message =
        "degenerate problem: E is at most 1e-18*|w|^2 on every grid point (N = " + std::to_string(family.cols()) +
        " frame vectors in dimension M = " + std::to_string(family.rows()) +
        "); every position explains the data and the minimizer is arbitrary";
    run.warn(message);
    out["warnings"].push_back(message);
  }
  if (run.scenario().target) {
    out["truth"] = vector_json(run.scenario().target->state.position);
    out["error_to_truth"] = (result.minimizer - run.scenario().target->state.position).norm();
  }
  run.write("result.json", out.dump(2) + "\n");
  run.write("trace.csv", io::trace_csv(result));
}

void cmd_diagnose(Run& run, const Options& opts) {
  const GridSpec<double> grid = make_grid(opts.grid, run.dim(), "--grid");
  const Measurement<double> w = run.measurement();
  const RadarFamily<double> family(run.scenario().geometry);
  require_dims(w.size() == family.cols(), "measurement has " + std::to_string(w.size()) + " entries, scenario has " +
                                              std::to_string(family.cols()) + " pairs");
  // Default threshold: the expected |eps|^2 under the noise model.
  const double tau = opts.tau ? *opts.tau : double(family.cols()) * run.noise().sigma * run.noise().sigma;
  run.config()["grid"] = grid_json(grid);
  run.config()["tau"] = tau;

  const LevelSetReport<double> report = level_set(family, w, grid, tau);
  std::vector<ParameterPoint<double>> samples;
  for (const auto& p : report.points) samples.push_back(p.x);
  if (samples.empty()) samples.push_back(grid_search(family, w, grid));
  const UniquenessCertificate<double> cert = uniqueness_certificate(family, w, samples);

  json out;
  out["level_set"] = {{"tau", report.threshold},
                      {"allowance", report.allowance},
                      {"points", report.points.size()},
                      {"in_domain", report.in_domain},
                      {"fraction", report.fraction}};
  json samples_json = json::array();
  for (std::size_t i = 0; i < cert.samples.size(); ++i) {
    samples_json.push_back({{"x", vector_json(cert.samples[i])},
                            {"smallest_singular_value", cert.smallest_singular_values[i]},
                            {"tolerance", cert.tolerances[i]}});
  }
  out["certificate"] = {{"pass", cert.pass},
                        {"scope", "point samples"},
                        {"samples", samples_json}};
  if (run.scenario().target) {
    const auto& truth = run.scenario().target->state;
    if (family.contains(truth.position)) {
      const Vector<double> eps = w - fdoa_coefficients(family, truth.position, truth.velocity);
      const auto bound = residual_bound_check(family, truth.position, w, eps.norm());
      out["residual_bound"] = {{"value_at_truth", bound.value_at_truth}, {"bound", bound.bound}, {"holds", bound.holds}};
    }
  }
  run.write("levelset.csv", io::level_set_csv(report));
  run.write("uniqueness.json", out.dump(2) + "\n");
}

void cmd_track(Run& run, const Options& opts) {
  const GridSpec<double> positions = make_grid(opts.grid, run.dim(), "--grid");
  const GridSpec<double> velocities = make_grid(opts.velocity, run.dim(), "--vel");
  run.config()["position_grid"] = grid_json(positions);
  run.config()["velocity_grid"] = grid_json(velocities);

  TimeSeries<double> data;
  if (!opts.timeseries.empty()) {
    run.inputs()["timeseries"] = opts.timeseries;
    data = io::read_time_series(opts.timeseries);
  } else {
    check_series_flags(opts);
    run.inputs()["timeseries"] = nullptr;
    run.config()["sigma"] = run.noise().sigma;
    run.config()["duration"] = opts.duration;
    run.config()["steps"] = opts.steps;
    data = simulate_series(run.scenario(), run.target(), run.noise(), opts.duration, static_cast<Index>(opts.steps));
  }
  const RadarFamily<double> family(run.scenario().geometry);
  require_dims(data.values.rows() == family.cols(), "time series has " + std::to_string(data.values.rows()) +
                                                        " channels, scenario has " + std::to_string(family.cols()) +
                                                        " pairs");
  const ShootingResult<double> result = shooting_search(family, data, positions, velocities);

  json out;
  out["value"] = result.value;
  out["best_index"] = result.best_index;
  out["initial_position"] = vector_json(result.trace[static_cast<std::size_t>(result.best_index)].position);
  out["initial_velocity"] = vector_json(result.trace[static_cast<std::size_t>(result.best_index)].velocity);
  out["final_position"] = vector_json(result.best.positions.col(result.best.samples() - 1));
  out["candidates"] = result.trace.size();
  out["failed_candidates"] = std::count_if(result.trace.begin(), result.trace.end(),
                                           [](const auto& c) { return !std::isfinite(c.value); });
  if (run.scenario().target) {
    const double t1 = data.times(data.samples() - 1) - data.times(0);
    const auto truth_end = run.scenario().target->at(t1);
    out["final_error_to_truth"] = (result.best.positions.col(result.best.samples() - 1) - truth_end.position).norm();
  }
  run.write("trajectory.csv", io::trajectory_csv(result.best));
  run.write("shooting.csv", io::shooting_csv(result));
  run.write("result.json", out.dump(2) + "\n");
}

void add_grid_flags(CLI::App* sub, GridFlags& grid, const std::string& prefix, const std::string& what) {
  sub->add_option("--" + prefix + "-lower", grid.lower, what + " lower corner (1 or M values)")->delimiter(',');
  sub->add_option("--" + prefix + "-upper", grid.upper, what + " upper corner (1 or M values)")->delimiter(',');
  sub->add_option("--" + prefix + "-counts", grid.counts, what + " points per coordinate (1 or M values)")->delimiter(',');
}

void add_noise_flags(CLI::App* sub, Options& opts) {
  sub->add_option("--sigma", opts.sigma, "noise standard deviation (overrides the scenario)");
  sub->add_option("--seed", opts.seed, "noise seed (overrides the scenario)");
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::string version() { return std::string("framefit ") + FRAMEFIT_VERSION; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opts;
  CLI::App app{"Frame-based FDOA localization: simulate, localize, diagnose, track"};
  app.name("framefit");
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  using Command = std::function<void(Run&, const Options&)>;
  std::vector<std::pair<CLI::App*, Command>> commands;
  auto add_command = [&](const std::string& name, const std::string& help, Command fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", opts.scenario, "scenario JSON file")->required();
    sub->add_option("--out-dir", opts.out_dir, "directory for outputs and manifest.json")->required();
    commands.emplace_back(sub, std::move(fn));
    return sub;
  };

  CLI::App* simulate = add_command("simulate", "simulate an FDOA measurement (and optionally a time series)", cmd_simulate);
  add_noise_flags(simulate, opts);
  simulate->add_option("--duration", opts.duration, "time-series length in seconds");
  simulate->add_option("--steps", opts.steps, "time-series steps (writes timeseries.json when given)");

  CLI::App* localize_cmd = add_command("localize", "grid search plus damped Newton localization", cmd_localize);
  localize_cmd->add_option("--measurement", opts.measurement, "measurement JSON (default: simulate the scenario)");
  add_grid_flags(localize_cmd, opts.grid, "grid", "initialization grid");
  add_noise_flags(localize_cmd, opts);
  localize_cmd->add_option("--gamma", opts.gamma, "initial Newton step size in (0, 1]");
  localize_cmd->add_option("--max-iters", opts.max_iters, "Newton iteration limit");
  localize_cmd->add_option("--grad-tol", opts.grad_tol, "gradient-norm stopping tolerance");

  CLI::App* diagnose = add_command("diagnose", "level set, residual bound and uniqueness certificate", cmd_diagnose);
  diagnose->add_option("--measurement", opts.measurement, "measurement JSON (default: simulate the scenario)");
  add_grid_flags(diagnose, opts.grid, "grid", "evaluation grid");
  add_noise_flags(diagnose, opts);
  diagnose->add_option("--tau", opts.tau, "level-set threshold (default: N * sigma^2)");

  CLI::App* track = add_command("track", "shooting search for a trajectory over a time series", cmd_track);
  track->add_option("--timeseries", opts.timeseries, "time-series JSON (default: simulate the scenario)");
  add_grid_flags(track, opts.grid, "grid", "initial-position grid");
  add_grid_flags(track, opts.velocity, "vel", "initial-velocity grid");
  add_noise_flags(track, opts);
  track->add_option("--duration", opts.duration, "simulated time-series length in seconds");
  track->add_option("--steps", opts.steps, "simulated time-series steps");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: UsageError: " << one_line(e.what()) << '\n';
    return kExitUsage;
  }

  for (auto& [sub, fn] : commands) {
    if (!sub->parsed()) continue;
    if (sub == track && opts.steps == 0) opts.steps = 1000;
    if (sub == track && sub->get_option("--grid-counts")->count() == 0) opts.grid.counts = {5};
    try {
      Run r(sub->get_name(), opts, *sub, args, out, err);
      fn(r, opts);
      r.finish();
      return kExitOk;
    } catch (const UsageError& e) {
      err << "error: UsageError: " << one_line(e.what()) << '\n';
      return kExitUsage;
    } catch (const FrameError& e) {
      err << "error: " << to_string(e.code()) << ": " << one_line(e.what()) << '\n';
      return kExitRuntime;
    } catch (const std::exception& e) {
      err << "error: RuntimeError: " << one_line(e.what()) << '\n';
      return kExitRuntime;
    }
  }
  return kExitUsage;
}

}  // namespace framefit::cli
