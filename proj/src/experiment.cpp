// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#include "fsm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "fsm/parallel.hpp"

namespace fsm {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
}

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
  }
  void header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i) out_ << ',';
      out_ << names[i];
    }
    out_ << '\n';
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << fmt(values[i]);
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

json control_to_json(const ControlVector& c) {
  json j;
  j["initial_state"] = std::vector<double>(c.initial_state.data(),
                                           c.initial_state.data() + c.initial_state.size());
  j["parameters"] =
      std::vector<double>(c.parameters.data(), c.parameters.data() + c.parameters.size());
  return j;
}

json plan_to_json(const PlacementPlan& plan) {
  json j;
  j["times"] = plan.times;
  auto rationale = json::array();
  for (const auto& r : plan.rationale) {
    rationale.push_back(
        {{"time", r.time}, {"channel", r.channel}, {"squared_sensitivity", r.squared_sensitivity}});
  }
  j["rationale"] = std::move(rationale);
  j["gramian_det"] = plan.gramian_det;
  j["gramian_log_det"] = plan.gramian_log_det;
  return j;
}

int auto_stride(const ExperimentConfig& config, const ModelSystem& model, int steps) {
  if (config.outputs.stride > 0) return config.outputs.stride;
  if (model.state_dim <= 4) return 1;
  if (model.state_dim <= 512) return std::max(1, steps / 200);
  return std::max(1, steps / 20);
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = {{"name", c.model.name},
                {"options",
                 {{"grid_size", c.model.options.grid_size},
                  {"length", c.model.options.length},
                  {"reynolds", c.model.options.reynolds},
                  {"nx", c.model.options.nx},
                  {"ny", c.model.options.ny},
                  {"cx", c.model.options.cx},
                  {"cy", c.model.options.cy},
                  {"nu", c.model.options.nu}}}};
  auto control = [](const ControlSpec& s) {
    json cj;
    cj["type"] = s.type;
    if (s.type == "values") {
      cj["initial_state"] = s.initial_state;
      cj["parameters"] = s.parameters;
    } else if (s.type == "sine") {
      cj["amplitude"] = s.amplitude;
      cj["periods"] = s.periods;
    } else if (s.type == "gaussian") {
      cj["center"] = s.center;
      cj["width"] = s.width;
    }
    return cj;
  };
  j["truth_control"] = control(c.truth_control);
  j["guess_control"] = control(c.guess_control);
  j["horizon"] = c.horizon;
  j["dt"] = c.dt;
  j["placement"] = {{"mode", c.placement.mode},
                    {"count", c.placement.count},
                    {"min_time", c.placement.min_time},
                    {"max_time", c.placement.max_time},
                    {"min_separation", c.placement.min_separation},
                    {"times", c.placement.times},
                    {"trace", c.placement.trace}};
  j["observation"] = {{"op", c.observation.op}, {"indices", c.observation.indices}};
  j["noise_pct"] = c.noise_pct;
  j["noise_levels"] = c.noise_levels;
  j["seeds"] = c.seeds;
  j["estimator"] = {{"method", c.estimator.method},
                    {"tol", c.estimator.tol},
                    {"max_iter", c.estimator.max_iter},
                    {"tsvd_threshold", c.estimator.tsvd_threshold}};
  j["sweep"] = {{"t_min", c.sweep.t_min},
                {"t_max", c.sweep.t_max},
                {"resolution", c.sweep.resolution}};
  j["outputs"] = {{"dir", c.outputs.dir},
                  {"trajectory", c.outputs.trajectory},
                  {"sensitivities", c.outputs.sensitivities},
                  {"placement", c.outputs.placement},
                  {"observations", c.outputs.observations},
                  {"estimates", c.outputs.estimates},
                  {"summary", c.outputs.summary},
                  {"stride", c.outputs.stride},
                  {"format", c.outputs.format}};
  return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    const json& m = j.at("model");
    c.model.name = m.at("name").get<std::string>();
    if (m.contains("options")) {
      const json& o = m["options"];
      c.model.options.grid_size = o.value("grid_size", c.model.options.grid_size);
      c.model.options.length = o.value("length", c.model.options.length);
      c.model.options.reynolds = o.value("reynolds", c.model.options.reynolds);
      c.model.options.nx = o.value("nx", c.model.options.nx);
      c.model.options.ny = o.value("ny", c.model.options.ny);
      c.model.options.cx = o.value("cx", c.model.options.cx);
      c.model.options.cy = o.value("cy", c.model.options.cy);
      c.model.options.nu = o.value("nu", c.model.options.nu);
    }
    auto control = [](const json& cj) {
      ControlSpec s;
      s.type = cj.value("type", std::string("values"));
      s.initial_state = cj.value("initial_state", std::vector<double>{});
      s.parameters = cj.value("parameters", std::vector<double>{});
      s.amplitude = cj.value("amplitude", 1.0);
      s.periods = cj.value("periods", 1.0);
      if (cj.contains("center")) {
        const auto center = cj["center"].get<std::vector<double>>();
        if (center.size() != 2) throw ConfigError("control spec: center must have two entries");
        s.center = {center[0], center[1]};
      }
      s.width = cj.value("width", 0.0);
      return s;
    };
    c.truth_control = control(j.at("truth_control"));
    c.guess_control = control(j.at("guess_control"));
    c.horizon = j.at("horizon").get<double>();
    c.dt = j.at("dt").get<double>();
    if (j.contains("placement")) {
      const json& p = j["placement"];
      c.placement.mode = p.value("mode", std::string("auto"));
      c.placement.count = p.value("count", 2);
      c.placement.min_time = p.value("min_time", 0.1);
      c.placement.max_time = p.value("max_time", 0.0);
      c.placement.min_separation = p.value("min_separation", 0.0);
      c.placement.times = p.value("times", std::vector<double>{});
      c.placement.trace = p.value("trace", std::string("truth"));
    }
    if (j.contains("observation")) {
      const json& o = j["observation"];
      c.observation.op = o.value("op", std::string("identity"));
      c.observation.indices = o.value("indices", std::vector<Eigen::Index>{});
    }
    c.noise_pct = j.value("noise_pct", 0.0);
    c.noise_levels = j.value("noise_levels", std::vector<double>{});
    c.seeds = j.value("seeds", std::vector<std::uint64_t>{1});
    if (j.contains("estimator")) {
      const json& e = j["estimator"];
      c.estimator.method = e.value("method", std::string("newton"));
      c.estimator.tol = e.value("tol", 1e-8);
      c.estimator.max_iter = e.value("max_iter", 100);
      c.estimator.tsvd_threshold = e.value("tsvd_threshold", 1e-3);
    }
    if (j.contains("sweep")) {
      const json& s = j["sweep"];
      c.sweep.t_min = s.value("t_min", 0.1);
      c.sweep.t_max = s.value("t_max", 1.0);
      c.sweep.resolution = s.value("resolution", 100);
    }
    if (j.contains("outputs")) {
      const json& o = j["outputs"];
      c.outputs.dir = o.value("dir", std::string("out"));
      c.outputs.trajectory = o.value("trajectory", true);
      c.outputs.sensitivities = o.value("sensitivities", true);
      c.outputs.placement = o.value("placement", true);
      c.outputs.observations = o.value("observations", true);
      c.outputs.estimates = o.value("estimates", true);
      c.outputs.summary = o.value("summary", true);
      c.outputs.stride = o.value("stride", 0);
      c.outputs.format = o.value("format", std::string("csv"));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return c;
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  if (name == "linear-decay") {
    c.model.name = "linear_decay";
    c.truth_control.type = "values";
    c.truth_control.initial_state = {2.0};
    c.truth_control.parameters = {-1.0};
    c.guess_control.type = "values";
    c.guess_control.initial_state = {1.8};
    c.guess_control.parameters = {-0.8};
    c.horizon = 2.0;
    c.dt = 1e-3;
    c.placement.mode = "auto";
    c.placement.count = 2;
    c.placement.min_time = 0.1;
    c.placement.max_time = 1.0;
    c.noise_pct = 0.1;
    c.estimator.method = "newton";
    c.estimator.max_iter = 100;
    c.sweep = SweepConfig{0.1, 1.0, 100};
    c.outputs.dir = "out/linear-decay";
    return c;
  }
  if (name == "quadratic-decay") {
    c.model.name = "quadratic_decay";
    c.truth_control.type = "values";
    c.truth_control.initial_state = {2.0};
    c.truth_control.parameters = {-1.0};
    c.guess_control.type = "values";
    c.guess_control.initial_state = {1.75};
    c.guess_control.parameters = {-0.75};
    c.horizon = 2.0;
    c.dt = 1e-3;
    c.placement.mode = "auto";
    c.placement.count = 2;
    c.placement.min_time = 0.1;
    c.placement.max_time = 0.5;
    c.noise_pct = 0.1;
    c.estimator.method = "newton";
    c.estimator.max_iter = 100;
    c.sweep = SweepConfig{0.1, 0.5, 100};
    c.outputs.dir = "out/quadratic-decay";
    return c;
  }
  if (name == "burgers") {
    c.model.name = "burgers_1d";
    c.model.options.grid_size = 128;
    c.model.options.length = 1.0;
    c.model.options.reynolds = 500.0;
    c.truth_control.type = "shock_profile";
    c.guess_control.type = "sine";
    c.guess_control.amplitude = 1.0;
    c.guess_control.periods = 1.0;
    c.horizon = 1.0;
    c.dt = 2.5e-3;
    c.placement.mode = "explicit";
    c.placement.times = {0.01, 0.05};
    c.placement.trace = "background";
    c.noise_pct = 0.1;
    c.noise_levels = {0.01, 0.05, 0.1};
    c.seeds = {1, 2, 3, 4};
    c.estimator.method = "gauss_newton_tsvd";
    c.estimator.max_iter = 50;
    c.sweep = SweepConfig{0.01, 0.5, 50};
    c.outputs.dir = "out/burgers";
    return c;
  }
  if (name == "advdiff") {
    c.model.name = "advdiff_2d";
    c.model.options.nx = 32;
    c.model.options.ny = 32;
    c.model.options.cx = 0.5;
    c.model.options.cy = 0.5;
    c.model.options.nu = 0.01;
    c.truth_control.type = "gaussian";
    c.truth_control.center = {0.25, 0.25};
    c.guess_control.type = "gaussian";
    c.guess_control.center = {0.5, 0.5};
    c.horizon = 1.0;
    c.dt = 1e-3;
    c.placement.mode = "explicit";
    c.placement.times = {0.01, 0.05};
    c.placement.trace = "background";
    c.noise_pct = 0.1;
    c.seeds = {1, 2, 3, 4};
    c.estimator.method = "linear_closed_form";
    c.estimator.max_iter = 1;
    c.sweep = SweepConfig{0.01, 0.5, 50};
    c.outputs.dir = "out/advdiff";
    return c;
  }
  throw ConfigError("unknown preset: " + name);
}

ModelSystem build_model(const ExperimentConfig& config) {
  ModelOptions options = config.model.options;
  options.dt = config.dt;  // discrete maps fold the run step into the map
  return builtin_model(config.model.name, options);
}

TimeGrid build_grid(const ExperimentConfig& config) {
  const double raw = config.horizon / config.dt;
  const int steps = static_cast<int>(std::lround(raw));
  if (steps < 1 || std::abs(raw - steps) > 1e-6)
    throw ConfigError("horizon must be an integral number of steps");
  return TimeGrid(0.0, config.dt, steps);
}

ControlVector resolve_control(const ControlSpec& spec, const ModelSystem& model,
                              const ModelOptions& options) {
  ControlVector c;
  if (spec.type == "values") {
    c.initial_state = Eigen::Map<const Vector>(spec.initial_state.data(),
                                               static_cast<Eigen::Index>(spec.initial_state.size()));
    c.parameters = Eigen::Map<const Vector>(spec.parameters.data(),
                                            static_cast<Eigen::Index>(spec.parameters.size()));
  } else if (spec.type == "shock_profile") {
    c.initial_state =
        burgers_shock_profile(static_cast<int>(model.state_dim), options.length, options.reynolds);
    c.parameters = Vector(model.param_dim);
  } else if (spec.type == "sine") {
    c.initial_state = sine_profile(static_cast<int>(model.state_dim), options.length,
                                   spec.amplitude, spec.periods);
    c.parameters = Vector(model.param_dim);
  } else if (spec.type == "gaussian") {
    const SpatialGrid2D grid2d{options.nx, options.ny, 1.0, 1.0};
    const double width = spec.width > 0.0 ? spec.width : options.nu;
    c.initial_state = gaussian_field_ic(spec.center, width, grid2d);
    c.parameters = Vector(model.param_dim);
  } else {
    throw ConfigError("unknown control spec type: " + spec.type);
  }
  if (c.state_dim() != model.state_dim || c.param_dim() != model.param_dim)
    throw ConfigError("control spec does not match the model dimensions");
  return c;
}

void validate(const ExperimentConfig& config) {
  if (!(config.horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (!(config.dt > 0.0)) throw ConfigError("dt must be positive");
  ModelSystem model;
  try {
    model = build_model(config);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const TimeGrid grid = build_grid(config);
  try {
    (void)resolve_control(config.truth_control, model, config.model.options);
    (void)resolve_control(config.guess_control, model, config.model.options);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (config.placement.mode == "explicit") {
    if (config.placement.times.empty())
      throw ConfigError("explicit placement requires observation times");
    for (std::size_t i = 0; i < config.placement.times.size(); ++i) {
      const double t = config.placement.times[i];
      if (t < 0.0 || t > config.horizon)
        throw ConfigError("explicit observation times must lie within [0, horizon]");
      if (!grid.contains(t))
        throw ConfigError("explicit observation time is not on the integration grid");
      if (i > 0 && !(t > config.placement.times[i - 1]))
        throw ConfigError(
            "explicit observation times must be strictly increasing and distinct; repeated "
            "times give a singular placement plan");
    }
  } else if (config.placement.mode == "auto") {
    if (config.placement.count < 1) throw ConfigError("placement count must be positive");
    if (config.placement.min_time < 0.0) throw ConfigError("placement min_time must be >= 0");
    if (config.placement.max_time > 0.0 &&
        (config.placement.max_time < config.placement.min_time ||
         config.placement.max_time > config.horizon))
      throw ConfigError("placement max_time must lie in [min_time, horizon]");
  } else {
    throw ConfigError("placement mode must be 'auto' or 'explicit'");
  }
  if (config.placement.trace != "truth" && config.placement.trace != "background")
    throw ConfigError("placement trace must be 'truth' or 'background'");

  if (config.observation.op == "pointwise") {
    if (config.observation.indices.empty())
      throw ConfigError("pointwise observation requires sample indices");
    for (const Eigen::Index i : config.observation.indices) {
      if (i < 0 || i >= model.state_dim)
        throw ConfigError("pointwise observation index outside the state dimension");
    }
  } else if (config.observation.op != "identity") {
    throw ConfigError("observation op must be 'identity' or 'pointwise'");
  }

  if (config.noise_pct < 0.0) throw ConfigError("noise_pct must be nonnegative");
  for (const double level : config.noise_levels) {
    if (level < 0.0) throw ConfigError("noise levels must be nonnegative");
  }
  const bool noisy = config.noise_pct > 0.0 ||
                     std::any_of(config.noise_levels.begin(), config.noise_levels.end(),
                                 [](double x) { return x > 0.0; });
  if (noisy && config.seeds.empty())
    throw ConfigError("seeds must be non-empty when noise_pct > 0");

  const auto& est = config.estimator;
  if (est.method != "newton" && est.method != "linear_closed_form" &&
      est.method != "gauss_newton_tsvd")
    throw ConfigError("unknown estimator method: " + est.method);
  if (!(est.tol > 0.0)) throw ConfigError("estimator tol must be positive");
  if (est.max_iter < 1) throw ConfigError("estimator max_iter must be positive");
  if (est.tsvd_threshold < 0.0 || est.tsvd_threshold >= 1.0)
    throw ConfigError("tsvd_threshold must lie in [0, 1)");
  if (est.method == "linear_closed_form" && !model.constant_map)
    throw ConfigError("linear_closed_form requires a constant linear map model");

  if (config.sweep.resolution < 1) throw ConfigError("sweep resolution must be positive");
  if (config.sweep.t_min > config.sweep.t_max)
    throw ConfigError("sweep t_min must not exceed t_max");
  if (config.outputs.dir.empty()) throw ConfigError("outputs.dir must not be empty");
  if (config.outputs.format != "csv" && config.outputs.format != "json")
    throw ConfigError("outputs.format must be 'csv' or 'json'");
}

namespace {

struct SeedOutcome {
  std::uint64_t seed = 0;
  double noise_pct = 0.0;
  bool failed = false;
  std::string error;
  EstimateResult estimate;
  ObservationSet obs;
};

json tabular_to_json(const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& rows) {
  json j;
  j["columns"] = names;
  j["rows"] = rows;
  return j;
}

void write_tabular(const fs::path& path_no_ext, const OutputConfig& out,
                   const std::vector<std::string>& names,
                   const std::vector<std::vector<double>>& rows,
                   std::vector<std::string>& paths) {
  if (out.format == "json") {
    const fs::path p = path_no_ext.string() + ".json";
    write_text(p, tabular_to_json(names, rows).dump(2) + "\n");
    paths.push_back(p.string());
    return;
  }
  const fs::path p = path_no_ext.string() + ".csv";
  CsvWriter csv(p);
  csv.header(names);
  for (const auto& r : rows) csv.row(r);
  paths.push_back(p.string());
}

double relative_l2_error(const ControlVector& estimate, const ControlVector& truth) {
  const double denom = truth.stacked().norm();
  if (denom == 0.0) return estimate.stacked().norm();
  return (estimate.stacked() - truth.stacked()).norm() / denom;
}

double linf_error(const ControlVector& estimate, const ControlVector& truth) {
  return (estimate.stacked() - truth.stacked()).cwiseAbs().maxCoeff();
}

ObservationOperator build_operator(const ExperimentConfig& config) {
  if (config.observation.op == "pointwise")
    return ObservationOperator::pointwise(config.observation.indices);
  return ObservationOperator::identity();
}

}  // namespace

RunArtifacts run(const ExperimentConfig& config) {
  validate(config);
  const ModelSystem model = build_model(config);
  const TimeGrid grid = build_grid(config);
  const ControlVector truth = resolve_control(config.truth_control, model, config.model.options);
  const ControlVector guess = resolve_control(config.guess_control, model, config.model.options);

  fs::create_directories(config.outputs.dir);
  const fs::path dir(config.outputs.dir);
  RunArtifacts artifacts;

  const Trajectory truth_traj = integrate(model, truth, grid);
  // Sensitivity traces and auto placement follow the configured source run:
  // the truth run, or the background forecast (all that is known before
  // assimilating).
  const bool trace_background = config.placement.trace == "background";
  const Trajectory trace_traj = trace_background ? integrate(model, guess, grid) : truth_traj;
  const int stride = auto_stride(config, model, grid.steps);

  if (config.outputs.trajectory) {
    std::vector<std::string> names = {"t"};
    for (Eigen::Index i = 0; i < model.state_dim; ++i) names.push_back("x" + std::to_string(i));
    std::vector<std::vector<double>> rows;
    for (int k = 0; k <= grid.steps; k += stride) {
      std::vector<double> row = {grid.time_at(k)};
      const Vector& x = truth_traj.state_at(k);
      row.insert(row.end(), x.data(), x.data() + x.size());
      rows.push_back(std::move(row));
    }
    write_tabular(dir / "trajectory", config.outputs, names, rows, artifacts.paths);
  }

  if (config.outputs.sensitivities) {
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    if (model.state_dim == 1) {
      const SensitivityTrajectory sens = propagate(model, trace_traj);
      names = {"t", "u", "v"};
      for (int k = 0; k <= grid.steps; k += stride) {
        rows.push_back({grid.time_at(k), sens.scalar_initial(k),
                        model.param_dim > 0 ? sens.scalar_parameter(k) : 0.0});
      }
    } else {
      const SensitivityInvariants inv = invariants(model, trace_traj, stride);
      names = {"t", "I1", "I2"};
      for (std::size_t s = 0; s < inv.indices.size(); ++s) {
        rows.push_back({grid.time_at(inv.indices[s]), inv.i1[s], inv.i2[s]});
      }
    }
    write_tabular(dir / "sensitivities", config.outputs, names, rows, artifacts.paths);
  }

  // Placement: auto plans from the trace run; explicit times are validated
  // and recorded with their Gramian.
  const ObservationOperator op = build_operator(config);
  PlacementPlan plan;
  if (config.placement.mode == "auto") {
    const PlacementConstraints constraints{config.placement.min_time, config.placement.max_time,
                                           config.placement.min_separation};
    plan = plan_placement(model, trace_traj, op, config.placement.count, constraints);
  } else {
    std::vector<int> keep;
    for (const double t : config.placement.times) keep.push_back(grid.index_of(t));
    const SensitivityTrajectory sens = propagate(model, trace_traj, keep);
    const std::vector<double> unit_sigma(config.placement.times.size(), 1.0);
    const Gramian g = build_gramian(sens, trace_traj, op,
                                    config.placement.times, unit_sigma);
    plan.times = config.placement.times;
    for (const double t : plan.times) plan.rationale.push_back({t, "explicit", 0.0});
    plan.gramian_log_det = g.log_abs_determinant();
    plan.gramian_det = g.dim() <= 4 ? g.determinant() : std::exp(plan.gramian_log_det);
  }
  if (config.outputs.placement) {
    const fs::path p = dir / "placement.json";
    write_text(p, plan_to_json(plan).dump(2) + "\n");
    artifacts.paths.push_back(p.string());
  }

  const std::vector<double> levels =
      config.noise_levels.empty() ? std::vector<double>{config.noise_pct} : config.noise_levels;
  const std::vector<std::uint64_t> seeds =
      config.seeds.empty() ? std::vector<std::uint64_t>{0} : config.seeds;

  std::vector<SeedOutcome> outcomes(levels.size() * seeds.size());
  const int total_runs = static_cast<int>(outcomes.size());
  parallel_for(total_runs, [&](int slot) {
    const std::size_t li = static_cast<std::size_t>(slot) / seeds.size();
    const std::size_t si = static_cast<std::size_t>(slot) % seeds.size();
    SeedOutcome& out = outcomes[static_cast<std::size_t>(slot)];
    out.seed = seeds[si];
    out.noise_pct = levels[li];
    try {
      out.obs = synthesize_observations(model, truth, op, plan.times, grid, out.noise_pct,
                                        out.seed);
      if (config.estimator.method == "newton") {
        out.estimate = estimate_newton(model, guess, out.obs, grid,
                                       {config.estimator.tol, config.estimator.max_iter});
      } else if (config.estimator.method == "gauss_newton_tsvd") {
        out.estimate = estimate_gauss_newton_tsvd(
            model, guess, out.obs, grid,
            {config.estimator.tsvd_threshold, config.estimator.tol, config.estimator.max_iter});
      } else {
        out.estimate = estimate_linear_closed_form(LinearMap(*model.constant_map), op, out.obs,
                                                   grid, config.estimator.tsvd_threshold);
      }
    } catch (const std::exception& e) {
      out.failed = true;
      out.error = e.what();
    }
  });

  json level_summaries = json::array();
  int n_failed_total = 0;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    json runs = json::array();
    std::vector<double> errors;
    Vector mean_control;
    int n_converged = 0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const SeedOutcome& out = outcomes[li * seeds.size() + si];
      const std::string tag =
          (levels.size() > 1 ? "_n" + std::to_string(static_cast<int>(std::lround(
                                          out.noise_pct * 100))) : std::string()) +
          "_seed" + std::to_string(out.seed);
      json record;
      record["seed"] = out.seed;
      record["noise_pct"] = out.noise_pct;
      if (out.failed) {
        ++n_failed_total;
        record["failed"] = true;
        record["error_message"] = out.error;
        runs.push_back(std::move(record));
        continue;
      }
      if (config.outputs.observations) {
        const fs::path p = dir / ("observations" + tag + ".json");
        write_text(p, to_json(out.obs).dump(2) + "\n");
        artifacts.paths.push_back(p.string());
      }
      const double rel = relative_l2_error(out.estimate.control, truth);
      const double linf = linf_error(out.estimate.control, truth);
      record["failed"] = false;
      record["converged"] = out.estimate.converged;
      record["iterations"] = out.estimate.iterations;
      record["final_cost"] = out.estimate.final_cost;
      record["final_gradient_norm"] = out.estimate.final_gradient_norm;
      record["error_rel_l2"] = rel;
      record["error_linf"] = linf;
      record["gramian_log_det"] = out.estimate.gramian.log_abs_determinant();
      if (out.estimate.tsvd_rank) record["tsvd_rank"] = *out.estimate.tsvd_rank;
      if (config.outputs.estimates) {
        json ej;
        ej["control"] = control_to_json(out.estimate.control);
        ej["iterations"] = out.estimate.iterations;
        ej["final_cost"] = out.estimate.final_cost;
        ej["final_gradient_norm"] = out.estimate.final_gradient_norm;
        ej["converged"] = out.estimate.converged;
        ej["tsvd_rank"] =
            out.estimate.tsvd_rank ? json(*out.estimate.tsvd_rank) : json(nullptr);
        ej["gramian_det"] = out.estimate.gramian.determinant();
        ej["error_rel_l2"] = rel;
        const fs::path p = dir / ("estimate" + tag + ".json");
        write_text(p, ej.dump(2) + "\n");
        artifacts.paths.push_back(p.string());
        record["estimate_file"] = p.filename().string();
      }
      if (out.estimate.converged) ++n_converged;
      errors.push_back(rel);
      if (mean_control.size() == 0) {
        mean_control = out.estimate.control.stacked();
      } else {
        mean_control += out.estimate.control.stacked();
      }
      runs.push_back(std::move(record));
    }

    json aggregate;
    aggregate["n_runs"] = seeds.size();
    aggregate["n_converged"] = n_converged;
    if (!errors.empty()) {
      const double mean =
          std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
      double var = 0.0;
      for (const double e : errors) var += (e - mean) * (e - mean);
      var = errors.size() > 1 ? var / static_cast<double>(errors.size() - 1) : 0.0;
      std::vector<double> sorted = errors;
      std::sort(sorted.begin(), sorted.end());
      auto quantile = [&sorted](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
      };
      aggregate["error_rel_l2_mean"] = mean;
      aggregate["error_rel_l2_std"] = std::sqrt(var);
      aggregate["error_rel_l2_quantiles"] = {{"q05", quantile(0.05)},
                                             {"q50", quantile(0.5)},
                                             {"q95", quantile(0.95)}};
      mean_control /= static_cast<double>(errors.size());
      if (mean_control.size() <= 8)
        aggregate["mean_control"] =
            std::vector<double>(mean_control.data(), mean_control.data() + mean_control.size());
    }
    level_summaries.push_back(
        {{"noise_pct", levels[li]}, {"runs", std::move(runs)}, {"aggregate", std::move(aggregate)}});
  }

  if (n_failed_total == total_runs)
    throw NumericalError("estimator failed on every seed: " + outcomes.front().error);

  artifacts.summary["model"] = config.model.name;
  artifacts.summary["estimator"] = config.estimator.method;
  artifacts.summary["placement_times"] = plan.times;
  artifacts.summary["levels"] = std::move(level_summaries);
  if (config.outputs.summary) {
    const fs::path p = dir / "summary.json";
    write_text(p, artifacts.summary.dump(2) + "\n");
    artifacts.paths.push_back(p.string());
  }
  return artifacts;
}

RunArtifacts run_sweep(const ExperimentConfig& config) {
  validate(config);
  const ModelSystem model = build_model(config);
  if (model.state_dim != 1 || model.param_dim != 1)
    throw ConfigError("sweep requires a scalar model with a two-component control");
  const TimeGrid grid = build_grid(config);
  const ControlVector truth = resolve_control(config.truth_control, model, config.model.options);

  const ObservationOperator op = build_operator(config);
  const std::vector<double> axis =
      linspace(config.sweep.t_min, config.sweep.t_max, config.sweep.resolution);
  const SweepGrid sw = sweep(model, truth, op, grid, axis, axis);

  fs::create_directories(config.outputs.dir);
  const fs::path dir(config.outputs.dir);
  RunArtifacts artifacts;

  {
    const fs::path p = dir / "sweep.csv";
    CsvWriter csv(p);
    csv.header({"t1", "t2", "y1sq", "w1sq", "y2sq", "w2sq", "detG", "singular_flag"});
    for (std::size_t i = 0; i < sw.t1_axis.size(); ++i) {
      for (std::size_t j = 0; j < sw.t2_axis.size(); ++j) {
        const int ii = static_cast<int>(i);
        const int jj = static_cast<int>(j);
        csv.row({sw.t1_axis[i], sw.t2_axis[j], sw.y1sq(ii, jj), sw.w1sq(ii, jj), sw.y2sq(ii, jj),
                 sw.w2sq(ii, jj), sw.det_g(ii, jj),
                 static_cast<double>(sw.singular(ii, jj))});
      }
    }
    artifacts.paths.push_back(p.string());
  }

  // Planned times for restricted argmin reporting.
  std::vector<double> planned = config.placement.times;
  if (config.placement.mode == "auto") {
    const Trajectory traj = integrate(model, truth, grid);
    const PlacementConstraints constraints{config.placement.min_time, config.placement.max_time,
                                           config.placement.min_separation};
    planned = plan_placement(model, traj, op, config.placement.count, constraints).times;
  }

  auto cell_json = [](const SweepCell& cell) {
    json j;
    j["valid"] = cell.valid;
    if (cell.valid) {
      j["t1"] = cell.t1;
      j["t2"] = cell.t2;
      j["value"] = cell.value;
    }
    return j;
  };
  const std::pair<std::string, SweepField> fields[] = {{"y1sq", SweepField::y1sq},
                                                       {"w1sq", SweepField::w1sq},
                                                       {"y2sq", SweepField::y2sq},
                                                       {"w2sq", SweepField::w2sq}};
  json summary;
  summary["planned_times"] = planned;
  for (const auto& [name, field] : fields) {
    json entry;
    entry["global_argmin"] = cell_json(sweep_argmin(sw, field));
    if (planned.size() >= 2) {
      entry["row_argmin_at_t1"] = cell_json(sweep_argmin_row(sw, field, planned.front()));
      entry["col_argmin_at_t2"] = cell_json(sweep_argmin_col(sw, field, planned.back()));
    }
    summary[name] = std::move(entry);
  }
  artifacts.summary = summary;
  const fs::path p = dir / "sweep_summary.json";
  write_text(p, summary.dump(2) + "\n");
  artifacts.paths.push_back(p.string());
  return artifacts;
}

}  // namespace fsm
