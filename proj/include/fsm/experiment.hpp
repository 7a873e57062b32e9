// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsm/assimilate.hpp"
#include "fsm/metasens.hpp"

namespace fsm {

/// How a control vector is produced for a model: explicit values or a
/// named profile generator.
struct ControlSpec {
  std::string type = "values";  // values | shock_profile | sine | gaussian
  std::vector<double> initial_state;
  std::vector<double> parameters;
  double amplitude = 1.0;  // sine
  double periods = 1.0;
  std::array<double, 2> center{0.5, 0.5};  // gaussian
  double width = 0.0;                      // 0 = model diffusivity
};

struct ModelConfig {
  std::string name = "linear_decay";
  ModelOptions options;
};

struct PlacementConfig {
  std::string mode = "auto";  // auto | explicit
  int count = 2;
  double min_time = 0.1;
  double max_time = 0.0;  // 0 = horizon
  double min_separation = 0.0;
  std::vector<double> times;  // explicit mode
  /// Which run drives the sensitivity traces and auto placement: the truth
  /// run ("truth") or the background forecast ("background").
  std::string trace = "truth";
};

struct ObservationConfig {
  std::string op = "identity";  // identity | pointwise
  std::vector<Eigen::Index> indices;  // sampled state components (pointwise)
};

struct EstimatorConfig {
  std::string method = "newton";  // newton | linear_closed_form | gauss_newton_tsvd
  double tol = 1e-8;
  int max_iter = 100;
  double tsvd_threshold = 1e-3;
};

struct SweepConfig {
  double t_min = 0.1;
  double t_max = 1.0;
  int resolution = 100;
};

struct OutputConfig {
  std::string dir = "out";
  bool trajectory = true;
  bool sensitivities = true;
  bool placement = true;
  bool observations = true;
  bool estimates = true;
  bool summary = true;
  int stride = 0;  // rows kept in tabular artifacts; 0 = auto
  std::string format = "csv";  // csv | json for tabular artifacts
};

struct ExperimentConfig {
  ModelConfig model;
  ControlSpec truth_control;
  ControlSpec guess_control;
  double horizon = 2.0;
  double dt = 1e-3;
  PlacementConfig placement;
  ObservationConfig observation;
  double noise_pct = 0.1;
  std::vector<double> noise_levels;  // optional multi-level run; empty = {noise_pct}
  std::vector<std::uint64_t> seeds = {1};
  EstimatorConfig estimator;
  SweepConfig sweep;
  OutputConfig outputs;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

/// Configurations reproducing the four reference twin experiments:
/// linear-decay, quadratic-decay, burgers, advdiff.
ExperimentConfig preset(const std::string& name);

/// Throws ConfigError when the configuration cannot be run.
void validate(const ExperimentConfig& config);

/// Builds the configured model (the integration step is folded into
/// discrete maps) and resolves a control spec against it.
ModelSystem build_model(const ExperimentConfig& config);
ControlVector resolve_control(const ControlSpec& spec, const ModelSystem& model,
                              const ModelOptions& options);
TimeGrid build_grid(const ExperimentConfig& config);

struct RunArtifacts {
  std::vector<std::string> paths;
  nlohmann::json summary;
};

/// Runs the twin-experiment pipeline once per (noise level, seed):
/// integrate, propagate, place, synthesize, assimilate; emits the toggled
/// artifacts and an aggregate summary. Throws NumericalError when the
/// estimator fails on every seed.
RunArtifacts run(const ExperimentConfig& config);

/// Evaluates the estimate-vs-observation sweep over the configured axes
/// and emits sweep.csv plus sweep_summary.json. Scalar models only.
RunArtifacts run_sweep(const ExperimentConfig& config);

}  // namespace fsm
