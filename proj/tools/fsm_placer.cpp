// Copyright (c) 2026 fsm_placer contributors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner for forward-sensitivity observation placement.
// Verbs: run, sweep, preset, validate. Exit codes: 0 success,
// 2 configuration/validation error, 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fsm/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

fsm::ExperimentConfig load_config(const std::string& config_path, const std::string& preset_name) {
  if (!preset_name.empty()) return fsm::preset(preset_name);
  if (config_path.empty()) throw fsm::ConfigError("either --config or --preset is required");
  std::ifstream in(config_path);
  if (!in) throw fsm::ConfigError("cannot open config file: " + config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw fsm::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return fsm::experiment_config_from_json(j);
}

struct Overrides {
  std::string out_dir;
  std::string seeds;
  std::string times;
  std::string format;
  double noise = -1.0;
};

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

void apply_overrides(fsm::ExperimentConfig& config, const Overrides& ov) {
  if (!ov.out_dir.empty()) config.outputs.dir = ov.out_dir;
  if (!ov.format.empty()) config.outputs.format = ov.format;
  if (ov.noise >= 0.0) {
    config.noise_pct = ov.noise;
    config.noise_levels.clear();
  }
  if (!ov.seeds.empty()) {
    config.seeds.clear();
    for (const double s : parse_double_list(ov.seeds))
      config.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (!ov.times.empty()) {
    config.placement.mode = "explicit";
    config.placement.times = parse_double_list(ov.times);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fsm_placer: forward-sensitivity observation placement experiments"};
  app.require_subcommand(1);

  std::string config_path, preset_name, emit_path;
  Overrides ov;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)");
    cmd->add_option("--preset", preset_name,
                    "built-in preset: linear-decay, quadratic-decay, burgers, advdiff");
    cmd->add_option("--out", ov.out_dir, "output directory override");
    cmd->add_option("--seed", ov.seeds, "comma-separated seed list override");
    cmd->add_option("--noise", ov.noise, "noise fraction override (e.g. 0.1)");
    cmd->add_option("--times", ov.times, "comma-separated explicit observation times override");
    cmd->add_option("--format", ov.format, "tabular artifact format: csv or json");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "run the twin-experiment pipeline");
  add_common(cmd_run);
  CLI::App* cmd_sweep =
      app.add_subcommand("sweep", "evaluate the estimate-sensitivity sweep grid");
  add_common(cmd_sweep);
  CLI::App* cmd_validate = app.add_subcommand("validate", "validate a config and exit");
  add_common(cmd_validate);

  CLI::App* cmd_preset = app.add_subcommand("preset", "emit a built-in preset config");
  std::string preset_positional;
  cmd_preset->add_option("name", preset_positional, "preset name")->required();
  cmd_preset->add_option("--emit", emit_path, "write the config here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (cmd_preset->parsed()) {
      const auto config = fsm::preset(preset_positional);
      const std::string text = fsm::to_json(config).dump(2) + "\n";
      if (emit_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(emit_path);
        if (!out) throw fsm::ConfigError("cannot write to " + emit_path);
        out << text;
        std::cout << "wrote " << emit_path << "\n";
      }
      return kExitOk;
    }

    fsm::ExperimentConfig config = load_config(config_path, preset_name);
    apply_overrides(config, ov);

    if (cmd_validate->parsed()) {
      fsm::validate(config);
      std::cout << "config OK\n";
      return kExitOk;
    }
    if (cmd_run->parsed()) {
      const fsm::RunArtifacts artifacts = fsm::run(config);
      for (const auto& p : artifacts.paths) std::cout << "wrote " << p << "\n";
      return kExitOk;
    }
    if (cmd_sweep->parsed()) {
      const fsm::RunArtifacts artifacts = fsm::run_sweep(config);
      for (const auto& p : artifacts.paths) std::cout << "wrote " << p << "\n";
      return kExitOk;
    }
  } catch (const fsm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fsm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
