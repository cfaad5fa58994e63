#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ltvchase/simulator.hpp"

namespace ltvchase {

struct ControllerEntry {
  std::string label;
  ControllerSpec spec;
};

// One experiment: a plant, a disturbance model and several controllers run
// over a list of seeds. See configs/README.md for the file schema.
struct ExperimentConfig {
  std::string name = "experiment";
  PlantModel plant = LtvFormulaPlant{};
  DisturbanceModel disturbance;
  std::vector<ControllerEntry> controllers;
  double W = 1.0;
  BoxBounds theta_box{-2.0, 3.0};
  LqrWeights weights;
  int horizon = 100;
  std::vector<std::uint64_t> seeds{1};
  std::optional<Vector> x0;
  std::string output_dir = "out";
  int samples = kDefaultSteinerSamples;  // default N for cbc controllers
  int window_cap = kDefaultWindowCap;
  bool chase_diagnostics = false;

  // ConfigError naming the offending field.
  void validate() const;
};

// Command-line overrides applied on top of a loaded config.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> controller;  // keep only this label
  std::optional<int> samples;
  std::optional<int> horizon;
  std::optional<std::string> output_dir;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& config);

// 16 hex digits identifying the canonical form of the config.
std::string config_hash(const ExperimentConfig& config);

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides);

RunSpec make_run_spec(const ExperimentConfig& config, const ControllerEntry& controller, std::uint64_t seed);

}  // namespace ltvchase
