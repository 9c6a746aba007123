#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "imia/attacks.hpp"
#include "imia/data.hpp"
#include "imia/game.hpp"
#include "imia/imitative.hpp"
#include "imia/serialization.hpp"
#include "imia/signals.hpp"

namespace imia::cli {

struct DataSection {
  std::string source = "synthetic";  // synthetic | csv
  std::size_t n = 600;
  int dim = 10;
  int classes = 2;
  double spread = 0.5;
  std::filesystem::path path;        // csv only
  std::string label_column = "label";
  SplitFractions split;
  std::uint64_t seed = 0;
};

struct AttackSection {
  AttackKind kind = AttackKind::kImia;
  SignalKind signal = SignalKind::kScaledConfidenceProb;
  std::uint64_t seed = 0;
  ImitativeConfig imitative;
  ShadowConfig shadows;
};

struct MetricsSection {
  std::vector<double> fpr = {0.00001, 0.001};
  bool roc = true;
};

struct ExperimentConfig {
  std::filesystem::path output_dir = "imia-run";
  DataSection data;
  GameConfig target;
  AttackSection attack;
  MetricsSection metrics;

  void validate() const;
};

json to_json(const ExperimentConfig& c);
/// Strict: unknown keys and invalid values raise ConfigError naming the key.
ExperimentConfig experiment_config_from_json(const json& j);
/// Reads a config file, or the "config" object of a stage manifest.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Relative output directories resolve against IMIA_OUTPUT_ROOT when it is
/// set, else against the working directory.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

}  // namespace imia::cli
