#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace imia::cli {

struct RunOptions {
  int jobs = 1;
};

/// Output layout under the resolved output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path target() const { return root / "target"; }
  std::filesystem::path ensemble() const { return root / "ensemble"; }
  std::filesystem::path attack() const { return root / "attack"; }
  std::filesystem::path metrics() const { return root / "metrics"; }
  std::filesystem::path analysis() const { return root / "analysis"; }
  std::filesystem::path bench() const { return root / "bench"; }
};

Layout layout_for(const ExperimentConfig& config);

void cmd_gen_data(const ExperimentConfig& config, const RunOptions& opts);
void cmd_train_target(const ExperimentConfig& config, const RunOptions& opts);
void cmd_prepare(const ExperimentConfig& config, const RunOptions& opts);
void cmd_attack(const ExperimentConfig& config, const RunOptions& opts);

struct EvaluateRequest {
  std::filesystem::path scores;
  std::filesystem::path out_dir;
  std::vector<double> fpr;
  bool roc = true;
};

/// Consumes only a score CSV. Writes metrics.json (and roc.csv) to out_dir.
json cmd_evaluate(const EvaluateRequest& request);
void cmd_evaluate(const ExperimentConfig& config, const RunOptions& opts);

void cmd_analyze(const ExperimentConfig& config, const RunOptions& opts);
/// Runs gen-data through evaluate and writes per-phase wall-clock seconds.
json cmd_bench(const ExperimentConfig& config, const RunOptions& opts);

/// FNV-1a of a file's bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);

}  // namespace imia::cli
