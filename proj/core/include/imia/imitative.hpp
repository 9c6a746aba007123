#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "imia/common.hpp"
#include "imia/data.hpp"
#include "imia/game.hpp"
#include "imia/nn.hpp"

namespace imia {

enum class PivotMode { kLoss, kRandom };

std::string_view to_string(PivotMode m);
PivotMode parse_pivot_mode(std::string_view s);

struct ImitativeConfig {
  int n_models = 10;
  int epochs_out = 100;  // stage 1
  int epochs_in = 20;    // stage 2
  int pivot_k = 100;
  PivotMode pivot_mode = PivotMode::kLoss;
  double imitate_fraction = 0.5;
  /// cross_entropy turns stage 1 into plain shadow training.
  LossKind stage1_loss = LossKind::kImitation;
  WeightStrategy weight_strategy = WeightStrategy::kSqrt;
  /// Applied to the target's probabilities before they become training targets.
  double temperature = 1.0;
  bool exclude_pivots_from_imitate = false;
  std::vector<int> hidden = {256, 128};
  Activation activation = Activation::kRelu;
  /// Optimizer settings shared by both stages; `epochs` and `seed` are ignored.
  TrainConfig train;

  void validate() const;
};

/// Pivot rows as parent-dataset indices, grouped by ascending class and, for
/// loss mode, by ascending target loss inside a class.
struct PivotSet {
  std::vector<Index> indices;
  std::vector<int> labels;

  std::size_t size() const { return indices.size(); }
};

/// Per class, the k pool rows with the lowest target cross-entropy (ties to the
/// lower pool index), or k uniformly random rows in random mode.
PivotSet select_pivot(const TargetOracle& target, const Dataset& parent,
                      std::span<const Index> pool, int k, PivotMode mode = PivotMode::kLoss,
                      std::uint64_t seed = 0);

/// Same selection from an already-queried probability table whose rows align
/// with `pool`.
PivotSet select_pivot_from_probs(const Matrix& pool_probs, const Dataset& parent,
                                 std::span<const Index> pool, int k, PivotMode mode,
                                 std::uint64_t seed);

/// Positions in `pivots` whose label equals `label`; empty if the class has
/// no pivots.
std::vector<std::size_t> find_proxy(const PivotSet& pivots, int label);

struct ImitativePair {
  MlpModel out_model;
  MlpModel in_model;
  std::uint64_t out_fingerprint = 0;  // of the stage-1 snapshot
  TrainStats stage1;
  TrainStats stage2;
};

/// Fresh model trained epochs_out epochs on `imitate_set` with the configured
/// stage-1 loss. `imitate_target_probs` rows align with the set and are
/// ignored for cross_entropy.
MlpModel imitative_stage1(const Matrix& imitate_target_probs, const Dataset& imitate_set,
                          const ImitativeConfig& config, std::uint64_t seed,
                          TrainStats* stats = nullptr);

/// Continues `model` with cross-entropy on `fit_set` for epochs_in epochs,
/// restarting the learning-rate schedule.
MlpModel imitative_stage2(MlpModel model, const Dataset& fit_set, const ImitativeConfig& config,
                          std::uint64_t seed, TrainStats* stats = nullptr);

/// Stage 1 trains a fresh model for epochs_out epochs on `imitate_set` with the
/// configured loss against `imitate_target_probs` (rows aligned with the set;
/// ignored for cross_entropy). Stage 2 continues from that snapshot with
/// cross-entropy on `pivot_set` for epochs_in epochs, restarting the schedule.
ImitativePair imitative_train(const Matrix& imitate_target_probs, const Dataset& imitate_set,
                              const Dataset& pivot_set, const ImitativeConfig& config,
                              std::uint64_t seed);

/// Queries `target` once for the imitate set (never for cross_entropy stage 1)
/// and delegates to the table overload.
ImitativePair imitative_train(const TargetOracle& target, const Dataset& imitate_set,
                              const Dataset& pivot_set, const ImitativeConfig& config,
                              std::uint64_t seed);

/// Layer widths of models built from `config` for `data`.
std::vector<int> model_dims(const ImitativeConfig& config, const Dataset& data);

}  // namespace imia
