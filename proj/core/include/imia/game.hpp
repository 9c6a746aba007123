#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "imia/common.hpp"
#include "imia/data.hpp"
#include "imia/nn.hpp"

namespace imia {

/// The only surface the adversary side sees: softmax probabilities for
/// arbitrary inputs.
class TargetOracle {
 public:
  virtual ~TargetOracle() = default;
  virtual Matrix query(const Matrix& inputs) const = 0;
  virtual int num_classes() const = 0;
};

/// Oracle over a model held by the challenger. Counts queried rows.
class BlackBoxTarget final : public TargetOracle {
 public:
  explicit BlackBoxTarget(const MlpModel& model, double temperature = 1.0)
      : model_(&model), temperature_(temperature) {}

  Matrix query(const Matrix& inputs) const override;
  int num_classes() const override { return model_->num_classes(); }
  std::size_t rows_queried() const { return rows_queried_.load(); }

 private:
  const MlpModel* model_;
  double temperature_;
  mutable std::atomic<std::size_t> rows_queried_{0};
};

enum class Setting { kNonAdaptive, kAdaptive };

std::string_view to_string(Setting s);
Setting parse_setting(std::string_view s);

struct GameConfig {
  double train_fraction = 1.0;  // share of query_train the target trains on
  std::size_t num_members = 0;
  std::size_t num_nonmembers = 0;
  Setting setting = Setting::kNonAdaptive;
  std::vector<int> hidden = {256, 128};
  Activation activation = Activation::kRelu;
  TrainConfig train;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GameInstance {
  MlpModel target;
  GameConfig config;
  std::vector<Index> target_train;      // sorted
  std::vector<Index> member_queries;    // sorted, subset of target_train
  std::vector<Index> nonmember_queries; // sorted, from query_val
  std::vector<Index> queries;           // shuffled union sent to the adversary
  std::vector<bool> truth;              // aligned with queries
  std::vector<Index> adversary_pool;    // sorted

  /// Throws InternalError if a game invariant is broken.
  void check_invariants() const;
};

/// Trains the target on a random subset of split.query_train, then builds the
/// query set and the adversary's pool for the configured setting.
GameInstance play_game(const Dataset& dataset, const ExperimentSplit& split,
                       const GameConfig& config);

/// softmax_temp(forward(target, inputs), game temperature).
Matrix query_target(const GameInstance& game, const Matrix& inputs);

/// Writes `game.json` and `target.mlp` into `dir`.
void save_game(const GameInstance& game, const std::filesystem::path& dir);
GameInstance load_game(const std::filesystem::path& dir);

}  // namespace imia
