#include "imia/game.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "imia/serialization.hpp"

namespace imia {

namespace {

std::vector<Index> sample_without_replacement(const std::vector<Index>& from, std::size_t count,
                                              std::mt19937_64& rng) {
  std::vector<Index> shuffled = from;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  shuffled.resize(count);
  std::sort(shuffled.begin(), shuffled.end());
  return shuffled;
}

}  // namespace

Matrix BlackBoxTarget::query(const Matrix& inputs) const {
  rows_queried_ += static_cast<std::size_t>(inputs.rows());
  return softmax_rows(forward(*model_, inputs), temperature_);
}

std::string_view to_string(Setting s) {
  return s == Setting::kAdaptive ? "adaptive" : "non_adaptive";
}

Setting parse_setting(std::string_view s) {
  if (s == "non_adaptive") return Setting::kNonAdaptive;
  if (s == "adaptive") return Setting::kAdaptive;
  throw DomainError("unknown setting '" + std::string(s) + "'");
}

void GameConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw DomainError("train_fraction must lie in (0, 1]");
  if (!(temperature >= 0.0)) throw DomainError("temperature must be non-negative");
  for (int h : hidden)
    if (h <= 0) throw DomainError("hidden widths must be positive");
  train.validate();
}

void GameInstance::check_invariants() const {
  const std::set<Index> trained(target_train.begin(), target_train.end());
  for (Index m : member_queries)
    if (!trained.contains(m)) throw InternalError("member query not in target training set");
  for (Index m : nonmember_queries)
    if (trained.contains(m)) throw InternalError("non-member query in target training set");
  if (queries.size() != truth.size()) throw InternalError("truth vector misaligned");
  for (std::size_t i = 0; i < queries.size(); ++i)
    if (truth[i] != trained.contains(queries[i])) throw InternalError("truth label inconsistent");
  if (config.setting == Setting::kNonAdaptive) {
    const std::set<Index> pool(adversary_pool.begin(), adversary_pool.end());
    for (Index q : queries)
      if (pool.contains(q)) throw InternalError("non-adaptive pool contains a query");
  }
}

GameInstance play_game(const Dataset& dataset, const ExperimentSplit& split,
                       const GameConfig& config) {
  config.validate();
  dataset.validate();
  const auto train_size = static_cast<std::size_t>(
      std::llround(config.train_fraction * static_cast<double>(split.query_train.size())));
  if (train_size == 0) throw DomainError("target training subset is empty");
  if (config.num_members > train_size)
    throw DomainError("requested " + std::to_string(config.num_members) +
                      " members but the target trains on only " + std::to_string(train_size));
  if (config.num_nonmembers > split.query_val.size())
    throw DomainError("requested " + std::to_string(config.num_nonmembers) +
                      " non-members but query_val holds only " +
                      std::to_string(split.query_val.size()));

  std::mt19937_64 rng(mix_seed(config.seed, 1));
  GameInstance game;
  game.config = config;
  game.target_train = sample_without_replacement(split.query_train, train_size, rng);
  game.member_queries = sample_without_replacement(game.target_train, config.num_members, rng);
  game.nonmember_queries = sample_without_replacement(split.query_val, config.num_nonmembers, rng);

  std::vector<std::pair<Index, bool>> tagged;
  for (Index m : game.member_queries) tagged.emplace_back(m, true);
  for (Index m : game.nonmember_queries) tagged.emplace_back(m, false);
  std::shuffle(tagged.begin(), tagged.end(), rng);
  for (auto [q, member] : tagged) {
    game.queries.push_back(q);
    game.truth.push_back(member);
  }

  game.adversary_pool = split.auxiliary_pool();
  if (config.setting == Setting::kAdaptive)
    game.adversary_pool.insert(game.adversary_pool.end(), game.queries.begin(), game.queries.end());
  std::sort(game.adversary_pool.begin(), game.adversary_pool.end());

  std::vector<int> dims;
  dims.push_back(static_cast<int>(dataset.dim()));
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(dataset.num_classes);
  TrainConfig train = config.train;
  train.seed = mix_seed(config.seed, 2);
  game.target = sgd_train(MlpModel::create(dims, config.activation, mix_seed(config.seed, 0)),
                          subset(dataset, game.target_train), Objective{}, train);
  game.check_invariants();
  return game;
}

Matrix query_target(const GameInstance& game, const Matrix& inputs) {
  return softmax_rows(forward(game.target, inputs), game.config.temperature);
}

void save_game(const GameInstance& game, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json j;
  j["format"] = "imia-game v1";
  j["config"] = game_config_to_json(game.config);
  j["target_train"] = game.target_train;
  j["member_queries"] = game.member_queries;
  j["nonmember_queries"] = game.nonmember_queries;
  j["queries"] = game.queries;
  j["truth"] = game.truth;
  j["adversary_pool"] = game.adversary_pool;
  j["target_fingerprint"] = game.target.fingerprint();
  write_json(j, dir / "game.json");
  save_model(game.target, dir / "target.mlp");
}

GameInstance load_game(const std::filesystem::path& dir) {
  const json j = read_json(dir / "game.json");
  if (j.value("format", "") != "imia-game v1") throw FormatError("not a game manifest");
  GameInstance game;
  try {
    game.config = game_config_from_json(j.at("config"));
    game.target_train = j.at("target_train").get<std::vector<Index>>();
    game.member_queries = j.at("member_queries").get<std::vector<Index>>();
    game.nonmember_queries = j.at("nonmember_queries").get<std::vector<Index>>();
    game.queries = j.at("queries").get<std::vector<Index>>();
    game.truth = j.at("truth").get<std::vector<bool>>();
    game.adversary_pool = j.at("adversary_pool").get<std::vector<Index>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed game manifest: ") + e.what());
  }
  game.target = load_model(dir / "target.mlp");
  if (game.target.fingerprint() != j.at("target_fingerprint").get<std::uint64_t>())
    throw FormatError("target model does not match the game manifest");
  game.check_invariants();
  return game;
}

}  // namespace imia
