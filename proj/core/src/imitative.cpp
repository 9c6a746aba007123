#include "imia/imitative.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace imia {

std::string_view to_string(PivotMode m) { return m == PivotMode::kRandom ? "random" : "loss"; }

PivotMode parse_pivot_mode(std::string_view s) {
  if (s == "loss") return PivotMode::kLoss;
  if (s == "random") return PivotMode::kRandom;
  throw DomainError("unknown pivot mode '" + std::string(s) + "'");
}

void ImitativeConfig::validate() const {
  if (n_models < 1) throw DomainError("n_models must be at least 1");
  if (epochs_out < 1 || epochs_in < 1) throw DomainError("epochs_out and epochs_in must be >= 1");
  if (pivot_k < 1) throw DomainError("pivot_k must be at least 1");
  if (!(imitate_fraction > 0.0 && imitate_fraction <= 1.0))
    throw DomainError("imitate_fraction must lie in (0, 1]");
  if (!(temperature >= 0.0) || !std::isfinite(temperature))
    throw DomainError("temperature must be a finite non-negative number");
  for (int h : hidden)
    if (h <= 0) throw DomainError("hidden widths must be positive");
  train.validate();
}

std::vector<int> model_dims(const ImitativeConfig& config, const Dataset& data) {
  std::vector<int> dims{static_cast<int>(data.dim())};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(data.num_classes);
  return dims;
}

PivotSet select_pivot_from_probs(const Matrix& pool_probs, const Dataset& parent,
                                 std::span<const Index> pool, int k, PivotMode mode,
                                 std::uint64_t seed) {
  if (pool.empty()) throw DomainError("cannot select pivots from an empty pool");
  if (k < 1) throw DomainError("pivot k must be at least 1");
  if (pool_probs.rows() != static_cast<Index>(pool.size()))
    throw ShapeError("probability table does not align with the pool");

  // class -> (loss, pool position)
  std::map<int, std::vector<std::pair<double, std::size_t>>> by_class;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int y = parent.labels.at(static_cast<std::size_t>(pool[i]));
    const double loss = -std::log(std::max(pool_probs(static_cast<Index>(i), y), kProbEpsilon));
    by_class[y].emplace_back(loss, i);
  }

  std::mt19937_64 rng(seed);
  PivotSet pivots;
  for (auto& [label, members] : by_class) {
    if (mode == PivotMode::kLoss) {
      std::sort(members.begin(), members.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return pool[a.second] < pool[b.second];
      });
    } else {
      std::shuffle(members.begin(), members.end(), rng);
    }
    const std::size_t take = std::min(members.size(), static_cast<std::size_t>(k));
    for (std::size_t t = 0; t < take; ++t) {
      pivots.indices.push_back(pool[members[t].second]);
      pivots.labels.push_back(label);
    }
  }
  return pivots;
}

PivotSet select_pivot(const TargetOracle& target, const Dataset& parent,
                      std::span<const Index> pool, int k, PivotMode mode, std::uint64_t seed) {
  if (pool.empty()) throw DomainError("cannot select pivots from an empty pool");
  const Dataset rows = subset(parent, pool);
  return select_pivot_from_probs(target.query(rows.features), parent, pool, k, mode, seed);
}

std::vector<std::size_t> find_proxy(const PivotSet& pivots, int label) {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < pivots.labels.size(); ++i)
    if (pivots.labels[i] == label) positions.push_back(i);
  return positions;
}

MlpModel imitative_stage1(const Matrix& imitate_target_probs, const Dataset& imitate_set,
                          const ImitativeConfig& config, std::uint64_t seed, TrainStats* stats) {
  config.validate();
  if (imitate_set.size() == 0) throw DomainError("imitate set is empty");
  MlpModel model = MlpModel::create(model_dims(config, imitate_set), config.activation,
                                    mix_seed(seed, 0));
  TrainConfig train = config.train;
  train.epochs = config.epochs_out;
  train.seed = mix_seed(seed, 1);
  Objective objective;
  objective.kind = config.stage1_loss;
  objective.weights = config.weight_strategy;
  Matrix tempered;
  if (config.stage1_loss != LossKind::kCrossEntropy) {
    tempered = retemper(imitate_target_probs, config.temperature);
    objective.target_probs = &tempered;
  }
  return sgd_train(std::move(model), imitate_set, objective, train, stats);
}

MlpModel imitative_stage2(MlpModel model, const Dataset& fit_set, const ImitativeConfig& config,
                          std::uint64_t seed, TrainStats* stats) {
  if (fit_set.size() == 0) throw DomainError("pivot set is empty");
  TrainConfig train = config.train;
  train.epochs = config.epochs_in;
  train.seed = mix_seed(seed, 2);
  return sgd_train(std::move(model), fit_set, Objective{}, train, stats);
}

ImitativePair imitative_train(const Matrix& imitate_target_probs, const Dataset& imitate_set,
                              const Dataset& pivot_set, const ImitativeConfig& config,
                              std::uint64_t seed) {
  if (pivot_set.size() == 0) throw DomainError("pivot set is empty");
  ImitativePair pair;
  pair.out_model = imitative_stage1(imitate_target_probs, imitate_set, config, seed, &pair.stage1);
  pair.out_fingerprint = pair.out_model.fingerprint();
  pair.in_model = imitative_stage2(pair.out_model, pivot_set, config, seed, &pair.stage2);
  return pair;
}

ImitativePair imitative_train(const TargetOracle& target, const Dataset& imitate_set,
                              const Dataset& pivot_set, const ImitativeConfig& config,
                              std::uint64_t seed) {
  Matrix probs;
  if (config.stage1_loss != LossKind::kCrossEntropy) probs = target.query(imitate_set.features);
  return imitative_train(probs, imitate_set, pivot_set, config, seed);
}

}  // namespace imia
