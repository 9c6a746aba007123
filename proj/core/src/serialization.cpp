#include "imia/serialization.hpp"

#include <fstream>
#include <sstream>

namespace imia {

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

JsonFields::JsonFields(const json& object, std::string path)
    : object_(object), path_(std::move(path)) {
  if (!object_.is_object())
    throw ConfigError("'" + (path_.empty() ? std::string("<root>") : path_) +
                      "' must be an object");
}

const json* JsonFields::find(const char* key) {
  seen_.insert(key);
  auto it = object_.find(key);
  return it == object_.end() ? nullptr : &*it;
}

void JsonFields::finish() const {
  for (const auto& [key, value] : object_.items())
    if (!seen_.contains(key)) throw ConfigError("unknown key '" + qualified(key.c_str()) + "'");
}

namespace {

template <typename Fn>
void wrap_domain(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

}  // namespace

json train_config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"momentum", c.momentum},
              {"weight_decay", c.weight_decay},
              {"schedule", std::string(to_string(c.schedule))},
              {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, const std::string& path) {
  TrainConfig c;
  JsonFields f(j, path);
  f.optional("epochs", c.epochs);
  f.optional("batch_size", c.batch_size);
  f.optional("learning_rate", c.learning_rate);
  f.optional("momentum", c.momentum);
  f.optional("weight_decay", c.weight_decay);
  f.optional_enum("schedule", c.schedule, parse_schedule);
  f.optional("seed", c.seed);
  f.finish();
  wrap_domain(path, [&] { c.validate(); });
  return c;
}

json game_config_to_json(const GameConfig& c) {
  return json{{"train_fraction", c.train_fraction},
              {"members", c.num_members},
              {"nonmembers", c.num_nonmembers},
              {"setting", std::string(to_string(c.setting))},
              {"hidden", c.hidden},
              {"activation", std::string(to_string(c.activation))},
              {"train", train_config_to_json(c.train)},
              {"temperature", c.temperature},
              {"seed", c.seed}};
}

GameConfig game_config_from_json(const json& j, const std::string& path) {
  GameConfig c;
  JsonFields f(j, path);
  f.optional("train_fraction", c.train_fraction);
  f.optional("members", c.num_members);
  f.optional("nonmembers", c.num_nonmembers);
  f.optional_enum("setting", c.setting, parse_setting);
  f.optional("hidden", c.hidden);
  f.optional_enum("activation", c.activation, parse_activation);
  if (const json* t = f.child("train")) c.train = train_config_from_json(*t, f.qualified("train"));
  f.optional("temperature", c.temperature);
  f.optional("seed", c.seed);
  f.finish();
  wrap_domain(path, [&] { c.validate(); });
  return c;
}

json imitative_config_to_json(const ImitativeConfig& c) {
  return json{{"n_models", c.n_models},
              {"epochs_out", c.epochs_out},
              {"epochs_in", c.epochs_in},
              {"pivot_k", c.pivot_k},
              {"pivot_mode", std::string(to_string(c.pivot_mode))},
              {"imitate_fraction", c.imitate_fraction},
              {"stage1_loss", std::string(to_string(c.stage1_loss))},
              {"weight_strategy", std::string(to_string(c.weight_strategy))},
              {"temperature", c.temperature},
              {"exclude_pivots_from_imitate", c.exclude_pivots_from_imitate},
              {"hidden", c.hidden},
              {"activation", std::string(to_string(c.activation))},
              {"train", train_config_to_json(c.train)}};
}

ImitativeConfig imitative_config_from_json(const json& j, const std::string& path) {
  ImitativeConfig c;
  JsonFields f(j, path);
  f.optional("n_models", c.n_models);
  f.optional("epochs_out", c.epochs_out);
  f.optional("epochs_in", c.epochs_in);
  f.optional("pivot_k", c.pivot_k);
  f.optional_enum("pivot_mode", c.pivot_mode, parse_pivot_mode);
  f.optional("imitate_fraction", c.imitate_fraction);
  f.optional_enum("stage1_loss", c.stage1_loss, parse_loss_kind);
  f.optional_enum("weight_strategy", c.weight_strategy, parse_weight_strategy);
  f.optional("temperature", c.temperature);
  f.optional("exclude_pivots_from_imitate", c.exclude_pivots_from_imitate);
  f.optional("hidden", c.hidden);
  f.optional_enum("activation", c.activation, parse_activation);
  if (const json* t = f.child("train")) c.train = train_config_from_json(*t, f.qualified("train"));
  f.finish();
  wrap_domain(path, [&] { c.validate(); });
  return c;
}

json shadow_config_to_json(const ShadowConfig& c) {
  return json{{"n_models", c.n_models},
              {"train_fraction", c.train_fraction},
              {"hidden", c.hidden},
              {"activation", std::string(to_string(c.activation))},
              {"train", train_config_to_json(c.train)}};
}

ShadowConfig shadow_config_from_json(const json& j, const std::string& path) {
  ShadowConfig c;
  JsonFields f(j, path);
  f.optional("n_models", c.n_models);
  f.optional("train_fraction", c.train_fraction);
  f.optional("hidden", c.hidden);
  f.optional_enum("activation", c.activation, parse_activation);
  if (const json* t = f.child("train")) c.train = train_config_from_json(*t, f.qualified("train"));
  f.finish();
  wrap_domain(path, [&] { c.validate(); });
  return c;
}

}  // namespace imia
