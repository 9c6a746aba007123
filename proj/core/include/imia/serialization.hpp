#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "imia/attacks.hpp"
#include "imia/common.hpp"
#include "imia/game.hpp"
#include "imia/imitative.hpp"
#include "imia/nn.hpp"

namespace imia {

using json = nlohmann::ordered_json;

/// Pretty-printed with a trailing newline; byte-stable for equal documents.
void write_json(const json& j, const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);

/// Strict reader over one JSON object: every key must be consumed, and type or
/// value problems are reported with the full dotted key path.
class JsonFields {
 public:
  JsonFields(const json& object, std::string path);

  template <typename T>
  bool optional(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return false;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("key '" + qualified(key) + "' has the wrong type");
    }
    return true;
  }

  template <typename T>
  void required(const char* key, T& out) {
    if (!optional(key, out)) throw ConfigError("missing key '" + qualified(key) + "'");
  }

  /// Reads a string and maps it through `parse`, turning parse failures into
  /// ConfigError naming the key.
  template <typename E, typename Parse>
  bool optional_enum(const char* key, E& out, Parse parse) {
    std::string s;
    if (!optional(key, s)) return false;
    try {
      out = parse(s);
    } catch (const Error& e) {
      throw ConfigError("key '" + qualified(key) + "': " + e.what());
    }
    return true;
  }

  const json* child(const char* key) { return find(key); }
  std::string qualified(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  /// Throws ConfigError for the first key that was never read.
  void finish() const;

 private:
  const json* find(const char* key);

  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j, const std::string& path = "train");

json game_config_to_json(const GameConfig& c);
GameConfig game_config_from_json(const json& j, const std::string& path = "target");

json imitative_config_to_json(const ImitativeConfig& c);
ImitativeConfig imitative_config_from_json(const json& j, const std::string& path = "attack");

json shadow_config_to_json(const ShadowConfig& c);
ShadowConfig shadow_config_from_json(const json& j, const std::string& path = "shadows");

}  // namespace imia
