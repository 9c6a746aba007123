#include "config.hpp"

#include <cstdlib>

namespace imia::cli {

namespace {

template <typename Fn>
void as_config_error(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

json split_to_json(const SplitFractions& s) {
  return json{{"query_train", s.query_train},
              {"query_val", s.query_val},
              {"aux_train", s.aux_train},
              {"aux_val", s.aux_val},
              {"aux_reference", s.aux_reference}};
}

SplitFractions split_from_json(const json& j, const std::string& path) {
  SplitFractions s;
  JsonFields f(j, path);
  f.optional("query_train", s.query_train);
  f.optional("query_val", s.query_val);
  f.optional("aux_train", s.aux_train);
  f.optional("aux_val", s.aux_val);
  f.optional("aux_reference", s.aux_reference);
  f.finish();
  double total = 0.0;
  for (double x : s.as_array()) {
    if (!(x >= 0.0)) throw ConfigError("'" + path + "': fractions must be non-negative");
    total += x;
  }
  if (total > 1.0 + 1e-12) throw ConfigError("'" + path + "': fractions sum to more than 1");
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("'output_dir' must not be empty");
  if (data.source == "synthetic") {
    as_config_error("data", [&] {
      if (data.dim < 2) throw DomainError("dim must be at least 2");
      if (data.classes < 2) throw DomainError("classes must be at least 2");
      if (data.n < static_cast<std::size_t>(data.classes)) throw DomainError("n must be at least classes");
      if (!(data.spread >= 0.0)) throw DomainError("spread must be non-negative");
    });
  } else if (data.source == "csv") {
    if (data.path.empty()) throw ConfigError("'data.path' is required when data.source is csv");
  } else {
    throw ConfigError("'data.source' must be 'synthetic' or 'csv'");
  }
  as_config_error("target", [&] { target.validate(); });
  as_config_error("attack.imitative", [&] { attack.imitative.validate(); });
  as_config_error("attack.shadows", [&] { attack.shadows.validate(); });
  if (is_adaptive(attack.kind) && target.setting != Setting::kAdaptive)
    throw ConfigError("'attack.kind' " + std::string(to_string(attack.kind)) +
                      " needs target.setting 'adaptive'");
  if (needs_imitative(attack.kind) && is_adaptive(attack.kind) && attack.imitative.n_models % 2 != 0)
    throw ConfigError("'attack.imitative.n_models' must be even for adaptive attacks");
  if (attack.kind == AttackKind::kLiraOnline && attack.shadows.n_models % 2 != 0)
    throw ConfigError("'attack.shadows.n_models' must be even for lira_online");
  for (double f : metrics.fpr)
    if (!(f >= 0.0 && f < 1.0)) throw ConfigError("'metrics.fpr' entries must lie in [0, 1)");
}

json to_json(const ExperimentConfig& c) {
  json data{{"source", c.data.source}};
  if (c.data.source == "csv") {
    data["path"] = c.data.path.string();
    data["label_column"] = c.data.label_column;
  } else {
    data["n"] = c.data.n;
    data["dim"] = c.data.dim;
    data["classes"] = c.data.classes;
    data["spread"] = c.data.spread;
  }
  data["split"] = split_to_json(c.data.split);
  data["seed"] = c.data.seed;

  json attack{{"kind", std::string(to_string(c.attack.kind))},
              {"signal", std::string(to_string(c.attack.signal))},
              {"seed", c.attack.seed},
              {"imitative", imitative_config_to_json(c.attack.imitative)},
              {"shadows", shadow_config_to_json(c.attack.shadows)}};
  json metrics{{"fpr", c.metrics.fpr}, {"roc", c.metrics.roc}};
  return json{{"output_dir", c.output_dir.string()},
              {"data", data},
              {"target", game_config_to_json(c.target)},
              {"attack", attack},
              {"metrics", metrics}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  JsonFields root(j, "");
  std::string out;
  if (root.optional("output_dir", out)) c.output_dir = out;

  if (const json* d = root.child("data")) {
    JsonFields f(*d, "data");
    f.optional("source", c.data.source);
    f.optional("n", c.data.n);
    f.optional("dim", c.data.dim);
    f.optional("classes", c.data.classes);
    f.optional("spread", c.data.spread);
    std::string p;
    if (f.optional("path", p)) c.data.path = p;
    f.optional("label_column", c.data.label_column);
    if (const json* s = f.child("split")) c.data.split = split_from_json(*s, "data.split");
    f.optional("seed", c.data.seed);
    f.finish();
  }
  if (const json* t = root.child("target")) c.target = game_config_from_json(*t, "target");
  if (const json* a = root.child("attack")) {
    JsonFields f(*a, "attack");
    f.optional_enum("kind", c.attack.kind, parse_attack_kind);
    f.optional_enum("signal", c.attack.signal, parse_signal_kind);
    f.optional("seed", c.attack.seed);
    if (const json* i = f.child("imitative"))
      c.attack.imitative = imitative_config_from_json(*i, "attack.imitative");
    if (const json* s = f.child("shadows"))
      c.attack.shadows = shadow_config_from_json(*s, "attack.shadows");
    f.finish();
  }
  if (const json* m = root.child("metrics")) {
    JsonFields f(*m, "metrics");
    f.optional("fpr", c.metrics.fpr);
    f.optional("roc", c.metrics.roc);
    f.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  if (j.is_object() && j.contains("format") && j.contains("config")) return experiment_config_from_json(j["config"]);
  return experiment_config_from_json(j);
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir) {
  if (dir.is_absolute()) return dir;
  if (const char* root = std::getenv("IMIA_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / dir;
  return std::filesystem::current_path() / dir;
}

}  // namespace imia::cli
