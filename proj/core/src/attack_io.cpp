#include <cstdio>

#include "imia/attacks.hpp"
#include "imia/serialization.hpp"

namespace imia {

namespace {

namespace fs = std::filesystem;

std::string model_file(const char* prefix, std::size_t j) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.mlp", prefix, j);
  return buf;
}

void save_models(const std::vector<MlpModel>& models, const char* prefix, const fs::path& dir,
                 json& manifest) {
  json fps = json::array();
  for (std::size_t j = 0; j < models.size(); ++j) {
    save_model(models[j], dir / model_file(prefix, j));
    fps.push_back(models[j].fingerprint());
  }
  manifest[std::string(prefix) + "_fingerprints"] = fps;
}

std::vector<MlpModel> load_models(const char* prefix, const fs::path& dir, const json& manifest) {
  const auto fps = manifest.at(std::string(prefix) + "_fingerprints").get<std::vector<std::uint64_t>>();
  std::vector<MlpModel> models;
  for (std::size_t j = 0; j < fps.size(); ++j) {
    models.push_back(load_model(dir / model_file(prefix, j)));
    if (models.back().fingerprint() != fps[j])
      throw FormatError((dir / model_file(prefix, j)).string() +
                        " does not match its manifest fingerprint");
  }
  return models;
}

json open_manifest(const fs::path& dir, std::string_view format) {
  json j = read_json(dir / "manifest.json");
  if (j.value("format", "") != format)
    throw FormatError((dir / "manifest.json").string() + " is not a '" + std::string(format) +
                      "' manifest");
  return j;
}

template <typename Fn>
auto guarded(const fs::path& dir, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace

void save_ensemble(const ImitativeEnsemble& e, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["format"] = "imia-imitative v1";
  j["config"] = imitative_config_to_json(e.config);
  j["seed"] = e.seed;
  j["model_seeds"] = e.model_seeds;
  j["pivot_indices"] = e.pivots.indices;
  j["pivot_labels"] = e.pivots.labels;
  j["imitate_sets"] = e.imitate_sets;
  j["target_rows_queried"] = e.target_rows_queried;
  j["stage1_fingerprints"] = e.out_fingerprints;
  save_models(e.out_models, "out", dir, j);
  save_models(e.in_models, "in", dir, j);
  write_json(j, dir / "manifest.json");
}

ImitativeEnsemble load_imitative_ensemble(const fs::path& dir) {
  const json j = open_manifest(dir, "imia-imitative v1");
  return guarded(dir, [&] {
    ImitativeEnsemble e;
    e.config = imitative_config_from_json(j.at("config"), "config");
    e.seed = j.at("seed").get<std::uint64_t>();
    e.model_seeds = j.at("model_seeds").get<std::vector<std::uint64_t>>();
    e.pivots.indices = j.at("pivot_indices").get<std::vector<Index>>();
    e.pivots.labels = j.at("pivot_labels").get<std::vector<int>>();
    e.imitate_sets = j.at("imitate_sets").get<std::vector<std::vector<Index>>>();
    e.target_rows_queried = j.at("target_rows_queried").get<std::size_t>();
    e.out_fingerprints = j.at("stage1_fingerprints").get<std::vector<std::uint64_t>>();
    e.out_models = load_models("out", dir, j);
    e.in_models = load_models("in", dir, j);
    if (e.out_models.size() != e.in_models.size() || e.pivots.indices.size() != e.pivots.labels.size())
      throw FormatError("inconsistent imitative ensemble in " + dir.string());
    return e;
  });
}

void save_ensemble(const AdaptiveEnsemble& e, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["format"] = "imia-adaptive v1";
  j["config"] = imitative_config_to_json(e.config);
  j["seed"] = e.seed;
  j["model_seeds"] = e.model_seeds;
  j["queries"] = e.queries;
  j["assignment"] = e.assignment;
  j["stage1_sets"] = e.stage1_sets;
  j["stage2_sets"] = e.stage2_sets;
  save_models(e.models, "model", dir, j);
  write_json(j, dir / "manifest.json");
}

AdaptiveEnsemble load_adaptive_ensemble(const fs::path& dir) {
  const json j = open_manifest(dir, "imia-adaptive v1");
  return guarded(dir, [&] {
    AdaptiveEnsemble e;
    e.config = imitative_config_from_json(j.at("config"), "config");
    e.seed = j.at("seed").get<std::uint64_t>();
    e.model_seeds = j.at("model_seeds").get<std::vector<std::uint64_t>>();
    e.queries = j.at("queries").get<std::vector<Index>>();
    e.assignment = j.at("assignment").get<std::vector<std::vector<bool>>>();
    e.stage1_sets = j.at("stage1_sets").get<std::vector<std::vector<Index>>>();
    e.stage2_sets = j.at("stage2_sets").get<std::vector<std::vector<Index>>>();
    e.models = load_models("model", dir, j);
    if (e.assignment.size() != e.models.size())
      throw FormatError("inconsistent adaptive ensemble in " + dir.string());
    return e;
  });
}

void save_ensemble(const ShadowEnsemble& e, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["format"] = "imia-shadows v1";
  j["config"] = shadow_config_to_json(e.config);
  j["seed"] = e.seed;
  j["train_sets"] = e.train_sets;
  j["queries"] = e.queries;
  j["assignment"] = e.assignment;
  save_models(e.models, "shadow", dir, j);
  write_json(j, dir / "manifest.json");
}

ShadowEnsemble load_shadow_ensemble(const fs::path& dir) {
  const json j = open_manifest(dir, "imia-shadows v1");
  return guarded(dir, [&] {
    ShadowEnsemble e;
    e.config = shadow_config_from_json(j.at("config"), "config");
    e.seed = j.at("seed").get<std::uint64_t>();
    e.train_sets = j.at("train_sets").get<std::vector<std::vector<Index>>>();
    e.queries = j.at("queries").get<std::vector<Index>>();
    e.assignment = j.at("assignment").get<std::vector<std::vector<bool>>>();
    e.models = load_models("shadow", dir, j);
    if (e.train_sets.size() != e.models.size())
      throw FormatError("inconsistent shadow ensemble in " + dir.string());
    return e;
  });
}

}  // namespace imia
