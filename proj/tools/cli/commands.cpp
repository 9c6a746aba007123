#include "commands.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "imia/metrics.hpp"

namespace imia::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFormat = "imia-manifest v1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Records the command, the full config and a digest of every output so a
/// stage can be replayed and checked byte for byte.
void write_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig& config,
                    const std::vector<std::string>& outputs) {
  json files = json::object();
  for (const auto& name : outputs) files[name] = file_digest(dir / name);
  json m{{"format", kManifestFormat}, {"command", command}, {"config", to_json(config)}, {"outputs", files}};
  write_json(m, dir / "manifest.json");
}

void require_file(const fs::path& p, const char* produced_by) {
  if (!fs::exists(p))
    throw ConfigError("missing " + p.string() + "; run '" + produced_by + "' first");
}

json split_to_json(const ExperimentSplit& s) {
  return json{{"query_train", s.query_train},
              {"query_val", s.query_val},
              {"aux_train", s.aux_train},
              {"aux_val", s.aux_val},
              {"aux_reference", s.aux_reference}};
}

ExperimentSplit split_from_json(const json& j) {
  try {
    ExperimentSplit s;
    s.query_train = j.at("query_train").get<std::vector<Index>>();
    s.query_val = j.at("query_val").get<std::vector<Index>>();
    s.aux_train = j.at("aux_train").get<std::vector<Index>>();
    s.aux_val = j.at("aux_val").get<std::vector<Index>>();
    s.aux_reference = j.at("aux_reference").get<std::vector<Index>>();
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed split file: ") + e.what());
  }
}

struct Loaded {
  Dataset data;
  ExperimentSplit split;
};

Loaded load_data(const Layout& l) {
  require_file(l.data() / "dataset.csv", "gen-data");
  require_file(l.data() / "split.json", "gen-data");
  Loaded out;
  out.data = load_csv(l.data() / "dataset.csv", "label");
  out.split = split_from_json(read_json(l.data() / "split.json").at("split"));
  return out;
}

GameInstance load_target(const Layout& l) {
  require_file(l.target() / "game.json", "train-target");
  return load_game(l.target());
}

std::uint64_t attack_seed(const ExperimentConfig& c) { return c.attack.seed; }

fs::path ensemble_dir(const Layout& l, AttackKind kind) {
  if (needs_imitative(kind)) return l.ensemble() / (is_adaptive(kind) ? "adaptive" : "imitative");
  if (needs_shadows(kind)) return l.ensemble() / (is_adaptive(kind) ? "shadows_online" : "shadows");
  return l.ensemble() / "none";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 1099511628211ull;
  }
  return hex64(h);
}

Layout layout_for(const ExperimentConfig& config) { return Layout{resolve_output_dir(config.output_dir)}; }

void cmd_gen_data(const ExperimentConfig& c, const RunOptions&) {
  const Layout l = layout_for(c);
  fs::create_directories(l.data());
  Dataset data;
  if (c.data.source == "csv") {
    data = load_csv(c.data.path, c.data.label_column);
  } else {
    data = gen_synthetic(c.data.n, c.data.dim, c.data.classes, c.data.spread, mix_seed(c.data.seed, 0));
  }
  const ExperimentSplit split = make_split(data, c.data.split, mix_seed(c.data.seed, 1));
  write_csv(data, l.data() / "dataset.csv");
  write_json(json{{"rows", data.size()}, {"classes", data.num_classes}, {"split", split_to_json(split)}},
             l.data() / "split.json");
  write_manifest(l.data(), "gen-data", c, {"dataset.csv", "split.json"});
  log(LogLevel::kInfo, "gen-data: " + std::to_string(data.size()) + " rows -> " + l.data().string());
}

void cmd_train_target(const ExperimentConfig& c, const RunOptions&) {
  const Layout l = layout_for(c);
  const Loaded in = load_data(l);
  const GameInstance game = play_game(in.data, in.split, c.target);
  save_game(game, l.target());
  write_manifest(l.target(), "train-target", c, {"game.json", "target.mlp"});
  log(LogLevel::kInfo, "train-target: train accuracy " +
                           fmt_double(accuracy(game.target, subset(in.data, game.target_train))));
}

void cmd_prepare(const ExperimentConfig& c, const RunOptions& opts) {
  const Layout l = layout_for(c);
  const Loaded in = load_data(l);
  const GameInstance game = load_target(l);
  const BlackBoxTarget oracle(game.target, game.config.temperature);
  const AttackKind kind = c.attack.kind;
  const fs::path dir = ensemble_dir(l, kind);
  fs::create_directories(dir);
  std::vector<std::string> outputs{};
  if (needs_imitative(kind) && !is_adaptive(kind)) {
    save_ensemble(imia_prepare_nonadaptive(oracle, in.data, game.adversary_pool, c.attack.imitative,
                                           attack_seed(c), opts.jobs),
                  dir);
  } else if (needs_imitative(kind)) {
    save_ensemble(imia_prepare_adaptive(oracle, in.data, game.adversary_pool, game.queries,
                                        c.attack.imitative, attack_seed(c), opts.jobs),
                  dir);
  } else if (kind == AttackKind::kLiraOnline) {
    save_ensemble(prepare_shadows_online(in.data, game.adversary_pool, game.queries, c.attack.shadows,
                                         attack_seed(c), opts.jobs),
                  dir);
  } else if (needs_shadows(kind)) {
    save_ensemble(prepare_shadows_offline(in.data, game.adversary_pool, c.attack.shadows, attack_seed(c),
                                          opts.jobs),
                  dir);
  }
  if (fs::exists(dir / "manifest.json")) outputs.push_back("manifest.json");
  fs::create_directories(l.ensemble());
  json m{{"format", kManifestFormat},
         {"command", "prepare"},
         {"config", to_json(c)},
         {"ensemble", dir.filename().string()},
         {"target_rows_queried", oracle.rows_queried()}};
  if (!outputs.empty()) m["ensemble_manifest"] = file_digest(dir / "manifest.json");
  write_json(m, l.ensemble() / "manifest.json");
  log(LogLevel::kInfo, "prepare: " + std::string(to_string(kind)) + " -> " + dir.string());
}

namespace {

ScoreTable run_attack(const ExperimentConfig& c, const Layout& l, const Loaded& in, const GameInstance& game,
                      const TargetOracle& oracle, int jobs) {
  const AttackKind kind = c.attack.kind;
  const fs::path dir = ensemble_dir(l, kind);
  PreparedAttack prep;
  ImitativeEnsemble ie;
  AdaptiveEnsemble ae;
  ShadowEnsemble se;
  if (needs_imitative(kind) || needs_shadows(kind)) require_file(dir / "manifest.json", "prepare");
  if (needs_imitative(kind) && !is_adaptive(kind)) {
    ie = load_imitative_ensemble(dir);
    prep.imitative = &ie;
  } else if (needs_imitative(kind)) {
    ae = load_adaptive_ensemble(dir);
    prep.adaptive = &ae;
  } else if (needs_shadows(kind)) {
    se = load_shadow_ensemble(dir);
    prep.shadows = &se;
  }
  return score_queries(kind, prep, in.data, oracle, game.queries, game.truth, c.attack.signal, jobs);
}

}  // namespace

void cmd_attack(const ExperimentConfig& c, const RunOptions& opts) {
  const Layout l = layout_for(c);
  const Loaded in = load_data(l);
  const GameInstance game = load_target(l);
  const BlackBoxTarget oracle(game.target, game.config.temperature);
  const ScoreTable table = run_attack(c, l, in, game, oracle, opts.jobs);
  fs::create_directories(l.attack());
  write_score_csv(table, l.attack() / "scores.csv");
  write_manifest(l.attack(), "attack", c, {"scores.csv"});
  std::size_t failed = 0;
  for (const auto& r : table.rows) failed += r.warnings.find("failed:") != std::string::npos ? 1 : 0;
  if (failed > 0) log_warning(std::to_string(failed) + " queries could not be scored");
  log(LogLevel::kInfo, "attack: " + std::to_string(table.size()) + " scores -> " + l.attack().string());
}

json cmd_evaluate(const EvaluateRequest& req) {
  const ScoreTable table = read_score_csv(req.scores);
  const RocCurve curve = roc(table);
  json tprs = json::object();
  for (double f : req.fpr) tprs[fmt_double(f)] = tpr_at_fpr(curve, f);
  const RocPoint strict = strictest_nonzero_point(curve);
  const std::size_t members = table.num_members();
  json report{{"queries", table.size()},
              {"members", members},
              {"nonmembers", table.size() - members},
              {"balanced_accuracy", balanced_accuracy(curve)},
              {"tpr_at_fpr", tprs},
              {"strictest_nonzero_fpr", json{{"fpr", strict.fpr}, {"tpr", strict.tpr}}},
              {"scores_digest", file_digest(req.scores)}};
  fs::create_directories(req.out_dir);
  write_json(report, req.out_dir / "metrics.json");
  if (req.roc) write_roc_csv(curve, req.out_dir / "roc.csv");
  return report;
}

void cmd_evaluate(const ExperimentConfig& c, const RunOptions&) {
  const Layout l = layout_for(c);
  require_file(l.attack() / "scores.csv", "attack");
  EvaluateRequest req{l.attack() / "scores.csv", l.metrics(), c.metrics.fpr, c.metrics.roc};
  const json report = cmd_evaluate(req);
  std::vector<std::string> outputs{"metrics.json"};
  if (c.metrics.roc) outputs.emplace_back("roc.csv");
  write_manifest(l.metrics(), "evaluate", c, outputs);
  std::printf("%s\n", report.dump().c_str());
}

void cmd_analyze(const ExperimentConfig& c, const RunOptions& opts) {
  const AttackKind kind = c.attack.kind;
  if (!needs_imitative(kind))
    throw ConfigError("'attack.kind' must be an imia variant for analyze (got " + std::string(to_string(kind)) + ")");
  const Layout l = layout_for(c);
  const Loaded in = load_data(l);
  const GameInstance game = load_target(l);
  const BlackBoxTarget oracle(game.target, game.config.temperature);
  const fs::path dir = ensemble_dir(l, kind);
  require_file(dir / "manifest.json", "prepare");

  // Reference family: same budget and sampling, stage 1 trained on labels.
  ImitativeConfig ref_cfg = c.attack.imitative;
  ref_cfg.stage1_loss = LossKind::kCrossEntropy;
  const fs::path ref_dir = l.analysis() / "reference_ensemble";

  std::vector<QuerySamples> imit, shad;
  if (!is_adaptive(kind)) {
    const ImitativeEnsemble ie = load_imitative_ensemble(dir);
    const ImitativeEnsemble re =
        imia_prepare_nonadaptive(oracle, in.data, game.adversary_pool, ref_cfg, attack_seed(c), opts.jobs);
    save_ensemble(re, ref_dir);
    imit = NonAdaptiveScorer(ie, in.data, c.attack.signal).collect(oracle, game.queries, opts.jobs);
    shad = NonAdaptiveScorer(re, in.data, c.attack.signal).collect(oracle, game.queries, opts.jobs);
  } else {
    const AdaptiveEnsemble ae = load_adaptive_ensemble(dir);
    const AdaptiveEnsemble re = imia_prepare_adaptive(oracle, in.data, game.adversary_pool, game.queries,
                                                      ref_cfg, attack_seed(c), opts.jobs);
    save_ensemble(re, ref_dir);
    auto order = [&](std::vector<QuerySamples> v) {
      std::vector<QuerySamples> out;
      for (Index q : game.queries)
        for (auto& s : v)
          if (s.query_id == q) out.push_back(s);
      return out;
    };
    imit = order(collect_adaptive(ae, in.data, oracle, c.attack.signal, opts.jobs));
    shad = order(collect_adaptive(re, in.data, oracle, c.attack.signal, opts.jobs));
  }

  const auto& truth = game.truth;
  fs::create_directories(l.analysis());
  const ResidualReport r_imit = residual_report(imit, truth);
  const ResidualReport r_shad = residual_report(shad, truth);
  write_residual_csv(r_imit, l.analysis() / "residuals_imitative.csv");
  write_residual_csv(r_shad, l.analysis() / "residuals_shadow.csv");
  write_qq_csv(r_imit, l.analysis() / "qq_imitative.csv");
  write_qq_csv(r_shad, l.analysis() / "qq_shadow.csv");

  std::ofstream w1(l.analysis() / "wasserstein.csv", std::ios::binary);
  std::ofstream lr(l.analysis() / "likelihood_ratio.csv", std::ios::binary);
  w1 << "instance_id,group,w1_imitative,w1_shadow\n";
  lr << "instance_id,group,ratio\n";
  std::vector<double> w1_i, w1_s;
  std::vector<GaussianFit> fi[2], fs_[2];
  std::vector<double> obs[2];
  for (std::size_t i = 0; i < game.queries.size(); ++i) {
    const char* group = truth[i] ? "member" : "nonmember";
    const double a = wasserstein_1d(imit[i].in, imit[i].out);
    const double b = wasserstein_1d(shad[i].in, shad[i].out);
    w1_i.push_back(a);
    w1_s.push_back(b);
    w1 << game.queries[i] << ',' << group << ',' << fmt_double(a) << ',' << fmt_double(b) << '\n';
    const GaussianFit gi = fit_gaussian(truth[i] ? imit[i].in : imit[i].out);
    const GaussianFit gs = fit_gaussian(truth[i] ? shad[i].in : shad[i].out);
    const double ratio = std::exp(normal_log_pdf(imit[i].s_obs, gi) - normal_log_pdf(imit[i].s_obs, gs));
    lr << game.queries[i] << ',' << group << ',' << fmt_double(ratio) << '\n';
    const int g = truth[i] ? 1 : 0;
    fi[g].push_back(gi);
    fs_[g].push_back(gs);
    obs[g].push_back(imit[i].s_obs);
  }
  w1.close();
  lr.close();
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  json summary{{"ks_imitative", r_imit.ks_distance},
               {"ks_shadow", r_shad.ks_distance},
               {"median_w1_imitative", median(w1_i)},
               {"median_w1_shadow", median(w1_s)}};
  if (!obs[1].empty()) summary["likelihood_ratio_members"] = avg_likelihood_ratio(fi[1], fs_[1], obs[1]);
  if (!obs[0].empty()) summary["likelihood_ratio_nonmembers"] = avg_likelihood_ratio(fi[0], fs_[0], obs[0]);
  write_json(summary, l.analysis() / "analysis.json");
  write_manifest(l.analysis(), "analyze", c,
                 {"analysis.json", "residuals_imitative.csv", "residuals_shadow.csv", "qq_imitative.csv",
                  "qq_shadow.csv", "wasserstein.csv", "likelihood_ratio.csv"});
  std::printf("%s\n", summary.dump().c_str());
}

json cmd_bench(const ExperimentConfig& c, const RunOptions& opts) {
  json phases = json::array();
  auto phase = [&](const char* name, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    phases.push_back(json{{"phase", name}, {"seconds", seconds_since(t0)}});
  };
  phase("gen-data", [&] { cmd_gen_data(c, opts); });
  phase("train-target", [&] { cmd_train_target(c, opts); });
  phase("prepare", [&] { cmd_prepare(c, opts); });
  phase("attack", [&] { cmd_attack(c, opts); });
  phase("evaluate", [&] {
    const Layout l = layout_for(c);
    cmd_evaluate(EvaluateRequest{l.attack() / "scores.csv", l.metrics(), c.metrics.fpr, c.metrics.roc});
  });
  const Layout l = layout_for(c);
  json out{{"attack", std::string(to_string(c.attack.kind))}, {"jobs", opts.jobs}, {"phases", phases}};
  fs::create_directories(l.bench());
  write_json(out, l.bench() / "bench.json");
  for (const auto& p : phases)
    std::printf("%-13s %10.3f s\n", p["phase"].get<std::string>().c_str(), p["seconds"].get<double>());
  return out;
}

}  // namespace imia::cli
