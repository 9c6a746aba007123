#include "desk_experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "imia/game.hpp"
#include "imia/metrics.hpp"

namespace imia::desk {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Diagnostics {
  double w1 = 0.0;
  double ks = 0.0;
  std::vector<GaussianFit> fits;  // group-appropriate fit per query
};

Diagnostics diagnose(const std::vector<QuerySamples>& samples, const std::vector<bool>& truth) {
  Diagnostics d;
  std::vector<double> w1s;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    w1s.push_back(wasserstein_1d(samples[i].in, samples[i].out));
    d.fits.push_back(fit_gaussian(truth[i] ? samples[i].in : samples[i].out));
  }
  d.w1 = median(w1s);
  d.ks = residual_report(samples, truth).ks_distance;
  return d;
}

struct Comparison {
  double w1_imitative, w1_shadow, ks_imitative, ks_shadow, lr_members, lr_nonmembers;
};

/// Imitative vs shadow-mode samples, both aligned with `truth`.
Comparison compare(const std::vector<QuerySamples>& imit, const std::vector<QuerySamples>& shad,
                   const std::vector<bool>& truth) {
  const Diagnostics di = diagnose(imit, truth);
  const Diagnostics ds = diagnose(shad, truth);
  Comparison c{di.w1, ds.w1, di.ks, ds.ks, 0.0, 0.0};
  for (bool group : {true, false}) {
    std::vector<GaussianFit> fi, fs;
    std::vector<double> obs;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != group) continue;
      fi.push_back(di.fits[i]);
      fs.push_back(ds.fits[i]);
      obs.push_back(imit[i].s_obs);
    }
    (group ? c.lr_members : c.lr_nonmembers) = avg_likelihood_ratio(fi, fs, obs);
  }
  return c;
}

std::vector<QuerySamples> in_query_order(std::vector<QuerySamples> samples, std::span<const Index> queries) {
  std::vector<QuerySamples> out;
  out.reserve(queries.size());
  for (Index q : queries) {
    const auto it = std::find_if(samples.begin(), samples.end(), [&](const QuerySamples& s) { return s.query_id == q; });
    out.push_back(std::move(*it));
  }
  return out;
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string DeskResult::summary() const {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "seed=%llu target_acc=%.3f/%.3f | BA imia=%.4f loss=%.4f lira=%.4f imia_shadow=%.4f | "
                "TPR@0.1%% imia=%.4f loss=%.4f lira=%.4f imia_shadow=%.4f adaptive=%.4f adaptive_shadow=%.4f | "
                "adaptive W1 %.4f/%.4f KS %.4f/%.4f LR mem=%.3g non=%.3g | "
                "non-adaptive W1 %.4f/%.4f KS %.4f/%.4f LR mem=%.3g non=%.3g | secs %.0f/%.0f/%.0f",
                static_cast<unsigned long long>(seed), target_train_acc, target_test_acc, ba_imia, ba_loss,
                ba_lira, ba_imia_shadow, tpr_imia, tpr_loss, tpr_lira, tpr_imia_shadow, tpr_adaptive,
                tpr_adaptive_shadow, w1_imitative, w1_shadow, ks_imitative, ks_shadow, lr_members,
                lr_nonmembers, w1_imitative_na, w1_shadow_na, ks_imitative_na, ks_shadow_na, lr_members_na,
                lr_nonmembers_na, seconds_target, seconds_nonadaptive, seconds_adaptive);
  return buf;
}

DeskResult run_desk(const DeskConfig& cfg, std::uint64_t seed) {
  DeskResult r;
  r.seed = seed;
  auto say = [&](const char* what) {
    if (cfg.verbose) std::fprintf(stderr, "[desk seed %llu] %s\n", static_cast<unsigned long long>(seed), what);
  };

  const Dataset data = gen_synthetic(cfg.n, cfg.dim, cfg.classes, cfg.spread, mix_seed(seed, 10));
  const ExperimentSplit split = make_split(data, SplitFractions{}, mix_seed(seed, 11));

  auto t0 = Clock::now();
  GameConfig g;
  g.num_members = cfg.members;
  g.num_nonmembers = cfg.nonmembers;
  g.hidden = cfg.hidden;
  g.train.epochs = cfg.target_epochs;
  g.seed = mix_seed(seed, 12);
  const GameInstance game = play_game(data, split, g);
  r.seconds_target = since(t0);
  r.target_train_acc = accuracy(game.target, subset(data, game.target_train));
  r.target_test_acc = accuracy(game.target, subset(data, split.query_val));
  say("target trained");

  const BlackBoxTarget oracle(game.target, g.temperature);
  const auto& queries = game.queries;
  const auto& truth = game.truth;

  ImitativeConfig ic;
  ic.n_models = cfg.n_models;
  ic.epochs_out = cfg.epochs_out;
  ic.epochs_in = cfg.epochs_in;
  ic.pivot_k = cfg.pivot_k;
  ic.hidden = cfg.hidden;
  // Same budget and sampling seeds, stage 1 trained on labels only.
  ImitativeConfig sc = ic;
  sc.stage1_loss = LossKind::kCrossEntropy;

  // Non-adaptive game.
  t0 = Clock::now();
  const ImitativeEnsemble imitative =
      imia_prepare_nonadaptive(oracle, data, game.adversary_pool, ic, mix_seed(seed, 13), cfg.jobs);
  say("non-adaptive imitative ensemble trained");
  const ImitativeEnsemble shadowish =
      imia_prepare_nonadaptive(oracle, data, game.adversary_pool, sc, mix_seed(seed, 13), cfg.jobs);
  say("non-adaptive shadow-mode ensemble trained");

  // Offline LiRA reuses the shadow-mode stage-1 models: cross-entropy models
  // on random halves of the pool, i.e. ordinary offline shadows.
  ShadowEnsemble lira_shadows;
  lira_shadows.config.n_models = cfg.n_models;
  lira_shadows.config.hidden = cfg.hidden;
  lira_shadows.models = shadowish.out_models;
  lira_shadows.train_sets = shadowish.imitate_sets;

  PreparedAttack p_imia{&imitative, nullptr, nullptr};
  PreparedAttack p_shadow{&shadowish, nullptr, nullptr};
  PreparedAttack p_lira{nullptr, nullptr, &lira_shadows};
  const ScoreTable t_imia = score_queries(AttackKind::kImia, p_imia, data, oracle, queries, truth);
  const ScoreTable t_shadow = score_queries(AttackKind::kImia, p_shadow, data, oracle, queries, truth);
  const ScoreTable t_loss = score_queries(AttackKind::kLoss, {}, data, oracle, queries, truth);
  const ScoreTable t_lira = score_queries(AttackKind::kLiraOffline, p_lira, data, oracle, queries, truth);
  r.ba_imia = balanced_accuracy(t_imia);
  r.ba_imia_shadow = balanced_accuracy(t_shadow);
  r.ba_loss = balanced_accuracy(t_loss);
  r.ba_lira = balanced_accuracy(t_lira);
  r.tpr_imia = tpr_at_fpr(t_imia, 0.001);
  r.tpr_imia_shadow = tpr_at_fpr(t_shadow, 0.001);
  r.tpr_loss = tpr_at_fpr(t_loss, 0.001);
  r.tpr_lira = tpr_at_fpr(t_lira, 0.001);

  const auto na = compare(
      NonAdaptiveScorer(imitative, data, SignalKind::kScaledConfidenceProb).collect(oracle, queries),
      NonAdaptiveScorer(shadowish, data, SignalKind::kScaledConfidenceProb).collect(oracle, queries), truth);
  r.w1_imitative_na = na.w1_imitative;
  r.w1_shadow_na = na.w1_shadow;
  r.ks_imitative_na = na.ks_imitative;
  r.ks_shadow_na = na.ks_shadow;
  r.lr_members_na = na.lr_members;
  r.lr_nonmembers_na = na.lr_nonmembers;
  r.seconds_nonadaptive = since(t0);
  say("non-adaptive scored");

  // Adaptive game on the same data; queries join the adversary's pool.
  t0 = Clock::now();
  GameConfig ga = g;
  ga.setting = Setting::kAdaptive;
  const GameInstance agame = play_game(data, split, ga);
  const BlackBoxTarget aoracle(agame.target, ga.temperature);
  const AdaptiveEnsemble a_imit = imia_prepare_adaptive(aoracle, data, agame.adversary_pool, agame.queries, ic,
                                                        mix_seed(seed, 14), cfg.jobs);
  say("adaptive imitative ensemble trained");
  const AdaptiveEnsemble a_shad = imia_prepare_adaptive(aoracle, data, agame.adversary_pool, agame.queries, sc,
                                                        mix_seed(seed, 14), cfg.jobs);
  say("adaptive shadow-mode ensemble trained");

  const auto s_imit = in_query_order(
      collect_adaptive(a_imit, data, aoracle, SignalKind::kScaledConfidenceProb, cfg.jobs), agame.queries);
  const auto s_shad = in_query_order(
      collect_adaptive(a_shad, data, aoracle, SignalKind::kScaledConfidenceProb, cfg.jobs), agame.queries);
  const auto ad = compare(s_imit, s_shad, agame.truth);
  r.w1_imitative = ad.w1_imitative;
  r.w1_shadow = ad.w1_shadow;
  r.ks_imitative = ad.ks_imitative;
  r.ks_shadow = ad.ks_shadow;
  r.lr_members = ad.lr_members;
  r.lr_nonmembers = ad.lr_nonmembers;

  PreparedAttack p_ai{nullptr, &a_imit, nullptr};
  PreparedAttack p_as{nullptr, &a_shad, nullptr};
  r.tpr_adaptive = tpr_at_fpr(
      score_queries(AttackKind::kImiaAdaptive, p_ai, data, aoracle, agame.queries, agame.truth), 0.001);
  r.tpr_adaptive_shadow = tpr_at_fpr(
      score_queries(AttackKind::kImiaAdaptive, p_as, data, aoracle, agame.queries, agame.truth), 0.001);
  r.seconds_adaptive = since(t0);
  say("adaptive scored");
  return r;
}

}  // namespace imia::desk
