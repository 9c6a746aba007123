#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "imia/attacks.hpp"
#include "imia/game.hpp"

namespace imia {
namespace {

namespace fs = std::filesystem;

TEST(Lambda, Examples) {
  EXPECT_EQ(lambda_score(2.0, 2.0, 0.0), 4.0);
  for (double s : {-3.0, 0.0, 1.5, 1e6}) EXPECT_EQ(lambda_score(s, 1.25, 1.25), 0.0);
  // Matches the expanded definition.
  for (double s : {-2.0, 0.3, 4.0})
    EXPECT_NEAR(lambda_score(s, 1.0, -0.5), (s + 0.5) * (s + 0.5) - (s - 1.0) * (s - 1.0), 1e-12);
}

TEST(Lambda, SignFollowsCloserMean) {
  EXPECT_GT(lambda_score(0.9, 1.0, 0.0), 0.0);
  EXPECT_LT(lambda_score(0.1, 1.0, 0.0), 0.0);
  EXPECT_EQ(lambda_score(0.5, 1.0, 0.0), 0.0);
}

TEST(Statistics, SampleMomentsAndFit) {
  const std::vector<double> x{0.0, 2.0};
  EXPECT_EQ(sample_mean(x), 1.0);
  EXPECT_NEAR(sample_std(x), std::sqrt(2.0), 1e-15);
  const std::vector<double> same{3.0, 3.0, 3.0};
  const GaussianFit f = fit_gaussian(same);
  EXPECT_TRUE(f.floored);
  EXPECT_EQ(f.std, kSigmaFloor);
  EXPECT_THROW(fit_gaussian(std::vector<double>{1.0}), DomainError);
  EXPECT_THROW(sample_mean(std::vector<double>{}), DomainError);
}

TEST(GaussianScore, Examples) {
  const std::vector<double> in{1.0, 3.0}, out{-1.0, 1.0};  // mu 2 / 0, sigma sqrt2 both
  const std::vector<double> in1{1.0, 3.0};
  EXPECT_EQ(imia_gaussian_score(in1, in1, 0.7), 0.0);
  const double s = std::sqrt(2.0);
  const double expect = (-(2.0 - 2.0) * (2.0 - 2.0) + 2.0 * 2.0) / (2 * s * s);
  EXPECT_NEAR(imia_gaussian_score(in, out, 2.0), expect, 1e-12);
  double prev = -1e300;
  for (double x = -3.0; x <= 3.0; x += 0.25) {
    const double v = imia_gaussian_score(in, out, x);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(GaussianScore, UnitSigmaExample) {
  const GaussianFit in{2.0, 1.0, false}, out{0.0, 1.0, false};
  EXPECT_NEAR(normal_log_pdf(2.0, in) - normal_log_pdf(2.0, out), 2.0, 1e-15);
}

TEST(Baselines, AttackR) {
  const std::vector<double> shadows{0.9, 0.5, 0.2, 0.1};
  EXPECT_EQ(attack_r_score(0.3, shadows), 0.5);
  EXPECT_EQ(attack_r_score(0.05, shadows), 1.0);
  EXPECT_EQ(attack_r_score(1.0, shadows), 0.0);
}

TEST(Baselines, LiraAndCalibration) {
  const std::vector<double> out{1.0, 3.0};
  EXPECT_EQ(lira_offline_score(2.0, out), 0.5);
  EXPECT_GT(lira_offline_score(3.0, out), 0.5);
  EXPECT_EQ(calibration_score(0.5, std::vector<double>{1.0, 2.0}), 1.0);
  const double p[] = {0.8, 0.2};
  EXPECT_NEAR(loss_score(p, 0), std::log(0.8), 1e-15);
}

TEST(Balanced, ExactlyHalfPerQueryAndEvenLoads) {
  for (std::size_t n : {2u, 4u, 10u}) {
    const auto a = balanced_assignment(n, 37, 5);
    std::vector<std::size_t> loads(n, 0);
    for (std::size_t q = 0; q < 37; ++q) {
      std::size_t c = 0;
      for (std::size_t j = 0; j < n; ++j) c += a[j][q] ? 1 : 0, loads[j] += a[j][q] ? 1 : 0;
      EXPECT_EQ(c, n / 2);
    }
    EXPECT_LE(*std::max_element(loads.begin(), loads.end()) - *std::min_element(loads.begin(), loads.end()), 1u);
  }
  EXPECT_THROW(balanced_assignment(3, 5, 1), DomainError);
}

TEST(ScoreCsv, RoundTripIsLossless) {
  ScoreTable t;
  t.rows = {{4, 0.1 + 0.2, true, ""}, {9, -1e-300, false, "proxy_fallback;sigma_floor"}};
  const fs::path p = fs::temp_directory_path() / "imia_unit_scores.csv";
  write_score_csv(t, p);
  const ScoreTable r = read_score_csv(p);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.rows[0].score, 0.1 + 0.2);
  EXPECT_EQ(r.rows[1].score, -1e-300);
  EXPECT_EQ(r.rows[1].warnings, "proxy_fallback;sigma_floor");
  EXPECT_EQ(r.num_members(), 1u);
}

struct Small {
  Dataset data = gen_synthetic(480, 6, 4, 0.35, 3);
  ExperimentSplit split = make_split(data, SplitFractions{}, 4);
  GameInstance game;
  ImitativeConfig cfg;

  explicit Small(Setting setting) {
    GameConfig g;
    g.num_members = 20;
    g.num_nonmembers = 20;
    g.setting = setting;
    g.hidden = {16};
    g.train.epochs = 20;
    g.seed = 2;
    game = play_game(data, split, g);
    cfg.n_models = 4;
    cfg.epochs_out = 6;
    cfg.epochs_in = 4;
    cfg.pivot_k = 5;
    cfg.hidden = {12};
    cfg.train.batch_size = 32;
  }
};

TEST(NonAdaptive, IsolationProxyCountsAndReplay) {
  Small s(Setting::kNonAdaptive);
  const BlackBoxTarget oracle(s.game.target);
  const auto ens = imia_prepare_nonadaptive(oracle, s.data, s.game.adversary_pool, s.cfg, 7);
  ASSERT_EQ(ens.size(), 4u);
  EXPECT_EQ(std::set<std::uint64_t>(ens.model_seeds.begin(), ens.model_seeds.end()).size(), 4u);
  const std::set<Index> qs(s.game.queries.begin(), s.game.queries.end());
  for (const auto& set : ens.imitate_sets)
    for (Index i : set) EXPECT_FALSE(qs.contains(i));
  for (Index i : ens.pivots.indices) EXPECT_FALSE(qs.contains(i));

  NonAdaptiveScorer scorer(ens, s.data, SignalKind::kScaledConfidenceProb);
  const auto samples = scorer.collect(oracle, s.game.queries);
  for (const auto& q : samples) {
    EXPECT_EQ(q.out.size(), 4u);
    EXPECT_EQ(q.in.size(), 4u * find_proxy(ens.pivots, q.label).size());
  }
  PreparedAttack prep;
  prep.imitative = &ens;
  const auto a = score_queries(AttackKind::kImia, prep, s.data, oracle, s.game.queries, s.game.truth);
  const auto b = score_queries(AttackKind::kImia, prep, s.data, oracle, s.game.queries, s.game.truth);
  ASSERT_EQ(a.size(), s.game.queries.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.rows[i].score, b.rows[i].score);
  // A single-row pass may take a different BLAS kernel than the batch.
  EXPECT_NEAR(scorer.score(oracle, s.game.queries[3]), a.rows[3].score, 1e-9);
}

TEST(NonAdaptive, SingleModelAndEmptyQueries) {
  Small s(Setting::kNonAdaptive);
  s.cfg.n_models = 1;
  const BlackBoxTarget oracle(s.game.target);
  const auto ens = imia_prepare_nonadaptive(oracle, s.data, s.game.adversary_pool, s.cfg, 7);
  EXPECT_EQ(ens.size(), 1u);
  PreparedAttack prep;
  prep.imitative = &ens;
  EXPECT_EQ(score_queries(AttackKind::kImia, prep, s.data, oracle, {}, {}).size(), 0u);
  // The Gaussian variant needs two out samples per query.
  const auto g = score_queries(AttackKind::kImiaGaussian, prep, s.data, oracle, s.game.queries, s.game.truth);
  for (const auto& r : g.rows) EXPECT_NE(r.warnings.find("failed:"), std::string::npos);
}

TEST(NonAdaptive, ProxyFallbackForClassWithoutPivots) {
  Small s(Setting::kNonAdaptive);
  const BlackBoxTarget oracle(s.game.target);
  std::vector<Index> pool;
  for (Index i : s.game.adversary_pool)
    if (s.data.labels[static_cast<std::size_t>(i)] != 0) pool.push_back(i);
  const auto ens = imia_prepare_nonadaptive(oracle, s.data, pool, s.cfg, 7);
  PreparedAttack prep;
  prep.imitative = &ens;
  const auto t = score_queries(AttackKind::kImia, prep, s.data, oracle, s.game.queries, s.game.truth);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool class0 = s.data.labels[static_cast<std::size_t>(s.game.queries[i])] == 0;
    EXPECT_EQ(t.rows[i].warnings.find("proxy_fallback") != std::string::npos, class0);
  }
}

TEST(Adaptive, AssignmentIsolationAndDegenerateN2) {
  for (int n : {2, 4}) {
    Small s(Setting::kAdaptive);
    s.cfg.n_models = n;
    const BlackBoxTarget oracle(s.game.target);
    const auto ens = imia_prepare_adaptive(oracle, s.data, s.game.adversary_pool, s.game.queries, s.cfg, 3);
    for (std::size_t q = 0; q < ens.queries.size(); ++q) {
      const Index id = ens.queries[q];
      std::size_t in_count = 0;
      for (std::size_t j = 0; j < ens.size(); ++j) {
        const bool in2 = std::binary_search(ens.stage2_sets[j].begin(), ens.stage2_sets[j].end(), id);
        const bool in1 = std::binary_search(ens.stage1_sets[j].begin(), ens.stage1_sets[j].end(), id);
        EXPECT_EQ(in2, static_cast<bool>(ens.assignment[j][q]));
        if (!in2) {
          EXPECT_FALSE(in1);
        }
        in_count += in2 ? 1 : 0;
      }
      EXPECT_EQ(in_count, static_cast<std::size_t>(n / 2));
    }
    const auto samples = collect_adaptive(ens, s.data, oracle, SignalKind::kScaledConfidenceProb);
    for (const auto& q : samples) {
      EXPECT_EQ(q.in.size(), static_cast<std::size_t>(n / 2));
      EXPECT_EQ(q.out.size(), static_cast<std::size_t>(n / 2));
    }
  }
}

TEST(Adaptive, OddBudgetRejected) {
  Small s(Setting::kAdaptive);
  s.cfg.n_models = 3;
  const BlackBoxTarget oracle(s.game.target);
  EXPECT_THROW(imia_prepare_adaptive(oracle, s.data, s.game.adversary_pool, s.game.queries, s.cfg, 3),
               DomainError);
}

TEST(Adaptive, SequentialPathProducesPairedSamples) {
  Small s(Setting::kAdaptive);
  const BlackBoxTarget oracle(s.game.target);
  const QuerySamples q = imia_adaptive_sequential(oracle, s.data, s.game.adversary_pool,
                                                  s.game.queries[0], s.cfg, 1);
  EXPECT_EQ(q.in.size(), 4u);
  EXPECT_EQ(q.out.size(), 4u);
}

TEST(Shadows, OfflineAndOnlineBaselines) {
  Small s(Setting::kAdaptive);
  const BlackBoxTarget oracle(s.game.target);
  ShadowConfig sc;
  sc.n_models = 4;
  sc.hidden = {12};
  sc.train.epochs = 5;
  const auto off = prepare_shadows_offline(s.data, s.game.adversary_pool, sc, 1);
  const auto on = prepare_shadows_online(s.data, s.game.adversary_pool, s.game.queries, sc, 1);
  EXPECT_FALSE(off.online());
  EXPECT_TRUE(on.online());
  for (auto k : {AttackKind::kCalibration, AttackKind::kAttackR, AttackKind::kLiraOffline}) {
    PreparedAttack prep;
    prep.shadows = &off;
    const auto t = score_queries(k, prep, s.data, oracle, s.game.queries, s.game.truth);
    EXPECT_EQ(t.size(), s.game.queries.size());
  }
  PreparedAttack prep;
  prep.shadows = &on;
  const auto t = score_queries(AttackKind::kLiraOnline, prep, s.data, oracle, s.game.queries, s.game.truth);
  for (const auto& r : t.rows) EXPECT_TRUE(std::isfinite(r.score));
  prep.shadows = &off;
  EXPECT_THROW(score_queries(AttackKind::kLiraOnline, prep, s.data, oracle, s.game.queries, s.game.truth),
               ConfigError);
  EXPECT_THROW(score_queries(AttackKind::kImia, PreparedAttack{}, s.data, oracle, s.game.queries, s.game.truth),
               ConfigError);
}

TEST(Persistence, EnsemblesRoundTrip) {
  Small s(Setting::kAdaptive);
  const BlackBoxTarget oracle(s.game.target);
  const fs::path root = fs::temp_directory_path() / "imia_unit_ens";
  fs::remove_all(root);
  const auto ni = imia_prepare_nonadaptive(oracle, s.data, s.game.adversary_pool, s.cfg, 7);
  save_ensemble(ni, root / "ni");
  const auto ni2 = load_imitative_ensemble(root / "ni");
  EXPECT_EQ(ni2.pivots.indices, ni.pivots.indices);
  EXPECT_TRUE(ni2.in_models == ni.in_models);
  EXPECT_EQ(ni2.out_fingerprints, ni.out_fingerprints);

  const auto ad = imia_prepare_adaptive(oracle, s.data, s.game.adversary_pool, s.game.queries, s.cfg, 7);
  save_ensemble(ad, root / "ad");
  const auto ad2 = load_adaptive_ensemble(root / "ad");
  EXPECT_EQ(ad2.assignment, ad.assignment);
  EXPECT_TRUE(ad2.models == ad.models);

  ShadowConfig sc;
  sc.n_models = 2;
  sc.hidden = {4};
  sc.train.epochs = 2;
  const auto sh = prepare_shadows_offline(s.data, s.game.adversary_pool, sc, 1);
  save_ensemble(sh, root / "sh");
  EXPECT_TRUE(load_shadow_ensemble(root / "sh").models == sh.models);
  EXPECT_THROW(load_shadow_ensemble(root / "ni"), FormatError);
}

TEST(AttackKinds, ParseAndClassify) {
  for (auto k : {AttackKind::kImia, AttackKind::kImiaGaussian, AttackKind::kImiaAdaptive,
                 AttackKind::kImiaAdaptiveGaussian, AttackKind::kLoss, AttackKind::kEntropy,
                 AttackKind::kCalibration, AttackKind::kAttackR, AttackKind::kLiraOffline,
                 AttackKind::kLiraOnline})
    EXPECT_EQ(parse_attack_kind(to_string(k)), k);
  EXPECT_TRUE(is_adaptive(AttackKind::kLiraOnline));
  EXPECT_TRUE(needs_shadows(AttackKind::kAttackR));
  EXPECT_FALSE(needs_imitative(AttackKind::kLoss));
  EXPECT_THROW(parse_attack_kind("rmia"), DomainError);
}

}  // namespace
}  // namespace imia
