#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imia/common.hpp"
#include "imia/data.hpp"
#include "imia/game.hpp"
#include "imia/imitative.hpp"
#include "imia/nn.hpp"
#include "imia/signals.hpp"

namespace imia {

// ---------------------------------------------------------------------------
// Score tables

struct ScoreRow {
  Index query_id = 0;
  double score = 0.0;
  bool is_member = false;
  std::string warnings;  // ';'-separated tags, empty when clean
};

/// One row per query; higher scores mean "member".
struct ScoreTable {
  std::vector<ScoreRow> rows;

  std::size_t size() const { return rows.size(); }
  std::size_t num_members() const;
};

/// CSV `query_id,score,is_member,warnings`. Scores use the shortest
/// round-trip representation so write/read is lossless.
void write_score_csv(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable read_score_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Scoring primitives

struct ScoreSummary {
  double s_obs = 0.0;
  double mean_in = 0.0;
  double mean_out = 0.0;
  std::optional<double> std_in;
  std::optional<double> std_out;
};

/// In/out signal samples collected for one query.
struct QuerySamples {
  Index query_id = 0;
  int label = 0;
  double s_obs = 0.0;
  std::vector<double> in;
  std::vector<double> out;
  bool proxy_fallback = false;
};

/// (s_obs - mean_out)^2 - (s_obs - mean_in)^2, evaluated in factored form.
double lambda_score(double s_obs, double mean_in, double mean_out);
double lambda_score(const ScoreSummary& summary);
ScoreSummary summarize(const QuerySamples& samples, bool with_std = false);

double sample_mean(std::span<const double> xs);
/// n-1 denominator; 0 for a single sample.
double sample_std(std::span<const double> xs);

struct GaussianFit {
  double mean = 0.0;
  double std = 1.0;
  bool floored = false;
};

/// Sample mean and std, with the std floored at kSigmaFloor. Needs >= 2 samples.
GaussianFit fit_gaussian(std::span<const double> xs);
double normal_log_pdf(double x, const GaussianFit& fit);
double normal_cdf(double z);

/// log N(s_obs; in fit) - log N(s_obs; out fit). Needs >= 2 samples per side.
double imia_gaussian_score(std::span<const double> in, std::span<const double> out, double s_obs);

// ---------------------------------------------------------------------------
// IMIA, non-adaptive

/// N imitative out/in pairs sharing one pivot set.
struct ImitativeEnsemble {
  ImitativeConfig config;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> model_seeds;
  std::vector<MlpModel> out_models;
  std::vector<MlpModel> in_models;
  std::vector<std::uint64_t> out_fingerprints;
  PivotSet pivots;
  std::vector<std::vector<Index>> imitate_sets;  // stage-1 rows of each model
  std::size_t target_rows_queried = 0;

  std::size_t size() const { return out_models.size(); }
};

/// Pivot selection followed by N imitative trainings on independently sampled
/// imitate sets. The pool is queried once; models train in parallel.
ImitativeEnsemble imia_prepare_nonadaptive(const TargetOracle& target, const Dataset& parent,
                                           std::span<const Index> pool,
                                           const ImitativeConfig& config, std::uint64_t seed,
                                           int jobs = 1);

/// Caches in-model signals on every pivot so each query costs N forward
/// passes plus one target query.
class NonAdaptiveScorer {
 public:
  NonAdaptiveScorer(const ImitativeEnsemble& ensemble, const Dataset& parent, SignalKind signal);

  /// S_out from the out models; S_in from every in model on every proxy of the
  /// query's class (all pivots when the class has none).
  std::vector<QuerySamples> collect(const TargetOracle& target, std::span<const Index> queries,
                                    int jobs = 1) const;
  double score(const TargetOracle& target, Index query) const;

 private:
  const ImitativeEnsemble* ensemble_;
  const Dataset* parent_;
  SignalKind signal_;
  std::vector<std::vector<double>> pivot_in_signals_;  // [model][pivot]
};

double imia_score_nonadaptive(const ImitativeEnsemble& ensemble, const Dataset& parent,
                              const TargetOracle& target, Index query,
                              SignalKind signal = SignalKind::kScaledConfidenceProb);

// ---------------------------------------------------------------------------
// IMIA, adaptive

/// Every query rides with exactly N/2 models through both training stages.
struct AdaptiveEnsemble {
  ImitativeConfig config;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> model_seeds;
  std::vector<MlpModel> models;                  // after stage 2
  std::vector<Index> queries;
  std::vector<std::vector<bool>> assignment;     // [model][query position]
  std::vector<std::vector<Index>> stage1_sets;   // sorted
  std::vector<std::vector<Index>> stage2_sets;   // sorted

  std::size_t size() const { return models.size(); }
};

/// Assigns each query to N/2 models, least-loaded first with random ties, so
/// per-model loads differ by at most one.
std::vector<std::vector<bool>> balanced_assignment(std::size_t n_models, std::size_t n_queries,
                                                   std::uint64_t seed);

AdaptiveEnsemble imia_prepare_adaptive(const TargetOracle& target, const Dataset& parent,
                                       std::span<const Index> pool, std::span<const Index> queries,
                                       const ImitativeConfig& config, std::uint64_t seed,
                                       int jobs = 1);

/// In-samples from models the query was assigned to, out-samples from the rest.
std::vector<QuerySamples> collect_adaptive(const AdaptiveEnsemble& ensemble, const Dataset& parent,
                                           const TargetOracle& target, SignalKind signal,
                                           int jobs = 1);

/// Prepare + collect + Lambda, in query order.
ScoreTable imia_adaptive(const TargetOracle& target, const Dataset& parent,
                         std::span<const Index> pool, std::span<const Index> queries,
                         const std::vector<bool>& truth, const ImitativeConfig& config,
                         std::uint64_t seed, SignalKind signal = SignalKind::kScaledConfidenceProb,
                         int jobs = 1);

/// One query at a time: N pairs, each out model imitates on a pool half
/// without the query and its in model continues on that half plus the query.
QuerySamples imia_adaptive_sequential(const TargetOracle& target, const Dataset& parent,
                                      std::span<const Index> pool, Index query,
                                      const ImitativeConfig& config, std::uint64_t seed,
                                      SignalKind signal = SignalKind::kScaledConfidenceProb,
                                      int jobs = 1);

// ---------------------------------------------------------------------------
// Baselines

enum class AttackKind {
  kImia,
  kImiaGaussian,
  kImiaAdaptive,
  kImiaAdaptiveGaussian,
  kLoss,
  kEntropy,
  kCalibration,
  kAttackR,
  kLiraOffline,
  kLiraOnline,
};

std::string_view to_string(AttackKind k);
AttackKind parse_attack_kind(std::string_view s);
bool is_adaptive(AttackKind k);
bool needs_shadows(AttackKind k);
bool needs_imitative(AttackKind k);

/// Target-agnostic models trained with cross-entropy on pool subsets.
struct ShadowConfig {
  int n_models = 10;
  double train_fraction = 0.5;
  std::vector<int> hidden = {256, 128};
  Activation activation = Activation::kRelu;
  TrainConfig train;

  void validate() const;
};

struct ShadowEnsemble {
  ShadowConfig config;
  std::uint64_t seed = 0;
  std::vector<MlpModel> models;
  std::vector<std::vector<Index>> train_sets;  // sorted
  std::vector<Index> queries;                  // online only
  std::vector<std::vector<bool>> assignment;   // online only, [model][query]

  bool online() const { return !queries.empty(); }
};

/// Each shadow trains on an independent random train_fraction of the pool.
ShadowEnsemble prepare_shadows_offline(const Dataset& parent, std::span<const Index> pool,
                                       const ShadowConfig& config, std::uint64_t seed,
                                       int jobs = 1);

/// Pool-without-queries halves plus the N/2-balanced query assignment.
ShadowEnsemble prepare_shadows_online(const Dataset& parent, std::span<const Index> pool,
                                      std::span<const Index> queries, const ShadowConfig& config,
                                      std::uint64_t seed, int jobs = 1);

double loss_score(std::span<const double> target_probs, int label);
double entropy_score(std::span<const double> target_probs, int label);
/// mean(shadow losses) - target loss.
double calibration_score(double target_loss, std::span<const double> shadow_losses);
/// Fraction of shadows whose loss is strictly greater than the target's.
double attack_r_score(double target_loss, std::span<const double> shadow_losses);
/// Upper-tail Phi((s_obs - mu_out) / sigma_out).
double lira_offline_score(double s_obs, std::span<const double> out_scores);
double lira_online_score(double s_obs, std::span<const double> in_scores,
                         std::span<const double> out_scores);

/// Prepared artifacts for score_queries; only the ones the attack needs must
/// be present.
struct PreparedAttack {
  const ImitativeEnsemble* imitative = nullptr;
  const AdaptiveEnsemble* adaptive = nullptr;
  const ShadowEnsemble* shadows = nullptr;
};

/// Batch driver: one finite score per query, in query order. Per-query
/// failures become a warning tag and the lowest finite score.
ScoreTable score_queries(AttackKind kind, const PreparedAttack& prepared, const Dataset& parent,
                         const TargetOracle& target, std::span<const Index> queries,
                         const std::vector<bool>& truth,
                         SignalKind signal = SignalKind::kScaledConfidenceProb, int jobs = 1);

// ---------------------------------------------------------------------------
// Persistence: a manifest.json plus one model file per trained model.

void save_ensemble(const ImitativeEnsemble& ensemble, const std::filesystem::path& dir);
ImitativeEnsemble load_imitative_ensemble(const std::filesystem::path& dir);
void save_ensemble(const AdaptiveEnsemble& ensemble, const std::filesystem::path& dir);
AdaptiveEnsemble load_adaptive_ensemble(const std::filesystem::path& dir);
void save_ensemble(const ShadowEnsemble& ensemble, const std::filesystem::path& dir);
ShadowEnsemble load_shadow_ensemble(const std::filesystem::path& dir);

}  // namespace imia
