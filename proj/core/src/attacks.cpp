#include "imia/attacks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace imia {

// ---------------------------------------------------------------------------
// Score tables

std::size_t ScoreTable::num_members() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const ScoreRow& r) { return r.is_member; }));
}

void write_score_csv(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "query_id,score,is_member,warnings\n";
  char buf[64];
  for (const auto& r : table.rows) {
    if (!std::isfinite(r.score)) throw DomainError("score table holds a non-finite score");
    if (r.warnings.find_first_of(",\n") != std::string::npos)
      throw DomainError("warning tags may not contain commas or newlines");
    auto res = std::to_chars(buf, buf + sizeof buf, r.score);
    out << r.query_id << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
        << ',' << (r.is_member ? 1 : 0) << ',' << r.warnings << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

ScoreTable read_score_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "query_id,score,is_member,warnings")
    throw FormatError(path.string() + ": missing score table header");
  ScoreTable table;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 4)
      throw ParseError(path.string() + ": row " + std::to_string(row) + " needs 4 cells");
    ScoreRow r;
    auto parse_fail = [&](const char* col) {
      return ParseError(path.string() + ": bad " + col + " at row " + std::to_string(row));
    };
    {
      auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), r.query_id);
      if (ec != std::errc() || p != cells[0].data() + cells[0].size()) throw parse_fail("query_id");
    }
    {
      auto [p, ec] = std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), r.score);
      if (ec != std::errc() || p != cells[1].data() + cells[1].size() || !std::isfinite(r.score))
        throw parse_fail("score");
    }
    if (cells[2] != "0" && cells[2] != "1") throw parse_fail("is_member");
    r.is_member = cells[2] == "1";
    r.warnings = cells[3];
    table.rows.push_back(std::move(r));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Statistics

double sample_mean(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("mean of an empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

GaussianFit fit_gaussian(std::span<const double> xs) {
  if (xs.size() < 2) throw DomainError("a Gaussian fit needs at least 2 samples");
  GaussianFit fit;
  fit.mean = sample_mean(xs);
  const double s = sample_std(xs);
  fit.floored = !(s >= kSigmaFloor);
  fit.std = fit.floored ? kSigmaFloor : s;
  return fit;
}

double normal_log_pdf(double x, const GaussianFit& fit) {
  const double z = (x - fit.mean) / fit.std;
  return -0.5 * z * z - std::log(fit.std) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double lambda_score(double s_obs, double mean_in, double mean_out) {
  return (mean_in - mean_out) * ((s_obs - mean_in) + (s_obs - mean_out));
}

double lambda_score(const ScoreSummary& summary) {
  return lambda_score(summary.s_obs, summary.mean_in, summary.mean_out);
}

ScoreSummary summarize(const QuerySamples& samples, bool with_std) {
  ScoreSummary s;
  s.s_obs = samples.s_obs;
  s.mean_in = sample_mean(samples.in);
  s.mean_out = sample_mean(samples.out);
  if (with_std) {
    s.std_in = std::max(sample_std(samples.in), kSigmaFloor);
    s.std_out = std::max(sample_std(samples.out), kSigmaFloor);
  }
  return s;
}

double imia_gaussian_score(std::span<const double> in, std::span<const double> out, double s_obs) {
  if (in.size() < 2 || out.size() < 2)
    throw DomainError("Gaussian scoring needs at least 2 in and 2 out samples");
  return normal_log_pdf(s_obs, fit_gaussian(in)) - normal_log_pdf(s_obs, fit_gaussian(out));
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

std::vector<Index> sample_sorted(std::span<const Index> from, double fraction, std::uint64_t seed) {
  std::vector<Index> v(from.begin(), from.end());
  std::mt19937_64 rng(seed);
  std::shuffle(v.begin(), v.end(), rng);
  auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(v.size())));
  keep = std::clamp<std::size_t>(keep, v.empty() ? 0 : 1, v.size());
  v.resize(keep);
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<Index> without(std::span<const Index> from, std::span<const Index> excluded) {
  const std::set<Index> ex(excluded.begin(), excluded.end());
  std::vector<Index> out;
  for (Index i : from)
    if (!ex.contains(i)) out.push_back(i);
  return out;
}

Matrix probs_for(const Matrix& pool_probs, const std::unordered_map<Index, Index>& pos,
                 std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), pool_probs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = pool_probs.row(pos.at(rows[i]));
  return out;
}

void check_queries_in_pool(std::span<const Index> pool, std::span<const Index> queries) {
  const std::set<Index> p(pool.begin(), pool.end());
  for (Index q : queries)
    if (!p.contains(q))
      throw InternalError("query " + std::to_string(q) + " is missing from the adaptive pool");
}

double target_loss(const Matrix& probs, Index row, int label) {
  return -std::log(std::max(probs(row, label), kProbEpsilon));
}

std::vector<double> model_losses(const MlpModel& model, const Matrix& x, std::span<const int> y) {
  std::vector<double> s = model_signals(SignalKind::kLoss, model, x, y);
  for (double& v : s) v = -v;  // the loss signal is the negated loss
  return s;
}

void add_tag(std::string& tags, std::string_view tag) {
  if (!tags.empty()) tags += ';';
  tags += tag;
}

}  // namespace

// ---------------------------------------------------------------------------
// IMIA, non-adaptive

ImitativeEnsemble imia_prepare_nonadaptive(const TargetOracle& target, const Dataset& parent,
                                           std::span<const Index> pool,
                                           const ImitativeConfig& config, std::uint64_t seed,
                                           int jobs) {
  config.validate();
  if (pool.empty()) throw DomainError("adversary pool is empty");

  ImitativeEnsemble ens;
  ens.config = config;
  ens.seed = seed;

  const Dataset pool_data = subset(parent, pool);
  const Matrix pool_probs = target.query(pool_data.features);
  ens.target_rows_queried = pool.size();
  std::unordered_map<Index, Index> pos;
  for (std::size_t i = 0; i < pool.size(); ++i) pos.emplace(pool[i], static_cast<Index>(i));

  ens.pivots = select_pivot_from_probs(pool_probs, parent, pool, config.pivot_k,
                                       config.pivot_mode, mix_seed(seed, 100));
  const Dataset pivot_data = subset(parent, ens.pivots.indices);

  std::vector<Index> candidates(pool.begin(), pool.end());
  if (config.exclude_pivots_from_imitate) {
    candidates = without(pool, ens.pivots.indices);
    if (candidates.empty())
      throw DomainError("every pool row is a pivot; cannot exclude pivots from imitation");
  }

  const auto n = static_cast<std::size_t>(config.n_models);
  ens.model_seeds.resize(n);
  ens.imitate_sets.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    ens.model_seeds[j] = mix_seed(seed, 2000 + j);
    ens.imitate_sets[j] = sample_sorted(candidates, config.imitate_fraction, mix_seed(seed, 1000 + j));
  }

  ens.out_models.resize(n);
  ens.in_models.resize(n);
  ens.out_fingerprints.resize(n);
  parallel_for(n, jobs, [&](std::size_t j) {
    const auto& rows = ens.imitate_sets[j];
    ImitativePair pair = imitative_train(probs_for(pool_probs, pos, rows), subset(parent, rows),
                                         pivot_data, config, ens.model_seeds[j]);
    ens.out_models[j] = std::move(pair.out_model);
    ens.in_models[j] = std::move(pair.in_model);
    ens.out_fingerprints[j] = pair.out_fingerprint;
  });
  return ens;
}

NonAdaptiveScorer::NonAdaptiveScorer(const ImitativeEnsemble& ensemble, const Dataset& parent,
                                     SignalKind signal)
    : ensemble_(&ensemble), parent_(&parent), signal_(signal) {
  if (ensemble.size() == 0) throw DomainError("ensemble is empty");
  if (ensemble.pivots.size() == 0) throw DomainError("ensemble has no pivots");
  const Dataset pivot_data = subset(parent, ensemble.pivots.indices);
  pivot_in_signals_.resize(ensemble.size());
  for (std::size_t j = 0; j < ensemble.size(); ++j)
    pivot_in_signals_[j] =
        model_signals(signal, ensemble.in_models[j], pivot_data.features, pivot_data.labels);
}

std::vector<QuerySamples> NonAdaptiveScorer::collect(const TargetOracle& target,
                                                     std::span<const Index> queries,
                                                     int jobs) const {
  std::vector<QuerySamples> out(queries.size());
  if (queries.empty()) return out;
  const Dataset qdata = subset(*parent_, queries);
  const std::vector<double> s_obs =
      probability_signals(signal_, target.query(qdata.features), qdata.labels);

  const std::size_t n = ensemble_->size();
  std::vector<std::vector<double>> out_signals(n);
  parallel_for(n, jobs, [&](std::size_t j) {
    out_signals[j] = model_signals(signal_, ensemble_->out_models[j], qdata.features, qdata.labels);
  });

  std::map<int, std::vector<std::size_t>> proxies;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    QuerySamples& s = out[i];
    s.query_id = queries[i];
    s.label = qdata.labels[i];
    s.s_obs = s_obs[i];
    for (std::size_t j = 0; j < n; ++j) s.out.push_back(out_signals[j][i]);

    auto it = proxies.find(s.label);
    if (it == proxies.end()) it = proxies.emplace(s.label, find_proxy(ensemble_->pivots, s.label)).first;
    const auto& proxy = it->second;
    s.proxy_fallback = proxy.empty();
    for (std::size_t j = 0; j < n; ++j) {
      if (s.proxy_fallback) {
        s.in.insert(s.in.end(), pivot_in_signals_[j].begin(), pivot_in_signals_[j].end());
      } else {
        for (std::size_t p : proxy) s.in.push_back(pivot_in_signals_[j][p]);
      }
    }
  }
  return out;
}

double NonAdaptiveScorer::score(const TargetOracle& target, Index query) const {
  const Index q[] = {query};
  return lambda_score(summarize(collect(target, q).front()));
}

double imia_score_nonadaptive(const ImitativeEnsemble& ensemble, const Dataset& parent,
                              const TargetOracle& target, Index query, SignalKind signal) {
  return NonAdaptiveScorer(ensemble, parent, signal).score(target, query);
}

// ---------------------------------------------------------------------------
// IMIA, adaptive

std::vector<std::vector<bool>> balanced_assignment(std::size_t n_models, std::size_t n_queries,
                                                   std::uint64_t seed) {
  if (n_models < 2 || n_models % 2 != 0)
    throw DomainError("the adaptive attack needs an even number of models (got " +
                      std::to_string(n_models) + ")");
  std::vector<std::vector<bool>> assign(n_models, std::vector<bool>(n_queries, false));
  std::vector<std::size_t> load(n_models, 0);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n_models);
  for (std::size_t q = 0; q < n_queries; ++q) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return load[a] < load[b]; });
    for (std::size_t t = 0; t < n_models / 2; ++t) {
      assign[order[t]][q] = true;
      ++load[order[t]];
    }
  }
  return assign;
}

AdaptiveEnsemble imia_prepare_adaptive(const TargetOracle& target, const Dataset& parent,
                                       std::span<const Index> pool, std::span<const Index> queries,
                                       const ImitativeConfig& config, std::uint64_t seed,
                                       int jobs) {
  config.validate();
  if (config.n_models % 2 != 0)
    throw DomainError("the adaptive attack needs an even number of models (got " +
                      std::to_string(config.n_models) + ")");
  check_queries_in_pool(pool, queries);

  AdaptiveEnsemble ens;
  ens.config = config;
  ens.seed = seed;
  ens.queries.assign(queries.begin(), queries.end());
  const auto n = static_cast<std::size_t>(config.n_models);
  ens.assignment = balanced_assignment(n, queries.size(), mix_seed(seed, 300));

  Matrix pool_probs;
  std::unordered_map<Index, Index> pos;
  if (config.stage1_loss != LossKind::kCrossEntropy) {
    pool_probs = target.query(subset(parent, pool).features);
    for (std::size_t i = 0; i < pool.size(); ++i) pos.emplace(pool[i], static_cast<Index>(i));
  }

  const std::vector<Index> rest = without(pool, queries);
  ens.model_seeds.resize(n);
  ens.stage1_sets.resize(n);
  ens.stage2_sets.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    ens.model_seeds[j] = mix_seed(seed, 2000 + j);
    std::vector<Index> assigned;
    for (std::size_t q = 0; q < queries.size(); ++q)
      if (ens.assignment[j][q]) assigned.push_back(queries[q]);
    std::sort(assigned.begin(), assigned.end());
    std::vector<Index> stage1 = sample_sorted(rest, config.imitate_fraction, mix_seed(seed, 1000 + j));
    stage1.insert(stage1.end(), assigned.begin(), assigned.end());
    std::sort(stage1.begin(), stage1.end());
    ens.stage1_sets[j] = std::move(stage1);
    ens.stage2_sets[j] = std::move(assigned);
  }

  ens.models.resize(n);
  parallel_for(n, jobs, [&](std::size_t j) {
    const auto& s1 = ens.stage1_sets[j];
    Matrix probs;
    if (!pos.empty()) probs = probs_for(pool_probs, pos, s1);
    MlpModel m = imitative_stage1(probs, subset(parent, s1), config, ens.model_seeds[j]);
    if (!ens.stage2_sets[j].empty())
      m = imitative_stage2(std::move(m), subset(parent, ens.stage2_sets[j]), config,
                           ens.model_seeds[j]);
    ens.models[j] = std::move(m);
  });
  return ens;
}

std::vector<QuerySamples> collect_adaptive(const AdaptiveEnsemble& ensemble, const Dataset& parent,
                                           const TargetOracle& target, SignalKind signal,
                                           int jobs) {
  const auto& queries = ensemble.queries;
  std::vector<QuerySamples> out(queries.size());
  if (queries.empty()) return out;
  const Dataset qdata = subset(parent, queries);
  const std::vector<double> s_obs =
      probability_signals(signal, target.query(qdata.features), qdata.labels);
  const std::size_t n = ensemble.size();
  std::vector<std::vector<double>> sig(n);
  parallel_for(n, jobs, [&](std::size_t j) {
    sig[j] = model_signals(signal, ensemble.models[j], qdata.features, qdata.labels);
  });
  for (std::size_t q = 0; q < queries.size(); ++q) {
    out[q].query_id = queries[q];
    out[q].label = qdata.labels[q];
    out[q].s_obs = s_obs[q];
    for (std::size_t j = 0; j < n; ++j)
      (ensemble.assignment[j][q] ? out[q].in : out[q].out).push_back(sig[j][q]);
  }
  return out;
}

ScoreTable imia_adaptive(const TargetOracle& target, const Dataset& parent,
                         std::span<const Index> pool, std::span<const Index> queries,
                         const std::vector<bool>& truth, const ImitativeConfig& config,
                         std::uint64_t seed, SignalKind signal, int jobs) {
  const AdaptiveEnsemble ens = imia_prepare_adaptive(target, parent, pool, queries, config, seed, jobs);
  PreparedAttack prepared;
  prepared.adaptive = &ens;
  return score_queries(AttackKind::kImiaAdaptive, prepared, parent, target, queries, truth, signal,
                       jobs);
}

QuerySamples imia_adaptive_sequential(const TargetOracle& target, const Dataset& parent,
                                      std::span<const Index> pool, Index query,
                                      const ImitativeConfig& config, std::uint64_t seed,
                                      SignalKind signal, int jobs) {
  config.validate();
  const Index qs[] = {query};
  check_queries_in_pool(pool, qs);
  const Dataset qdata = subset(parent, qs);

  QuerySamples samples;
  samples.query_id = query;
  samples.label = qdata.labels[0];
  samples.s_obs = probability_signals(signal, target.query(qdata.features), qdata.labels)[0];

  const auto n = static_cast<std::size_t>(config.n_models);
  std::vector<double> in(n), out(n);
  parallel_for(n, jobs, [&](std::size_t t) {
    std::vector<Index> tmp = sample_sorted(pool, config.imitate_fraction, mix_seed(seed, 1000 + t));
    std::vector<Index> d_out = without(tmp, qs);
    std::vector<Index> d_in = d_out;
    d_in.insert(std::upper_bound(d_in.begin(), d_in.end(), query), query);
    const Dataset out_data = subset(parent, d_out);
    Matrix probs;
    if (config.stage1_loss != LossKind::kCrossEntropy) probs = target.query(out_data.features);
    ImitativePair pair = imitative_train(probs, out_data, subset(parent, d_in), config,
                                         mix_seed(seed, 2000 + t));
    out[t] = model_signals(signal, pair.out_model, qdata.features, qdata.labels)[0];
    in[t] = model_signals(signal, pair.in_model, qdata.features, qdata.labels)[0];
  });
  samples.in = std::move(in);
  samples.out = std::move(out);
  return samples;
}

// ---------------------------------------------------------------------------
// Baselines

std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kImia: return "imia";
    case AttackKind::kImiaGaussian: return "imia_gaussian";
    case AttackKind::kImiaAdaptive: return "imia_adaptive";
    case AttackKind::kImiaAdaptiveGaussian: return "imia_adaptive_gaussian";
    case AttackKind::kLoss: return "loss";
    case AttackKind::kEntropy: return "entropy";
    case AttackKind::kCalibration: return "calibration";
    case AttackKind::kAttackR: return "attack_r";
    case AttackKind::kLiraOffline: return "lira_offline";
    case AttackKind::kLiraOnline: return "lira_online";
  }
  return "?";
}

AttackKind parse_attack_kind(std::string_view s) {
  for (auto k : {AttackKind::kImia, AttackKind::kImiaGaussian, AttackKind::kImiaAdaptive,
                 AttackKind::kImiaAdaptiveGaussian, AttackKind::kLoss, AttackKind::kEntropy,
                 AttackKind::kCalibration, AttackKind::kAttackR, AttackKind::kLiraOffline,
                 AttackKind::kLiraOnline})
    if (to_string(k) == s) return k;
  throw DomainError("unknown attack kind '" + std::string(s) + "'");
}

bool is_adaptive(AttackKind k) {
  return k == AttackKind::kImiaAdaptive || k == AttackKind::kImiaAdaptiveGaussian ||
         k == AttackKind::kLiraOnline;
}

bool needs_shadows(AttackKind k) {
  return k == AttackKind::kCalibration || k == AttackKind::kAttackR ||
         k == AttackKind::kLiraOffline || k == AttackKind::kLiraOnline;
}

bool needs_imitative(AttackKind k) {
  return k == AttackKind::kImia || k == AttackKind::kImiaGaussian ||
         k == AttackKind::kImiaAdaptive || k == AttackKind::kImiaAdaptiveGaussian;
}

void ShadowConfig::validate() const {
  if (n_models < 1) throw DomainError("n_models must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw DomainError("shadow train_fraction must lie in (0, 1]");
  for (int h : hidden)
    if (h <= 0) throw DomainError("hidden widths must be positive");
  train.validate();
}

namespace {

MlpModel train_shadow(const Dataset& parent, std::span<const Index> rows, const ShadowConfig& config,
                      std::uint64_t seed) {
  const Dataset data = subset(parent, rows);
  std::vector<int> dims{static_cast<int>(parent.dim())};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(parent.num_classes);
  TrainConfig train = config.train;
  train.seed = mix_seed(seed, 1);
  return sgd_train(MlpModel::create(dims, config.activation, mix_seed(seed, 0)), data, Objective{},
                   train);
}

}  // namespace

ShadowEnsemble prepare_shadows_offline(const Dataset& parent, std::span<const Index> pool,
                                       const ShadowConfig& config, std::uint64_t seed, int jobs) {
  config.validate();
  if (pool.empty()) throw DomainError("shadow pool is empty");
  ShadowEnsemble ens;
  ens.config = config;
  ens.seed = seed;
  const auto n = static_cast<std::size_t>(config.n_models);
  ens.train_sets.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    ens.train_sets[j] = sample_sorted(pool, config.train_fraction, mix_seed(seed, 1000 + j));
  ens.models.resize(n);
  parallel_for(n, jobs, [&](std::size_t j) {
    ens.models[j] = train_shadow(parent, ens.train_sets[j], config, mix_seed(seed, 2000 + j));
  });
  return ens;
}

ShadowEnsemble prepare_shadows_online(const Dataset& parent, std::span<const Index> pool,
                                      std::span<const Index> queries, const ShadowConfig& config,
                                      std::uint64_t seed, int jobs) {
  config.validate();
  check_queries_in_pool(pool, queries);
  if (queries.empty()) throw DomainError("online shadows need a non-empty query set");
  ShadowEnsemble ens;
  ens.config = config;
  ens.seed = seed;
  ens.queries.assign(queries.begin(), queries.end());
  const auto n = static_cast<std::size_t>(config.n_models);
  ens.assignment = balanced_assignment(n, queries.size(), mix_seed(seed, 300));
  const std::vector<Index> rest = without(pool, queries);
  ens.train_sets.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Index> rows = sample_sorted(rest, config.train_fraction, mix_seed(seed, 1000 + j));
    for (std::size_t q = 0; q < queries.size(); ++q)
      if (ens.assignment[j][q]) rows.push_back(queries[q]);
    std::sort(rows.begin(), rows.end());
    ens.train_sets[j] = std::move(rows);
  }
  ens.models.resize(n);
  parallel_for(n, jobs, [&](std::size_t j) {
    ens.models[j] = train_shadow(parent, ens.train_sets[j], config, mix_seed(seed, 2000 + j));
  });
  return ens;
}

double loss_score(std::span<const double> target_probs, int label) {
  return signal(SignalKind::kLoss, target_probs, label);
}

double entropy_score(std::span<const double> target_probs, int label) {
  return signal(SignalKind::kEntropyModified, target_probs, label);
}

double calibration_score(double target_loss, std::span<const double> shadow_losses) {
  return sample_mean(shadow_losses) - target_loss;
}

double attack_r_score(double target_loss, std::span<const double> shadow_losses) {
  if (shadow_losses.empty()) throw DomainError("attack_r needs at least one shadow loss");
  const auto greater = std::count_if(shadow_losses.begin(), shadow_losses.end(),
                                     [&](double l) { return l > target_loss; });
  return static_cast<double>(greater) / static_cast<double>(shadow_losses.size());
}

double lira_offline_score(double s_obs, std::span<const double> out_scores) {
  const GaussianFit fit = fit_gaussian(out_scores);
  return normal_cdf((s_obs - fit.mean) / fit.std);
}

double lira_online_score(double s_obs, std::span<const double> in_scores,
                         std::span<const double> out_scores) {
  return imia_gaussian_score(in_scores, out_scores, s_obs);
}

// ---------------------------------------------------------------------------
// Driver

namespace {

template <typename T>
const T& require(const T* p, AttackKind kind, const char* what) {
  if (!p)
    throw ConfigError("attack '" + std::string(to_string(kind)) + "' needs a prepared " + what);
  return *p;
}

std::vector<QuerySamples> reorder_by_query(std::vector<QuerySamples> samples,
                                           std::span<const Index> queries) {
  std::unordered_map<Index, std::size_t> at;
  for (std::size_t i = 0; i < samples.size(); ++i) at.emplace(samples[i].query_id, i);
  std::vector<QuerySamples> out;
  out.reserve(queries.size());
  for (Index q : queries) {
    auto it = at.find(q);
    if (it == at.end())
      throw ConfigError("query " + std::to_string(q) + " was not part of the prepared ensemble");
    out.push_back(samples[it->second]);
  }
  return out;
}

bool any_floored(std::span<const double> a, std::span<const double> b) {
  return (a.size() >= 2 && !(sample_std(a) >= kSigmaFloor)) ||
         (b.size() >= 2 && !(sample_std(b) >= kSigmaFloor));
}

}  // namespace

ScoreTable score_queries(AttackKind kind, const PreparedAttack& prepared, const Dataset& parent,
                         const TargetOracle& target, std::span<const Index> queries,
                         const std::vector<bool>& truth, SignalKind signal, int jobs) {
  if (truth.size() != queries.size()) throw ShapeError("truth vector does not match queries");
  ScoreTable table;
  table.rows.resize(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    table.rows[i].query_id = queries[i];
    table.rows[i].is_member = truth[i];
  }
  if (queries.empty()) return table;

  // Per-query evaluation with failure capture.
  auto each = [&](auto&& fn) {
    for (std::size_t i = 0; i < queries.size(); ++i) {
      ScoreRow& row = table.rows[i];
      try {
        row.score = fn(i, row.warnings);
        if (!std::isfinite(row.score)) throw DomainError("non-finite score");
      } catch (const Error& e) {
        std::string msg = e.what();
        std::replace_if(msg.begin(), msg.end(), [](char c) { return c == ',' || c == '\n' || c == ';'; }, ' ');
        add_tag(row.warnings, "failed:" + msg);
        row.score = std::numeric_limits<double>::lowest();
      }
    }
  };

  const Dataset qdata = subset(parent, queries);
  switch (kind) {
    case AttackKind::kLoss:
    case AttackKind::kEntropy: {
      const Matrix probs = target.query(qdata.features);
      const SignalKind s = kind == AttackKind::kLoss ? SignalKind::kLoss : SignalKind::kEntropyModified;
      const std::vector<double> v = probability_signals(s, probs, qdata.labels);
      each([&](std::size_t i, std::string&) { return v[i]; });
      break;
    }
    case AttackKind::kImia:
    case AttackKind::kImiaGaussian: {
      const auto& ens = require(prepared.imitative, kind, "imitative ensemble");
      const auto samples = NonAdaptiveScorer(ens, parent, signal).collect(target, queries, jobs);
      each([&](std::size_t i, std::string& tags) {
        const auto& s = samples[i];
        if (s.proxy_fallback) add_tag(tags, "proxy_fallback");
        if (kind == AttackKind::kImia) return lambda_score(summarize(s));
        if (any_floored(s.in, s.out)) add_tag(tags, "sigma_floor");
        return imia_gaussian_score(s.in, s.out, s.s_obs);
      });
      break;
    }
    case AttackKind::kImiaAdaptive:
    case AttackKind::kImiaAdaptiveGaussian: {
      const auto& ens = require(prepared.adaptive, kind, "adaptive ensemble");
      const auto samples = reorder_by_query(collect_adaptive(ens, parent, target, signal, jobs), queries);
      each([&](std::size_t i, std::string& tags) {
        const auto& s = samples[i];
        if (kind == AttackKind::kImiaAdaptive) return lambda_score(summarize(s));
        if (any_floored(s.in, s.out)) add_tag(tags, "sigma_floor");
        return imia_gaussian_score(s.in, s.out, s.s_obs);
      });
      break;
    }
    case AttackKind::kCalibration:
    case AttackKind::kAttackR:
    case AttackKind::kLiraOffline: {
      const auto& sh = require(prepared.shadows, kind, "shadow ensemble");
      const Matrix probs = target.query(qdata.features);
      const bool use_loss = kind != AttackKind::kLiraOffline;
      std::vector<std::vector<double>> per_model(sh.models.size());
      parallel_for(sh.models.size(), jobs, [&](std::size_t j) {
        per_model[j] = use_loss ? model_losses(sh.models[j], qdata.features, qdata.labels)
                                : model_signals(signal, sh.models[j], qdata.features, qdata.labels);
      });
      const std::vector<double> s_obs =
          use_loss ? std::vector<double>{} : probability_signals(signal, probs, qdata.labels);
      each([&](std::size_t i, std::string& tags) {
        std::vector<double> v(per_model.size());
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = per_model[j][i];
        const auto r = static_cast<Index>(i);
        if (kind == AttackKind::kCalibration)
          return calibration_score(target_loss(probs, r, qdata.labels[i]), v);
        if (kind == AttackKind::kAttackR)
          return attack_r_score(target_loss(probs, r, qdata.labels[i]), v);
        if (any_floored(v, {})) add_tag(tags, "sigma_floor");
        return lira_offline_score(s_obs[i], v);
      });
      break;
    }
    case AttackKind::kLiraOnline: {
      const auto& sh = require(prepared.shadows, kind, "shadow ensemble");
      if (!sh.online()) throw ConfigError("lira_online needs online (query-aware) shadows");
      const Dataset sq = subset(parent, sh.queries);
      const std::vector<double> s_obs =
          probability_signals(signal, target.query(sq.features), sq.labels);
      std::vector<std::vector<double>> sig(sh.models.size());
      parallel_for(sh.models.size(), jobs, [&](std::size_t j) {
        sig[j] = model_signals(signal, sh.models[j], sq.features, sq.labels);
      });
      std::vector<QuerySamples> samples(sh.queries.size());
      for (std::size_t q = 0; q < sh.queries.size(); ++q) {
        samples[q].query_id = sh.queries[q];
        samples[q].s_obs = s_obs[q];
        for (std::size_t j = 0; j < sh.models.size(); ++j)
          (sh.assignment[j][q] ? samples[q].in : samples[q].out).push_back(sig[j][q]);
      }
      samples = reorder_by_query(std::move(samples), queries);
      each([&](std::size_t i, std::string& tags) {
        const auto& s = samples[i];
        if (any_floored(s.in, s.out)) add_tag(tags, "sigma_floor");
        return lira_online_score(s.s_obs, s.in, s.out);
      });
      break;
    }
  }
  return table;
}

}  // namespace imia
