#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "imia/attacks.hpp"

namespace imia {

struct RocPoint {
  double threshold = 0.0;  // predict "member" when score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Points ordered by decreasing threshold. The first point has threshold
/// +inf and sits at (0, 0); the last is the lowest score and sits at (1, 1).
struct RocCurve {
  std::vector<RocPoint> points;
};

/// Exact empirical sweep; tied scores share one threshold. Throws DomainError
/// unless the table has both members and non-members.
RocCurve roc(const ScoreTable& table);

/// Highest TPR among thresholds whose FPR is at most `fpr_target`. No
/// interpolation.
double tpr_at_fpr(const ScoreTable& table, double fpr_target);
double tpr_at_fpr(const RocCurve& curve, double fpr_target);

/// max over thresholds of (TPR + TNR) / 2.
double balanced_accuracy(const ScoreTable& table);
double balanced_accuracy(const RocCurve& curve);

/// Smallest positive FPR on the curve together with the best TPR there.
RocPoint strictest_nonzero_point(const RocCurve& curve);

struct ResidualEntry {
  Index instance_id = 0;
  bool is_member = false;
  double residual = 0.0;
};

struct ResidualReport {
  std::vector<ResidualEntry> entries;
  double ks_distance = 0.0;
  std::size_t sigma_floored = 0;
  std::vector<std::pair<double, double>> qq;  // (empirical, normal) quantiles
};

/// Members are normalized by their in-sample fit, non-members by their
/// out-sample fit. Each side needs at least 2 samples.
ResidualReport residual_report(std::span<const QuerySamples> samples,
                               const std::vector<bool>& is_member);

/// Kolmogorov-Smirnov sup distance between the empirical CDF of `xs` and the
/// standard normal CDF.
double ks_distance_normal(std::span<const double> xs);

/// Sorted `xs` paired with normal quantiles at (i - 0.5) / n.
std::vector<std::pair<double, double>> qq_pairs(std::span<const double> xs);

/// W1 between two empirical distributions via their quantile functions.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

/// Mean over instances of pdf(s_obs | imitative fit) / pdf(s_obs | shadow fit).
double avg_likelihood_ratio(std::span<const GaussianFit> imitative,
                            std::span<const GaussianFit> shadow, std::span<const double> s_obs);

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);
void write_residual_csv(const ResidualReport& report, const std::filesystem::path& path);
void write_qq_csv(const ResidualReport& report, const std::filesystem::path& path);

}  // namespace imia
