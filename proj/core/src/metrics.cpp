#include "imia/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace imia {

namespace {

std::string fmt(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

}  // namespace

RocCurve roc(const ScoreTable& table) {
  std::vector<std::pair<double, bool>> rows;
  rows.reserve(table.size());
  std::size_t pos = 0;
  for (const auto& r : table.rows) {
    if (std::isnan(r.score)) throw DomainError("score table contains NaN");
    rows.emplace_back(r.score, r.is_member);
    pos += r.is_member ? 1 : 0;
  }
  const std::size_t neg = rows.size() - pos;
  if (pos == 0 || neg == 0) throw DomainError("ROC needs at least one member and one non-member");
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < rows.size();) {
    const double t = rows[i].first;
    for (; i < rows.size() && rows[i].first == t; ++i) (rows[i].second ? tp : fp) += 1;
    curve.points.push_back(
        {t, static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return curve;
}

double tpr_at_fpr(const RocCurve& curve, double fpr_target) {
  if (!(fpr_target >= 0.0 && fpr_target < 1.0)) throw DomainError("fpr target must lie in [0, 1)");
  double best = 0.0;
  for (const auto& p : curve.points)
    if (p.fpr <= fpr_target) best = std::max(best, p.tpr);
  return best;
}

double tpr_at_fpr(const ScoreTable& table, double fpr_target) {
  return tpr_at_fpr(roc(table), fpr_target);
}

double balanced_accuracy(const RocCurve& curve) {
  double best = 0.0;
  for (const auto& p : curve.points) best = std::max(best, 0.5 * (p.tpr + (1.0 - p.fpr)));
  return best;
}

double balanced_accuracy(const ScoreTable& table) { return balanced_accuracy(roc(table)); }

RocPoint strictest_nonzero_point(const RocCurve& curve) {
  RocPoint best{0.0, 1.0, 0.0};
  for (const auto& p : curve.points) {
    if (p.fpr <= 0.0) continue;
    if (p.fpr < best.fpr || (p.fpr == best.fpr && p.tpr > best.tpr)) best = p;
  }
  return best;
}

double ks_distance_normal(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("KS distance of an empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = normal_cdf(v[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

std::vector<std::pair<double, double>> qq_pairs(std::span<const double> xs) {
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const boost::math::normal_distribution<double> std_normal;
  std::vector<std::pair<double, double>> out(v.size());
  const auto n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = {v[i], boost::math::quantile(std_normal, (static_cast<double>(i) + 0.5) / n)};
  return out;
}

ResidualReport residual_report(std::span<const QuerySamples> samples,
                               const std::vector<bool>& is_member) {
  if (samples.size() != is_member.size()) throw ShapeError("group flags do not match samples");
  if (samples.empty()) throw DomainError("residual report needs at least one instance");
  ResidualReport rep;
  std::vector<double> rs;
  rs.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const GaussianFit fit = fit_gaussian(is_member[i] ? s.in : s.out);
    if (fit.floored) ++rep.sigma_floored;
    const double r = (s.s_obs - fit.mean) / fit.std;
    if (!std::isfinite(r)) throw DomainError("non-finite residual for instance " + std::to_string(s.query_id));
    rep.entries.push_back({s.query_id, static_cast<bool>(is_member[i]), r});
    rs.push_back(r);
  }
  if (rep.sigma_floored > 0)
    log_warning(std::to_string(rep.sigma_floored) + " residual fits hit the sigma floor");
  rep.ks_distance = ks_distance_normal(rs);
  rep.qq = qq_pairs(rs);
  return rep;
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("Wasserstein distance needs non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  if (x.size() == y.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
    return s / static_cast<double>(x.size());
  }
  // Walk the merged grid of quantile breakpoints i/n and j/m using integer
  // cross-multiplication so equal breakpoints coincide exactly.
  const std::size_t n = x.size(), m = y.size();
  std::size_t i = 0, j = 0;
  double total = 0.0, prev = 0.0;
  while (i < n && j < m) {
    const std::size_t next_x = (i + 1) * m, next_y = (j + 1) * n;  // in units of 1/(n*m)
    const std::size_t step = std::min(next_x, next_y);
    const double u = static_cast<double>(step) / static_cast<double>(n * m);
    total += (u - prev) * std::abs(x[i] - y[j]);
    prev = u;
    if (next_x == step) ++i;
    if (next_y == step) ++j;
  }
  return total;
}

double avg_likelihood_ratio(std::span<const GaussianFit> imitative,
                            std::span<const GaussianFit> shadow, std::span<const double> s_obs) {
  if (imitative.size() != shadow.size() || shadow.size() != s_obs.size())
    throw ShapeError("likelihood-ratio inputs differ in length");
  if (s_obs.empty()) throw DomainError("likelihood ratio over an empty group");
  std::size_t floored = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < s_obs.size(); ++i) {
    floored += (imitative[i].floored ? 1 : 0) + (shadow[i].floored ? 1 : 0);
    sum += std::exp(normal_log_pdf(s_obs[i], imitative[i]) - normal_log_pdf(s_obs[i], shadow[i]));
  }
  if (floored > 0) log_warning(std::to_string(floored) + " likelihood-ratio fits hit the sigma floor");
  return sum / static_cast<double>(s_obs.size());
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points)
    out << (std::isinf(p.threshold) ? std::string("inf") : fmt(p.threshold)) << ',' << fmt(p.fpr)
        << ',' << fmt(p.tpr) << '\n';
}

void write_residual_csv(const ResidualReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "instance_id,group,residual\n";
  for (const auto& e : report.entries)
    out << e.instance_id << ',' << (e.is_member ? "member" : "nonmember") << ',' << fmt(e.residual)
        << '\n';
}

void write_qq_csv(const ResidualReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "empirical_q,normal_q\n";
  for (const auto& [e, q] : report.qq) out << fmt(e) << ',' << fmt(q) << '\n';
}

}  // namespace imia
