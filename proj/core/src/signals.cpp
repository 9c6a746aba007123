#include "imia/signals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imia {

namespace {

double clamped_log(double p) { return std::log(std::max(p, kProbEpsilon)); }

void check(std::span<const double> output, int true_label) {
  if (output.size() < 2) throw DomainError("signals need at least two classes");
  if (true_label < 0 || static_cast<std::size_t>(true_label) >= output.size())
    throw DomainError("label " + std::to_string(true_label) + " out of range");
}

double best_other(std::span<const double> v, int true_label) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (static_cast<int>(i) != true_label) best = std::max(best, v[i]);
  return best;
}

std::span<const double> row_span(const Matrix& m, Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

std::string_view to_string(SignalKind k) {
  switch (k) {
    case SignalKind::kScaledConfidenceProb: return "scaled_confidence_prob";
    case SignalKind::kScaledConfidencePresoftmax: return "scaled_confidence_presoftmax";
    case SignalKind::kLoss: return "loss";
    case SignalKind::kEntropyModified: return "entropy_modified";
  }
  return "?";
}

SignalKind parse_signal_kind(std::string_view s) {
  if (s == "scaled_confidence_prob") return SignalKind::kScaledConfidenceProb;
  if (s == "scaled_confidence_presoftmax") return SignalKind::kScaledConfidencePresoftmax;
  if (s == "loss") return SignalKind::kLoss;
  if (s == "entropy_modified") return SignalKind::kEntropyModified;
  throw DomainError("unknown signal kind '" + std::string(s) + "'");
}

double modified_entropy(std::span<const double> probs, int true_label) {
  check(probs, true_label);
  double m = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (static_cast<int>(i) == true_label)
      m -= (1.0 - p) * clamped_log(p);
    else
      m -= p * clamped_log(1.0 - p);
  }
  return m;
}

double signal(SignalKind kind, std::span<const double> output, int true_label) {
  check(output, true_label);
  const auto y = static_cast<std::size_t>(true_label);
  switch (kind) {
    case SignalKind::kScaledConfidenceProb:
      return clamped_log(output[y]) - clamped_log(best_other(output, true_label));
    case SignalKind::kScaledConfidencePresoftmax:
      return output[y] - best_other(output, true_label);
    case SignalKind::kLoss:
      return clamped_log(output[y]);
    case SignalKind::kEntropyModified:
      return -modified_entropy(output, true_label);
  }
  throw InternalError("unhandled signal kind");
}

std::vector<double> model_signals(SignalKind kind, const MlpModel& model, const Matrix& inputs,
                                  std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != inputs.rows())
    throw ShapeError("label count does not match input rows");
  const Matrix scores = forward(model, inputs);
  const Matrix out =
      kind == SignalKind::kScaledConfidencePresoftmax ? scores : softmax_rows(scores, 1.0);
  std::vector<double> s(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    s[i] = signal(kind, row_span(out, static_cast<Index>(i)), labels[i]);
  return s;
}

std::vector<double> probability_signals(SignalKind kind, const Matrix& probs,
                                        std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != probs.rows())
    throw ShapeError("label count does not match probability rows");
  const Matrix out =
      kind == SignalKind::kScaledConfidencePresoftmax ? imia::clamped_log(probs) : probs;
  std::vector<double> s(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    s[i] = signal(kind, row_span(out, static_cast<Index>(i)), labels[i]);
  return s;
}

}  // namespace imia
