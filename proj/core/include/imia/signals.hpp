#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "imia/common.hpp"
#include "imia/nn.hpp"

namespace imia {

/// Membership signals; every kind is oriented so that higher means more
/// member-like.
enum class SignalKind {
  kScaledConfidenceProb,       // log p_y - log max_{y' != y} p_y'
  kScaledConfidencePresoftmax, // z_y - max_{y' != y} z_y'
  kLoss,                       // +log p_y
  kEntropyModified,            // -Mentr
};

std::string_view to_string(SignalKind k);
SignalKind parse_signal_kind(std::string_view s);

/// `output` holds raw scores for kScaledConfidencePresoftmax and a
/// probability vector for every other kind.
double signal(SignalKind kind, std::span<const double> output, int true_label);

/// Signal of every row of a model's output. Probability kinds apply the
/// softmax at temperature 1.
std::vector<double> model_signals(SignalKind kind, const MlpModel& model, const Matrix& inputs,
                                  std::span<const int> labels);

/// Signal of every row of a black-box probability table. The pre-softmax
/// margin is recovered from log-probabilities, which differ from the logits by
/// a per-row constant.
std::vector<double> probability_signals(SignalKind kind, const Matrix& probs,
                                        std::span<const int> labels);

/// Modified prediction entropy (not negated).
double modified_entropy(std::span<const double> probs, int true_label);

}  // namespace imia
