#include <gtest/gtest.h>

#include <cmath>

#include "imia/nn.hpp"
#include "imia/signals.hpp"

namespace imia {
namespace {

TEST(Signal, ScaledConfidenceExamples) {
  const double uniform[] = {0.25, 0.25, 0.25, 0.25};
  for (int y = 0; y < 4; ++y) EXPECT_EQ(signal(SignalKind::kScaledConfidenceProb, uniform, y), 0.0);
  const double p[] = {0.7, 0.2, 0.1};
  EXPECT_NEAR(signal(SignalKind::kScaledConfidenceProb, p, 0), std::log(0.7 / 0.2), 1e-15);
  EXPECT_NEAR(signal(SignalKind::kScaledConfidenceProb, p, 0), 1.2528, 1e-4);
  EXPECT_NEAR(signal(SignalKind::kScaledConfidenceProb, p, 2), std::log(0.1 / 0.7), 1e-15);
}

TEST(Signal, PresoftmaxMargin) {
  const double z[] = {5.0, 1.0, -2.0};
  EXPECT_EQ(signal(SignalKind::kScaledConfidencePresoftmax, z, 0), 4.0);
  EXPECT_EQ(signal(SignalKind::kScaledConfidencePresoftmax, z, 2), -7.0);
}

TEST(Signal, LossAndEntropyOrientation) {
  const double confident[] = {0.98, 0.01, 0.01};
  const double unsure[] = {0.4, 0.3, 0.3};
  for (auto k : {SignalKind::kLoss, SignalKind::kEntropyModified, SignalKind::kScaledConfidenceProb})
    EXPECT_GT(signal(k, confident, 0), signal(k, unsure, 0)) << to_string(k);
  EXPECT_NEAR(signal(SignalKind::kLoss, confident, 0), std::log(0.98), 1e-15);
}

TEST(Signal, ModifiedEntropyReference) {
  const double p[] = {0.6, 0.3, 0.1};
  const double expect = -(1 - 0.6) * std::log(0.6) - 0.3 * std::log(1 - 0.3) - 0.1 * std::log(1 - 0.1);
  EXPECT_NEAR(modified_entropy(p, 0), expect, 1e-15);
}

TEST(Signal, ClampKeepsValuesFinite) {
  const double p[] = {1.0, 0.0};
  EXPECT_TRUE(std::isfinite(signal(SignalKind::kScaledConfidenceProb, p, 0)));
  EXPECT_TRUE(std::isfinite(signal(SignalKind::kScaledConfidenceProb, p, 1)));
  EXPECT_TRUE(std::isfinite(signal(SignalKind::kEntropyModified, p, 1)));
}

TEST(Signal, Errors) {
  const double one[] = {1.0};
  EXPECT_THROW(signal(SignalKind::kLoss, one, 0), DomainError);
  const double p[] = {0.5, 0.5};
  EXPECT_THROW(signal(SignalKind::kLoss, p, 2), DomainError);
  EXPECT_THROW(parse_signal_kind("margin"), DomainError);
}

TEST(Signal, ModelAndProbabilityPathsAgree) {
  const MlpModel m = MlpModel::create({4, 6, 5}, Activation::kTanh, 3);
  Matrix x = Matrix::Random(8, 4);
  const std::vector<int> y{0, 1, 2, 3, 4, 0, 1, 2};
  const Matrix probs = softmax_rows(forward(m, x));
  for (auto k : {SignalKind::kScaledConfidenceProb, SignalKind::kScaledConfidencePresoftmax,
                 SignalKind::kLoss, SignalKind::kEntropyModified}) {
    const auto a = model_signals(k, m, x, y);
    const auto b = probability_signals(k, probs, y);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10) << to_string(k);
  }
}

}  // namespace
}  // namespace imia
