#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "imia/common.hpp"
#include "imia/data.hpp"

namespace imia {

enum class Activation { kRelu, kTanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

/// Fully connected classifier. weights[l] is [layer_dims[l] x layer_dims[l+1]]
/// so that a batch of row samples maps as X * W + b. The last layer emits raw
/// pre-softmax scores.
struct MlpModel {
  std::vector<int> layer_dims;
  Activation activation = Activation::kRelu;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static MlpModel create(std::vector<int> layer_dims, Activation activation, std::uint64_t seed);
  /// All parameters zero.
  static MlpModel zeros(std::vector<int> layer_dims, Activation activation);

  int input_dim() const { return layer_dims.front(); }
  int num_classes() const { return layer_dims.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t num_parameters() const;
  bool all_finite() const;
  void validate() const;

  /// FNV-1a over the raw parameter bytes; used to pair snapshots.
  std::uint64_t fingerprint() const;

  bool operator==(const MlpModel&) const = default;
};

/// Same layout as the model's parameters.
struct ModelGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static ModelGradients zeros_like(const MlpModel& model);
};

struct LossAndGradients {
  double loss = 0.0;
  ModelGradients gradients;
};

/// Pre-softmax scores, one row per input row.
Matrix forward(const MlpModel& model, const Matrix& inputs);

/// softmax(scores / temperature). Temperature 0 yields the one-hot of the
/// argmax, ties to the lowest class index.
Vector softmax_temp(std::span<const double> scores, double temperature);
/// Row-wise softmax_temp.
Matrix softmax_rows(const Matrix& scores, double temperature = 1.0);
/// Row-wise log(max(p, eps)).
Matrix clamped_log(const Matrix& probs);
/// Re-tempers probability rows: softmax(log p / T), exact up to the clamp.
Matrix retemper(const Matrix& probs, double temperature);

enum class WeightStrategy { kUniform, kLog, kSqrt, kLinear };

std::string_view to_string(WeightStrategy s);
WeightStrategy parse_weight_strategy(std::string_view s);

/// Per-class weights of the imitation loss. The true class and the target's
/// top incorrect class are emphasized; the vector always sums to one.
Vector class_weights(int num_classes, int true_class, int top_incorrect, WeightStrategy strategy);

LossAndGradients cross_entropy(const MlpModel& model, const Matrix& inputs,
                               std::span<const int> labels);

/// Weighted squared difference of clamped log-probabilities against the
/// target's probability rows.
LossAndGradients imitation_loss(const MlpModel& model, const Matrix& target_probs,
                                const Matrix& inputs, std::span<const int> labels,
                                WeightStrategy strategy = WeightStrategy::kSqrt);

/// Mean KL(target || student) with clamped logs.
LossAndGradients kl_distill_loss(const MlpModel& model, const Matrix& target_probs,
                                 const Matrix& inputs);

enum class LossKind { kCrossEntropy, kImitation, kKlDistill };

std::string_view to_string(LossKind k);
LossKind parse_loss_kind(std::string_view s);

enum class Schedule { kConstant, kCosine };

std::string_view to_string(Schedule s);
Schedule parse_schedule(std::string_view s);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Schedule schedule = Schedule::kCosine;
  std::uint64_t seed = 0;

  void validate() const;
  /// Learning rate for a zero-based epoch.
  double rate_at(int epoch) const;
};

/// What sgd_train minimizes. target_probs rows align with the dataset rows
/// and are required for the imitation and KL objectives.
struct Objective {
  LossKind kind = LossKind::kCrossEntropy;
  const Matrix* target_probs = nullptr;
  WeightStrategy weights = WeightStrategy::kSqrt;
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::size_t steps = 0;
};

/// Minibatch SGD with momentum, L2 weight decay folded into the gradient and
/// an optional per-epoch cosine anneal. Batch order is shuffled with
/// config.seed; a batch size above the dataset size is clamped to it.
MlpModel sgd_train(MlpModel model, const Dataset& data, const Objective& objective,
                   const TrainConfig& config, TrainStats* stats = nullptr);

/// Fraction of rows whose argmax score equals the label.
double accuracy(const MlpModel& model, const Dataset& data);

/// "mlp v1 <activation> <d0> ... <dk>\n" followed by little-endian doubles:
/// each weight matrix row-major, then each bias vector, in layer order.
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);
void write_model(const MlpModel& model, std::ostream& out);
MlpModel read_model(std::istream& in);

}  // namespace imia
