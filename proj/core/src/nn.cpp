#include "imia/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace imia {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; add byte swapping for this platform");

namespace {

const double kLogEpsilon = std::log(kProbEpsilon);

void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

struct ForwardPass {
  std::vector<Matrix> layer_inputs;  // input of each layer; [0] is the batch
  std::vector<Matrix> hidden_pre;    // pre-activation of each hidden layer
  Matrix scores;
};

ForwardPass forward_with_cache(const MlpModel& model, const Matrix& inputs) {
  require_shape(inputs.cols() == model.input_dim(),
                "input width " + std::to_string(inputs.cols()) + " does not match model input " +
                    std::to_string(model.input_dim()));
  ForwardPass pass;
  const std::size_t layers = model.num_layers();
  pass.layer_inputs.reserve(layers);
  pass.hidden_pre.reserve(layers - 1);
  pass.layer_inputs.push_back(inputs);
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = pass.layer_inputs.back() * model.weights[l];
    z.rowwise() += model.biases[l].transpose();
    if (l + 1 == layers) {
      pass.scores = std::move(z);
      break;
    }
    Matrix a = model.activation == Activation::kRelu ? Matrix(z.cwiseMax(0.0))
                                                     : Matrix(z.array().tanh().matrix());
    pass.hidden_pre.push_back(std::move(z));
    pass.layer_inputs.push_back(std::move(a));
  }
  return pass;
}

ModelGradients backward(const MlpModel& model, const ForwardPass& pass, Matrix score_grad) {
  ModelGradients g;
  const std::size_t layers = model.num_layers();
  g.weights.resize(layers);
  g.biases.resize(layers);
  Matrix delta = std::move(score_grad);
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l].noalias() = pass.layer_inputs[l].transpose() * delta;
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix upstream = delta * model.weights[l].transpose();
    if (model.activation == Activation::kRelu) {
      upstream.array() *= (pass.hidden_pre[l - 1].array() > 0.0).cast<double>();
    } else {
      const auto& a = pass.layer_inputs[l].array();
      upstream.array() *= 1.0 - a.square();
    }
    delta = std::move(upstream);
  }
  return g;
}

Matrix log_softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    const double lse = m + std::log((scores.row(i).array() - m).exp().sum());
    out.row(i) = scores.row(i).array() - lse;
  }
  return out;
}

void check_labels(std::span<const int> labels, Index rows, int num_classes) {
  require_shape(static_cast<Index>(labels.size()) == rows,
                "label count " + std::to_string(labels.size()) + " does not match batch rows " +
                    std::to_string(rows));
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw DomainError("label " + std::to_string(y) + " outside [0, " +
                        std::to_string(num_classes) + ")");
}

void check_probability_rows(const Matrix& probs, Index rows, int num_classes) {
  require_shape(probs.rows() == rows && probs.cols() == num_classes,
                "target probability table is " + std::to_string(probs.rows()) + "x" +
                    std::to_string(probs.cols()) + ", expected " + std::to_string(rows) + "x" +
                    std::to_string(num_classes));
  for (Index i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    if (!row.allFinite() || row.minCoeff() < 0.0 || std::abs(row.sum() - 1.0) > 1e-6)
      throw DomainError("target probability row " + std::to_string(i) +
                        " is not a probability vector");
  }
}

int top_incorrect_class(const auto& probs_row, int true_class) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(probs_row.size()); ++i) {
    if (i == true_class) continue;
    if (best < 0 || probs_row(i) > probs_row(best)) best = i;
  }
  return best;
}

template <typename Writer>
void for_each_parameter_block(const MlpModel& model, Writer&& write) {
  for (const auto& w : model.weights) write(w.data(), static_cast<std::size_t>(w.size()));
  for (const auto& b : model.biases) write(b.data(), static_cast<std::size_t>(b.size()));
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw DomainError("unknown activation '" + std::string(s) + "'");
}

std::string_view to_string(WeightStrategy s) {
  switch (s) {
    case WeightStrategy::kUniform: return "uniform";
    case WeightStrategy::kLog: return "log";
    case WeightStrategy::kSqrt: return "sqrt";
    case WeightStrategy::kLinear: return "linear";
  }
  return "?";
}

WeightStrategy parse_weight_strategy(std::string_view s) {
  if (s == "uniform") return WeightStrategy::kUniform;
  if (s == "log") return WeightStrategy::kLog;
  if (s == "sqrt") return WeightStrategy::kSqrt;
  if (s == "linear") return WeightStrategy::kLinear;
  throw DomainError("unknown weight strategy '" + std::string(s) + "'");
}

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kImitation: return "imitation";
    case LossKind::kKlDistill: return "kl_distill";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "cross_entropy") return LossKind::kCrossEntropy;
  if (s == "imitation") return LossKind::kImitation;
  if (s == "kl_distill") return LossKind::kKlDistill;
  throw DomainError("unknown loss kind '" + std::string(s) + "'");
}

std::string_view to_string(Schedule s) { return s == Schedule::kCosine ? "cosine" : "constant"; }

Schedule parse_schedule(std::string_view s) {
  if (s == "cosine") return Schedule::kCosine;
  if (s == "constant") return Schedule::kConstant;
  throw DomainError("unknown schedule '" + std::string(s) + "'");
}

MlpModel MlpModel::zeros(std::vector<int> layer_dims, Activation activation) {
  if (layer_dims.size() < 2) throw DomainError("an MLP needs at least input and output widths");
  for (int d : layer_dims)
    if (d <= 0) throw DomainError("layer widths must be positive");
  MlpModel m;
  m.layer_dims = std::move(layer_dims);
  m.activation = activation;
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    m.weights.push_back(Matrix::Zero(m.layer_dims[l], m.layer_dims[l + 1]));
    m.biases.push_back(Vector::Zero(m.layer_dims[l + 1]));
  }
  return m;
}

MlpModel MlpModel::create(std::vector<int> layer_dims, Activation activation, std::uint64_t seed) {
  MlpModel m = zeros(std::move(layer_dims), activation);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.layer_dims[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < m.weights[l].size(); ++i) m.weights[l].data()[i] = dist(rng);
    for (Index i = 0; i < m.biases[l].size(); ++i) m.biases[l](i) = dist(rng);
  }
  return m;
}

std::size_t MlpModel::num_parameters() const {
  std::size_t n = 0;
  for_each_parameter_block(*this, [&](const double*, std::size_t count) { n += count; });
  return n;
}

bool MlpModel::all_finite() const {
  bool ok = true;
  for_each_parameter_block(*this, [&](const double* p, std::size_t count) {
    for (std::size_t i = 0; i < count && ok; ++i) ok = std::isfinite(p[i]);
  });
  return ok;
}

void MlpModel::validate() const {
  if (layer_dims.size() < 2) throw ShapeError("model needs at least two layer widths");
  if (weights.size() + 1 != layer_dims.size() || biases.size() != weights.size())
    throw ShapeError("parameter count does not match layer_dims");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_dims[l] || weights[l].cols() != layer_dims[l + 1] ||
        biases[l].size() != layer_dims[l + 1])
      throw ShapeError("layer " + std::to_string(l) + " parameters do not chain with layer_dims");
  }
  if (!all_finite()) throw DomainError("model has non-finite parameters");
}

std::uint64_t MlpModel::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (int d : layer_dims) mix(&d, sizeof d);
  for_each_parameter_block(*this, [&](const double* p, std::size_t count) {
    mix(p, count * sizeof(double));
  });
  return h;
}

ModelGradients ModelGradients::zeros_like(const MlpModel& model) {
  ModelGradients g;
  for (const auto& w : model.weights) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : model.biases) g.biases.push_back(Vector::Zero(b.size()));
  return g;
}

Matrix forward(const MlpModel& model, const Matrix& inputs) {
  return forward_with_cache(model, inputs).scores;
}

Vector softmax_temp(std::span<const double> scores, double temperature) {
  if (scores.size() < 2) throw DomainError("softmax needs at least two classes");
  if (!(temperature >= 0.0) || !std::isfinite(temperature))
    throw DomainError("softmax temperature must be a finite non-negative number");
  const auto c = static_cast<Index>(scores.size());
  Eigen::Map<const Vector> z(scores.data(), c);
  Vector p = Vector::Zero(c);
  if (temperature == 0.0) {
    Index best = 0;
    for (Index i = 1; i < c; ++i)
      if (z(i) > z(best)) best = i;
    p(best) = 1.0;
    return p;
  }
  const Vector scaled = z / temperature;
  p = (scaled.array() - scaled.maxCoeff()).exp();
  p /= p.sum();
  return p;
}

Matrix softmax_rows(const Matrix& scores, double temperature) {
  Matrix out(scores.rows(), scores.cols());
  for (Index i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    out.row(i) = softmax_temp(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                              temperature)
                     .transpose();
  }
  return out;
}

Matrix clamped_log(const Matrix& probs) {
  return probs.array().max(kProbEpsilon).log().matrix();
}

Matrix retemper(const Matrix& probs, double temperature) {
  if (temperature == 1.0) return probs;
  return softmax_rows(clamped_log(probs), temperature);
}

Vector class_weights(int num_classes, int true_class, int top_incorrect, WeightStrategy strategy) {
  if (num_classes < 2) throw DomainError("class weights need at least two classes");
  if (true_class < 0 || true_class >= num_classes || top_incorrect < 0 ||
      top_incorrect >= num_classes)
    throw DomainError("class index out of range");
  if (true_class == top_incorrect)
    throw DomainError("true class and top incorrect class must differ");

  const double c = num_classes;
  Vector w(num_classes);
  if (strategy == WeightStrategy::kSqrt) {
    const double denom = c + 2.0 * std::sqrt(c);
    w.setConstant(1.0 / denom);
    w(true_class) = w(top_incorrect) = (1.0 + std::sqrt(c)) / denom;
    return w;
  }
  double emphasis = 1.0;
  if (strategy == WeightStrategy::kLog) emphasis = std::log(c);
  if (strategy == WeightStrategy::kLinear) emphasis = c;
  w.setOnes();
  w(true_class) = w(top_incorrect) = emphasis;
  return w / w.sum();
}

LossAndGradients cross_entropy(const MlpModel& model, const Matrix& inputs,
                               std::span<const int> labels) {
  const ForwardPass pass = forward_with_cache(model, inputs);
  const Index n = inputs.rows();
  check_labels(labels, n, model.num_classes());
  if (n == 0) throw DomainError("empty batch");

  const Matrix logp = log_softmax_rows(pass.scores);
  Matrix grad = Matrix::Zero(n, pass.scores.cols());
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const double lp = logp(i, y);
    if (lp < kLogEpsilon) {
      loss -= kLogEpsilon;  // clamped: constant, zero gradient
      continue;
    }
    loss -= lp;
    grad.row(i) = logp.row(i).array().exp();
    grad(i, y) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  grad *= inv_n;
  return {loss * inv_n, backward(model, pass, std::move(grad))};
}

LossAndGradients imitation_loss(const MlpModel& model, const Matrix& target_probs,
                                const Matrix& inputs, std::span<const int> labels,
                                WeightStrategy strategy) {
  const ForwardPass pass = forward_with_cache(model, inputs);
  const Index n = inputs.rows();
  const int c = model.num_classes();
  check_labels(labels, n, c);
  check_probability_rows(target_probs, n, c);
  if (n == 0) throw DomainError("empty batch");

  const Matrix logp = log_softmax_rows(pass.scores);
  const Matrix target_log = clamped_log(target_probs);
  Matrix grad(n, c);
  double loss = 0.0;
  Vector g(c);
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const Vector w =
        class_weights(c, y, top_incorrect_class(target_probs.row(i), y), strategy);
    for (Index k = 0; k < c; ++k) {
      const bool active = logp(i, k) >= kLogEpsilon;
      const double diff = (active ? logp(i, k) : kLogEpsilon) - target_log(i, k);
      loss += w(k) * diff * diff;
      g(k) = active ? 2.0 * w(k) * diff : 0.0;
    }
    // d log p_k / d z_j = [k == j] - p_j
    grad.row(i) = g.transpose() - logp.row(i).array().exp().matrix() * g.sum();
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  grad *= inv_n;
  return {loss * inv_n, backward(model, pass, std::move(grad))};
}

LossAndGradients kl_distill_loss(const MlpModel& model, const Matrix& target_probs,
                                 const Matrix& inputs) {
  const ForwardPass pass = forward_with_cache(model, inputs);
  const Index n = inputs.rows();
  const int c = model.num_classes();
  check_probability_rows(target_probs, n, c);
  if (n == 0) throw DomainError("empty batch");

  const Matrix logp = log_softmax_rows(pass.scores);
  const Matrix target_log = clamped_log(target_probs);
  Matrix grad(n, c);
  double loss = 0.0;
  Vector g(c);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < c; ++k) {
      const double t = target_probs(i, k);
      const bool active = logp(i, k) >= kLogEpsilon;
      loss += t * (target_log(i, k) - (active ? logp(i, k) : kLogEpsilon));
      g(k) = active ? -t : 0.0;
    }
    grad.row(i) = g.transpose() - logp.row(i).array().exp().matrix() * g.sum();
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  grad *= inv_n;
  return {loss * inv_n, backward(model, pass, std::move(grad))};
}

void TrainConfig::validate() const {
  if (epochs < 1) throw DomainError("epochs must be positive");
  if (batch_size <= 0) throw DomainError("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw DomainError("learning_rate must be a finite non-negative number");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
    throw DomainError("weight_decay must be non-negative");
}

double TrainConfig::rate_at(int epoch) const {
  if (schedule == Schedule::kConstant || epochs <= 0) return learning_rate;
  return 0.5 * learning_rate *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs)));
}

MlpModel sgd_train(MlpModel model, const Dataset& data, const Objective& objective,
                   const TrainConfig& config, TrainStats* stats) {
  config.validate();
  if (data.size() == 0) throw DomainError("cannot train on an empty dataset");
  data.validate();
  model.validate();
  if (data.dim() != model.input_dim())
    throw ShapeError("dataset width does not match model input");
  if (data.num_classes > model.num_classes())
    throw ShapeError("dataset has more classes than the model outputs");
  const bool needs_target = objective.kind != LossKind::kCrossEntropy;
  if (needs_target != (objective.target_probs != nullptr))
    throw DomainError("target probabilities must be given exactly for imitation and KL objectives");
  if (needs_target)
    check_probability_rows(*objective.target_probs, static_cast<Index>(data.size()),
                           model.num_classes());

  const std::size_t n = data.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(config.seed);

  ModelGradients velocity = ModelGradients::zeros_like(model);
  std::vector<int> batch_labels;
  if (stats) stats->epoch_loss.clear();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.rate_at(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const std::span<const Index> rows(order.data() + start, end - start);
      const Matrix x = data.features(rows, Eigen::all);
      batch_labels.resize(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        batch_labels[i] = data.labels[static_cast<std::size_t>(rows[i])];

      LossAndGradients lg;
      switch (objective.kind) {
        case LossKind::kCrossEntropy:
          lg = cross_entropy(model, x, batch_labels);
          break;
        case LossKind::kImitation:
          lg = imitation_loss(model, (*objective.target_probs)(rows, Eigen::all), x,
                              batch_labels, objective.weights);
          break;
        case LossKind::kKlDistill:
          lg = kl_distill_loss(model, (*objective.target_probs)(rows, Eigen::all), x);
          break;
      }
      epoch_loss += lg.loss;
      ++batches;

      for (std::size_t l = 0; l < model.num_layers(); ++l) {
        lg.gradients.weights[l] += config.weight_decay * model.weights[l];
        lg.gradients.biases[l] += config.weight_decay * model.biases[l];
        velocity.weights[l] = config.momentum * velocity.weights[l] + lg.gradients.weights[l];
        velocity.biases[l] = config.momentum * velocity.biases[l] + lg.gradients.biases[l];
        model.weights[l] -= lr * velocity.weights[l];
        model.biases[l] -= lr * velocity.biases[l];
      }
      if (stats) ++stats->steps;
    }
    if (!model.all_finite())
      throw DomainError("training diverged at epoch " + std::to_string(epoch) +
                        " (non-finite parameters)");
    if (stats) stats->epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return model;
}

double accuracy(const MlpModel& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const Matrix scores = forward(model, data.features);
  std::size_t correct = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    scores.row(i).maxCoeff(&best);
    if (best == data.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void write_model(const MlpModel& model, std::ostream& out) {
  model.validate();
  out << "mlp v1 " << to_string(model.activation);
  for (int d : model.layer_dims) out << ' ' << d;
  out << '\n';
  for_each_parameter_block(model, [&](const double* p, std::size_t count) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
  });
  if (!out) throw FormatError("failed to write model");
}

MlpModel read_model(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("model file is empty");
  std::istringstream hs(header);
  std::string magic, version, act;
  hs >> magic >> version >> act;
  if (magic != "mlp" || version != "v1") throw FormatError("not an 'mlp v1' model file");
  std::vector<int> dims;
  for (int d; hs >> d;) dims.push_back(d);
  if (!hs.eof()) throw FormatError("malformed model header");
  MlpModel model = MlpModel::zeros(std::move(dims), parse_activation(act));
  auto read_block = [&](double* p, std::size_t count) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
      throw FormatError("model file is truncated");
  };
  for (auto& w : model.weights) read_block(w.data(), static_cast<std::size_t>(w.size()));
  for (auto& b : model.biases) read_block(b.data(), static_cast<std::size_t>(b.size()));
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in model file");
  model.validate();
  return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_model(model, out);
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_model(in);
}

}  // namespace imia
