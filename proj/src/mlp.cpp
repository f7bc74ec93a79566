#include <cmath>
#include <string>

#include "cogmac/error.hpp"
#include "cogmac/models.hpp"
#include "cogmac/rng.hpp"

namespace cogmac::models {

void validate(const MlpHyperparams& hp) {
  if (hp.hidden_layers < 1) throw TrainingError("mlp: hidden_layers must be positive");
  if (hp.units_per_hidden < 1) throw TrainingError("mlp: units_per_hidden must be positive");
  if (hp.iterations < 1) throw TrainingError("mlp: iterations must be positive");
  if (!(hp.learning_rate > 0.0) || !std::isfinite(hp.learning_rate)) {
    throw TrainingError("mlp: learning_rate must be positive");
  }
}

MlpModel MlpModel::initialize(std::vector<int> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2 || layer_sizes.front() != static_cast<int>(kNumFeatures) || layer_sizes.back() != 1) {
    throw ContractViolation("mlp: layer sizes must run from 4 inputs to 1 output");
  }
  MlpModel m;
  m.layer_sizes = std::move(layer_sizes);
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const int fan_in = m.layer_sizes[l];
    const int fan_out = m.layer_sizes[l + 1];
    if (fan_out < 1) throw ContractViolation("mlp: empty layer");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    // Row-major draw order keeps the sequence independent of Eigen's storage.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-limit, limit);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  m.meta.seed = seed;
  return m;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

Eigen::RowVectorXd MlpModel::forward(const Eigen::MatrixXd& scaled_inputs) const {
  Eigen::MatrixXd a = scaled_inputs;
  const std::size_t last = weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Eigen::MatrixXd z = weights[l] * a;
    z.colwise() += biases[l];
    a = l == last ? std::move(z) : Eigen::MatrixXd(z.array().tanh());
  }
  return a.row(0);
}

bool operator==(const MlpModel& a, const MlpModel& b) {
  if (a.layer_sizes != b.layer_sizes || !(a.hyperparams == b.hyperparams) || !(a.scaler == b.scaler) ||
      !(a.meta == b.meta) || a.loss_history != b.loss_history || a.weights.size() != b.weights.size()) {
    return false;
  }
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

double raw_output(const MlpModel& m, const Features& x) {
  if (m.weights.empty()) throw ContractViolation("predict: untrained network");
  const Features z = m.scaler.apply(x);
  Eigen::MatrixXd col(kNumFeatures, 1);
  for (std::size_t j = 0; j < kNumFeatures; ++j) col(static_cast<Eigen::Index>(j), 0) = z[j];
  return m.forward(col)(0);
}

namespace {

// Forward pass keeping every activation, then backpropagation of
// L = mean((yhat - y)^2). activations[0] is the input.
MlpGradients backprop(const MlpModel& m, const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y) {
  const std::size_t layers = m.weights.size();
  std::vector<Eigen::MatrixXd> act(layers + 1);
  act[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = m.weights[l] * act[l];
    z.colwise() += m.biases[l];
    act[l + 1] = l + 1 == layers ? std::move(z) : Eigen::MatrixXd(z.array().tanh());
  }

  const double n = static_cast<double>(x.cols());
  const Eigen::RowVectorXd residual = act[layers].row(0) - y;
  MlpGradients g;
  g.loss = residual.squaredNorm() / n;
  g.weights.resize(layers);
  g.biases.resize(layers);

  Eigen::MatrixXd delta = (2.0 / n) * residual;  // dL/dz at the output
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l] = delta * act[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (m.weights[l].transpose() * delta).array() * (1.0 - act[l].array().square());
    }
  }
  return g;
}

}  // namespace

MlpGradients mlp_gradients(const MlpModel& model, const Dataset& batch) {
  if (batch.empty()) throw ContractViolation("mlp_gradients: empty batch");
  return backprop(model, scaled_matrix(batch, model.scaler), label_row(batch));
}

MlpModel train_mlp(const Dataset& dataset, const MlpHyperparams& hp) {
  if (dataset.empty()) throw TrainingError("train_mlp: empty dataset");
  validate(hp);

  std::vector<int> sizes{static_cast<int>(kNumFeatures)};
  for (int l = 0; l < hp.hidden_layers; ++l) sizes.push_back(hp.units_per_hidden);
  sizes.push_back(1);

  MlpModel m = MlpModel::initialize(std::move(sizes), hp.init_seed);
  m.hyperparams = hp;
  m.scaler = fit_scaler(dataset);
  const Eigen::MatrixXd x = scaled_matrix(dataset, m.scaler);
  const Eigen::RowVectorXd y = label_row(dataset);

  m.loss_history.reserve(static_cast<std::size_t>(hp.iterations) + 1);
  for (int it = 0; it < hp.iterations; ++it) {
    const MlpGradients g = backprop(m, x, y);
    if (!std::isfinite(g.loss)) {
      throw DivergenceError(it, "train_mlp: loss became non-finite at iteration " + std::to_string(it));
    }
    m.loss_history.push_back(g.loss);
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      m.weights[l] -= hp.learning_rate * g.weights[l];
      m.biases[l] -= hp.learning_rate * g.biases[l];
    }
  }
  const double final_loss = (m.forward(x) - y).squaredNorm() / static_cast<double>(x.cols());
  if (!std::isfinite(final_loss)) {
    throw DivergenceError(hp.iterations, "train_mlp: loss became non-finite at iteration " +
                                             std::to_string(hp.iterations));
  }
  m.loss_history.push_back(final_loss);
  m.meta.final_loss = final_loss;
  m.meta.iterations = hp.iterations;
  m.meta.seed = hp.init_seed;
  m.meta.interval_s = dataset.interval_s;
  return m;
}

}  // namespace cogmac::models
