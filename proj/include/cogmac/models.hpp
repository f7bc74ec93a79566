#pragma once

// Packet-loss-rate regressors: ordinary/ridge least squares, a CART
// regression tree and a tanh multilayer perceptron trained by full-batch
// gradient descent. All predictions are clamped to [0, 1].

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cogmac/features.hpp"

namespace cogmac::models {

using features::Dataset;
using features::FeatureVector;
using features::kNumFeatures;
using Features = std::array<double, kNumFeatures>;

/// Per-feature standardization with population statistics. Zero-variance
/// features keep stddev 1, so they are only centred.
struct Scaler {
  Features mean{};
  Features stddev{1.0, 1.0, 1.0, 1.0};

  static Scaler identity() { return {}; }
  Features apply(const Features& x) const;
  bool operator==(const Scaler&) const = default;
};

Scaler fit_scaler(const Dataset& dataset);
Features apply_scaler(const Scaler& scaler, const Features& x);

struct TrainingMeta {
  double final_loss = 0.0;  // training MSE
  int iterations = 0;
  std::uint64_t seed = 0;
  double interval_s = 0.0;  // observation interval of the training data
  bool operator==(const TrainingMeta&) const = default;
};

struct LinearModel {
  Features weights{};  // on standardized features
  double bias = 0.0;
  double ridge_lambda = 0.0;
  bool auto_ridge = false;  // lambda escalated because the system was singular
  Scaler scaler;
  TrainingMeta meta;

  /// Weights and bias expressed on the raw (unscaled) features.
  std::pair<Features, double> raw_coefficients() const;
  bool operator==(const LinearModel&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;   // x[feature] <  threshold
  int right = -1;  // x[feature] >= threshold
  int samples = 0;
  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int max_depth = 8;
  int min_samples_leaf = 5;
  TrainingMeta meta;

  int depth() const;
  int leaf_count() const;
  bool operator==(const TreeModel&) const = default;
};

struct MlpHyperparams {
  int hidden_layers = 10;
  int units_per_hidden = 10;
  int iterations = 2000;
  double learning_rate = 0.1;
  std::uint64_t init_seed = 42;
  bool operator==(const MlpHyperparams&) const = default;
};

void validate(const MlpHyperparams& hp);

struct MlpModel {
  std::vector<int> layer_sizes;           // {4, hidden..., 1}
  std::vector<Eigen::MatrixXd> weights;   // weights[l] is (out x in)
  std::vector<Eigen::VectorXd> biases;
  MlpHyperparams hyperparams;
  Scaler scaler;
  std::vector<double> loss_history;  // iterations + 1 entries after training
  TrainingMeta meta;

  /// Glorot-uniform weights drawn from `seed`, zero biases. Hidden layers use
  /// tanh, the output is linear. `layer_sizes` may have no hidden layer.
  static MlpModel initialize(std::vector<int> layer_sizes, std::uint64_t seed);

  std::size_t parameter_count() const;
  /// Unclamped network output for already-scaled inputs, one column per sample.
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& scaled_inputs) const;
};

bool operator==(const MlpModel& a, const MlpModel& b);

using Model = std::variant<LinearModel, TreeModel, MlpModel>;

enum class ModelKind { Linear, Tree, Mlp };
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view token);
ModelKind kind_of(const Model& model);
const TrainingMeta& meta_of(const Model& model);

/// Closed-form least squares on standardized features. lambda = 0 escalates
/// to 1e-8 when the normal equations are singular.
LinearModel train_linear(const Dataset& dataset, double ridge_lambda = 0.0);

/// Greedy CART on raw features with variance-reduction splits at midpoints
/// between consecutive distinct values.
TreeModel train_tree(const Dataset& dataset, int max_depth = 8, int min_samples_leaf = 5);

/// Throws DivergenceError if the loss becomes non-finite.
MlpModel train_mlp(const Dataset& dataset, const MlpHyperparams& hp = {});

double predict(const Model& model, const FeatureVector& x);
double predict(const Model& model, const Features& x);

// Model-specific unclamped outputs.
double raw_output(const LinearModel& model, const Features& x);
double raw_output(const TreeModel& model, const Features& x);
double raw_output(const MlpModel& model, const Features& x);

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;
};

/// Backpropagated gradient of the batch MSE with respect to every parameter.
/// The model's scaler is applied to the batch features first.
MlpGradients mlp_gradients(const MlpModel& model, const Dataset& batch);

/// Scaled feature matrix (4 x n) and label row vector of a dataset.
Eigen::MatrixXd scaled_matrix(const Dataset& dataset, const Scaler& scaler);
Eigen::RowVectorXd label_row(const Dataset& dataset);

// --- persistence (schema version "1") ---------------------------------------

std::string model_to_json(const Model& model);
Model model_from_json(std::string_view text);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace cogmac::models
