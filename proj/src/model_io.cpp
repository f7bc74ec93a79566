#include <filesystem>
#include <fstream>
#include <sstream>

#include "cogmac/error.hpp"
#include "cogmac/models.hpp"
#include "json_util.hpp"

namespace cogmac::models {

using nlohmann::json;
using detail::field;
using detail::require;

namespace {

constexpr std::string_view kSchemaVersion = "1";

json features_json(const Features& f) { return json::array({f[0], f[1], f[2], f[3]}); }

Features parse_features(const json& j, const std::string& path) {
  const auto v = detail::get_as<std::vector<double>>(j, path);
  if (v.size() != kNumFeatures) throw SchemaError("expected 4 values at '" + path + "'");
  return {v[0], v[1], v[2], v[3]};
}

json scaler_json(const Scaler& s) { return {{"mean", features_json(s.mean)}, {"stddev", features_json(s.stddev)}}; }

Scaler parse_scaler(const json& j) {
  detail::reject_unknown(j, {"mean", "stddev"}, "scaler");
  Scaler s;
  s.mean = parse_features(require(j, "mean", "scaler"), "scaler.mean");
  s.stddev = parse_features(require(j, "stddev", "scaler"), "scaler.stddev");
  for (double sd : s.stddev) {
    if (!(sd > 0.0)) throw SchemaError("non-positive entry at 'scaler.stddev'");
  }
  return s;
}

json meta_json(const TrainingMeta& m) {
  return {{"final_loss", m.final_loss}, {"iterations", m.iterations}, {"seed", m.seed}, {"interval_s", m.interval_s}};
}

TrainingMeta parse_meta(const json& j) {
  const std::string p = "training_meta";
  detail::reject_unknown(j, {"final_loss", "iterations", "seed", "interval_s"}, p);
  TrainingMeta m;
  m.final_loss = field<double>(j, "final_loss", p);
  m.iterations = field<int>(j, "iterations", p);
  m.seed = field<std::uint64_t>(j, "seed", p);
  m.interval_s = field<double>(j, "interval_s", p);
  return m;
}

json matrix_json(const Eigen::MatrixXd& w) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& path, int rows, int cols) {
  const auto v = detail::get_as<std::vector<std::vector<double>>>(j, path);
  if (static_cast<int>(v.size()) != rows) throw SchemaError("wrong row count at '" + path + "'");
  Eigen::MatrixXd w(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(v[static_cast<std::size_t>(r)].size()) != cols) {
      throw SchemaError("wrong column count at '" + path + "[" + std::to_string(r) + "]'");
    }
    for (int c = 0; c < cols; ++c) w(r, c) = v[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return w;
}

json to_document(const LinearModel& m) {
  return {{"kind", "linear"},
          {"hyperparams", {{"ridge_lambda", m.ridge_lambda}, {"auto_ridge", m.auto_ridge}}},
          {"scaler", scaler_json(m.scaler)},
          {"parameters", {{"weights", features_json(m.weights)}, {"bias", m.bias}}},
          {"training_meta", meta_json(m.meta)}};
}

json to_document(const TreeModel& m) {
  json nodes = json::array();
  for (const TreeNode& n : m.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"value", n.value},
                     {"left", n.left},
                     {"right", n.right},
                     {"samples", n.samples}});
  }
  return {{"kind", "tree"},
          {"hyperparams", {{"max_depth", m.max_depth}, {"min_samples_leaf", m.min_samples_leaf}}},
          {"scaler", nullptr},
          {"parameters", {{"nodes", std::move(nodes)}}},
          {"training_meta", meta_json(m.meta)}};
}

json to_document(const MlpModel& m) {
  const auto& hp = m.hyperparams;
  json layers = json::array();
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    layers.push_back({{"weights", matrix_json(m.weights[l])},
                      {"biases", std::vector<double>(m.biases[l].data(), m.biases[l].data() + m.biases[l].size())}});
  }
  return {{"kind", "mlp"},
          {"hyperparams",
           {{"hidden_layers", hp.hidden_layers},
            {"units_per_hidden", hp.units_per_hidden},
            {"iterations", hp.iterations},
            {"learning_rate", hp.learning_rate},
            {"init_seed", hp.init_seed}}},
          {"scaler", scaler_json(m.scaler)},
          {"parameters", {{"layer_sizes", m.layer_sizes}, {"layers", std::move(layers)}, {"loss_history", m.loss_history}}},
          {"training_meta", meta_json(m.meta)}};
}

LinearModel parse_linear(const json& doc) {
  LinearModel m;
  const json& hp = require(doc, "hyperparams", "");
  detail::reject_unknown(hp, {"ridge_lambda", "auto_ridge"}, "hyperparams");
  m.ridge_lambda = field<double>(hp, "ridge_lambda", "hyperparams");
  m.auto_ridge = field<bool>(hp, "auto_ridge", "hyperparams");
  m.scaler = parse_scaler(require(doc, "scaler", ""));
  const json& p = require(doc, "parameters", "");
  detail::reject_unknown(p, {"weights", "bias"}, "parameters");
  m.weights = parse_features(require(p, "weights", "parameters"), "parameters.weights");
  m.bias = field<double>(p, "bias", "parameters");
  return m;
}

TreeModel parse_tree(const json& doc) {
  TreeModel m;
  const json& hp = require(doc, "hyperparams", "");
  detail::reject_unknown(hp, {"max_depth", "min_samples_leaf"}, "hyperparams");
  m.max_depth = field<int>(hp, "max_depth", "hyperparams");
  m.min_samples_leaf = field<int>(hp, "min_samples_leaf", "hyperparams");
  const json& p = require(doc, "parameters", "");
  detail::reject_unknown(p, {"nodes"}, "parameters");
  const json& nodes = require(p, "nodes", "parameters");
  if (!nodes.is_array() || nodes.empty()) throw SchemaError("expected nonempty array at 'parameters.nodes'");
  const int count = static_cast<int>(nodes.size());
  for (int i = 0; i < count; ++i) {
    const std::string path = "parameters.nodes[" + std::to_string(i) + "]";
    const json& n = nodes[static_cast<std::size_t>(i)];
    detail::reject_unknown(n, {"feature", "threshold", "value", "left", "right", "samples"}, path);
    TreeNode t;
    t.feature = field<int>(n, "feature", path);
    t.threshold = field<double>(n, "threshold", path);
    t.value = field<double>(n, "value", path);
    t.left = field<int>(n, "left", path);
    t.right = field<int>(n, "right", path);
    t.samples = field<int>(n, "samples", path);
    if (t.feature >= static_cast<int>(kNumFeatures)) throw SchemaError("feature index out of range at '" + path + "'");
    // Children are stored after their parent, which also rules out cycles.
    if (!t.is_leaf() && (t.left <= i || t.right <= i || t.left >= count || t.right >= count)) {
      throw SchemaError("bad child index at '" + path + "'");
    }
    m.nodes.push_back(t);
  }
  return m;
}

MlpModel parse_mlp(const json& doc) {
  MlpModel m;
  const json& hp = require(doc, "hyperparams", "");
  detail::reject_unknown(hp, {"hidden_layers", "units_per_hidden", "iterations", "learning_rate", "init_seed"},
                         "hyperparams");
  m.hyperparams.hidden_layers = field<int>(hp, "hidden_layers", "hyperparams");
  m.hyperparams.units_per_hidden = field<int>(hp, "units_per_hidden", "hyperparams");
  m.hyperparams.iterations = field<int>(hp, "iterations", "hyperparams");
  m.hyperparams.learning_rate = field<double>(hp, "learning_rate", "hyperparams");
  m.hyperparams.init_seed = field<std::uint64_t>(hp, "init_seed", "hyperparams");
  m.scaler = parse_scaler(require(doc, "scaler", ""));

  const json& p = require(doc, "parameters", "");
  detail::reject_unknown(p, {"layer_sizes", "layers", "loss_history"}, "parameters");
  m.layer_sizes = field<std::vector<int>>(p, "layer_sizes", "parameters");
  if (m.layer_sizes.size() < 2 || m.layer_sizes.front() != static_cast<int>(kNumFeatures) || m.layer_sizes.back() != 1) {
    throw SchemaError("layer sizes must run from 4 to 1 at 'parameters.layer_sizes'");
  }
  for (int s : m.layer_sizes) {
    if (s < 1) throw SchemaError("non-positive size at 'parameters.layer_sizes'");
  }
  const json& layers = require(p, "layers", "parameters");
  if (!layers.is_array() || layers.size() + 1 != m.layer_sizes.size()) {
    throw SchemaError("layer count does not match layer_sizes at 'parameters.layers'");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string path = "parameters.layers[" + std::to_string(l) + "]";
    detail::reject_unknown(layers[l], {"weights", "biases"}, path);
    const int in = m.layer_sizes[l];
    const int out = m.layer_sizes[l + 1];
    m.weights.push_back(parse_matrix(require(layers[l], "weights", path), path + ".weights", out, in));
    const auto b = field<std::vector<double>>(layers[l], "biases", path);
    if (static_cast<int>(b.size()) != out) throw SchemaError("wrong size at '" + path + ".biases'");
    m.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), out));
  }
  m.loss_history = field<std::vector<double>>(p, "loss_history", "parameters");
  return m;
}

}  // namespace

std::string model_to_json(const Model& model) {
  json doc = std::visit([](const auto& m) { return to_document(m); }, model);
  doc["schema_version"] = kSchemaVersion;
  return doc.dump(1);
}

Model model_from_json(std::string_view text) {
  const json doc = detail::parse_json(text, "model file");
  if (!doc.is_object()) throw SchemaError("model file: expected a JSON object");
  detail::reject_unknown(doc, {"schema_version", "kind", "hyperparams", "scaler", "parameters", "training_meta"}, "");
  const auto version = field<std::string>(doc, "schema_version", "");
  if (version != kSchemaVersion) throw SchemaError("unsupported schema_version '" + version + "'");
  const auto kind_token = field<std::string>(doc, "kind", "");
  ModelKind kind;
  try {
    kind = parse_model_kind(kind_token);
  } catch (const SchemaError&) {
    throw SchemaError("unknown model kind '" + kind_token + "' at 'kind'");
  }
  const TrainingMeta meta = parse_meta(require(doc, "training_meta", ""));
  switch (kind) {
    case ModelKind::Linear: {
      auto m = parse_linear(doc);
      m.meta = meta;
      return m;
    }
    case ModelKind::Tree: {
      auto m = parse_tree(doc);
      m.meta = meta;
      return m;
    }
    case ModelKind::Mlp: {
      auto m = parse_mlp(doc);
      m.meta = meta;
      return m;
    }
  }
  throw SchemaError("unreachable model kind");
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write model file " + tmp.string());
    out << model_to_json(model) << '\n';
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace cogmac::models
