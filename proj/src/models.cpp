#include <algorithm>
#include <cmath>

#include "cogmac/error.hpp"
#include "cogmac/models.hpp"

namespace cogmac::models {

Features Scaler::apply(const Features& x) const {
  Features out{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) out[j] = (x[j] - mean[j]) / stddev[j];
  return out;
}

Scaler fit_scaler(const Dataset& dataset) {
  if (dataset.empty()) throw TrainingError("fit_scaler: empty dataset");
  Scaler s;
  const double n = static_cast<double>(dataset.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double sum = 0.0;
    for (const auto& sample : dataset.samples) sum += sample.features.values()[j];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& sample : dataset.samples) {
      const double dev = sample.features.values()[j] - mean;
      ss += dev * dev;
    }
    const double sd = std::sqrt(ss / n);
    s.mean[j] = mean;
    s.stddev[j] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
  }
  return s;
}

Features apply_scaler(const Scaler& scaler, const Features& x) { return scaler.apply(x); }

Eigen::MatrixXd scaled_matrix(const Dataset& dataset, const Scaler& scaler) {
  Eigen::MatrixXd x(kNumFeatures, static_cast<Eigen::Index>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Features f = scaler.apply(dataset.samples[i].features.values());
    for (std::size_t j = 0; j < kNumFeatures; ++j) x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = f[j];
  }
  return x;
}

Eigen::RowVectorXd label_row(const Dataset& dataset) {
  Eigen::RowVectorXd y(static_cast<Eigen::Index>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) y(static_cast<Eigen::Index>(i)) = dataset.samples[i].plr;
  return y;
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Tree: return "tree";
    case ModelKind::Mlp: return "mlp";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view token) {
  if (token == "linear") return ModelKind::Linear;
  if (token == "tree") return ModelKind::Tree;
  if (token == "mlp") return ModelKind::Mlp;
  throw SchemaError("unknown model kind '" + std::string(token) + "'");
}

ModelKind kind_of(const Model& model) { return static_cast<ModelKind>(model.index()); }

const TrainingMeta& meta_of(const Model& model) {
  return std::visit([](const auto& m) -> const TrainingMeta& { return m.meta; }, model);
}

double predict(const Model& model, const Features& x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("predict: non-finite feature value");
  }
  const double y = std::visit([&](const auto& m) { return raw_output(m, x); }, model);
  return std::clamp(y, 0.0, 1.0);
}

double predict(const Model& model, const FeatureVector& x) { return predict(model, x.values()); }

}  // namespace cogmac::models
