#include <algorithm>
#include <cmath>

#include "cogmac/error.hpp"
#include "cogmac/models.hpp"

namespace cogmac::models {

namespace {

constexpr double kAutoRidge = 1e-8;

// LDLT pivots below this fraction of the largest pivot mark a singular system.
constexpr double kSingularPivot = 1e-10;

bool solve_ridge(const Eigen::Matrix4d& gram, const Eigen::Vector4d& rhs, double lambda,
                 Eigen::Vector4d& out) {
  const Eigen::Matrix4d a = gram + lambda * Eigen::Matrix4d::Identity();
  const Eigen::LDLT<Eigen::Matrix4d> ldlt(a);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::Vector4d d = ldlt.vectorD().cwiseAbs();
  if (d.maxCoeff() <= 0.0 || d.minCoeff() <= kSingularPivot * d.maxCoeff()) return false;
  out = ldlt.solve(rhs);
  return out.allFinite();
}

}  // namespace

std::pair<Features, double> LinearModel::raw_coefficients() const {
  Features w{};
  double b = bias;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    w[j] = weights[j] / scaler.stddev[j];
    b -= w[j] * scaler.mean[j];
  }
  return {w, b};
}

double raw_output(const LinearModel& m, const Features& x) {
  const Features z = m.scaler.apply(x);
  double y = m.bias;
  for (std::size_t j = 0; j < kNumFeatures; ++j) y += m.weights[j] * z[j];
  return y;
}

LinearModel train_linear(const Dataset& dataset, double ridge_lambda) {
  if (dataset.size() < 2) throw TrainingError("train_linear: need at least 2 samples");
  if (!(ridge_lambda >= 0.0)) throw TrainingError("train_linear: ridge_lambda must be >= 0");

  LinearModel m;
  m.scaler = fit_scaler(dataset);
  const Eigen::MatrixXd x = scaled_matrix(dataset, m.scaler);  // 4 x n
  const Eigen::RowVectorXd y = label_row(dataset);
  const double y_mean = y.mean();

  // Standardized features are centred, so the unpenalized intercept is the
  // label mean and the weights solve the centred normal equations.
  const Eigen::Matrix4d gram = x * x.transpose();
  const Eigen::Vector4d rhs = x * (y.array() - y_mean).matrix().transpose();

  Eigen::Vector4d w;
  double lambda = ridge_lambda;
  if (!solve_ridge(gram, rhs, lambda, w)) {
    lambda = std::max(lambda, kAutoRidge);
    m.auto_ridge = true;
    if (!solve_ridge(gram, rhs, lambda, w)) {
      // Degenerate beyond what the ridge floor repairs: complete orthogonal
      // decomposition gives the minimum-norm least-squares solution.
      w = (gram + lambda * Eigen::Matrix4d::Identity()).completeOrthogonalDecomposition().solve(rhs);
    }
  }
  for (std::size_t j = 0; j < kNumFeatures; ++j) m.weights[j] = w(static_cast<Eigen::Index>(j));
  m.bias = y_mean;
  m.ridge_lambda = lambda;

  double sse = 0.0;
  for (const auto& s : dataset.samples) {
    const double r = raw_output(m, s.features.values()) - s.plr;
    sse += r * r;
  }
  m.meta.final_loss = sse / static_cast<double>(dataset.size());
  m.meta.interval_s = dataset.interval_s;
  for (double v : w) {
    if (!std::isfinite(v)) throw TrainingError("train_linear: non-finite solution");
  }
  return m;
}

}  // namespace cogmac::models
