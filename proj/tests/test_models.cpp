#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cogmac/error.hpp"
#include "cogmac/models.hpp"
#include "oracles.hpp"

using namespace cogmac;
using namespace cogmac::models;
using namespace cogmac::testing;

namespace {

double training_rmse(const Model& m, const Dataset& ds) {
  double sse = 0.0;
  for (const auto& s : ds.samples) {
    const double r = std::visit([&](const auto& mm) { return raw_output(mm, s.features.values()); }, m) - s.plr;
    sse += r * r;
  }
  return std::sqrt(sse / static_cast<double>(ds.size()));
}

Dataset full_rank_linear(double (*target)(const Features&)) {
  std::vector<FeatureVector> xs;
  std::vector<double> ys;
  for (int d = 1; d <= 5; ++d) {
    for (int k = 0; k < 4; ++k) {
      const double ipi = 0.125 * (k + 1) + 0.01 * d;
      FeatureVector f{d, ipi, d * d + 3 * k * k, (d * k) % 5};
      xs.push_back(f);
      ys.push_back(target(f.values()));
    }
  }
  return make_dataset(xs, ys);
}

}  // namespace

TEST_CASE("scaler") {
  const auto ds = make_dataset({{1, 5.0, 0, 0}, {2, 5.0, 0, 0}, {3, 5.0, 0, 0}}, {0, 0, 0});
  const Scaler s = fit_scaler(ds);
  CHECK(s.mean[0] == doctest::Approx(2.0));
  CHECK(s.stddev[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s.stddev[0] == doctest::Approx(0.8165).epsilon(1e-4));
  CHECK(s.stddev[1] == 1.0);
  CHECK(apply_scaler(s, {1, 5, 0, 0})[0] == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(apply_scaler(s, {2, 5, 0, 0})[0] == doctest::Approx(0.0));
  CHECK(apply_scaler(s, {3, 5, 0, 0})[0] == doctest::Approx(1.2247).epsilon(1e-4));
  for (double v : apply_scaler(s, s.mean)) CHECK(v == 0.0);
  CHECK(apply_scaler(s, {2, 5, 0, 0})[1] == 0.0);

  const Dataset random = random_dataset(3, 200);
  const Scaler r = fit_scaler(random);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double sum = 0.0, ss = 0.0;
    for (const auto& smp : random.samples) sum += r.apply(smp.features.values())[j];
    const double mean = sum / 200.0;
    for (const auto& smp : random.samples) ss += std::pow(r.apply(smp.features.values())[j] - mean, 2);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(ss / 200.0) - 1.0) < 1e-9);
  }

  CHECK_THROWS_AS(fit_scaler(Dataset{}), TrainingError);
}

TEST_CASE("linear regression recovers a noiseless target") {
  const Dataset ds = full_rank_linear([](const Features& x) { return 2 * x[0] + 3 * x[1] + 1; });
  const auto oracle = ols_normal_equations(ds);
  CHECK(oracle[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(oracle[1] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(oracle[4] == doctest::Approx(1.0).epsilon(1e-9));

  const LinearModel m = train_linear(ds);
  const auto [w, b] = m.raw_coefficients();
  CHECK(std::abs(w[0] - 2.0) < 1e-6);
  CHECK(std::abs(w[1] - 3.0) < 1e-6);
  CHECK(std::abs(w[2]) < 1e-6);
  CHECK(std::abs(w[3]) < 1e-6);
  CHECK(std::abs(b - 1.0) < 1e-6);
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(w[j] - oracle[j]) < 1e-6);
  CHECK_FALSE(m.auto_ridge);
  CHECK(m.meta.final_loss < 1e-20);
}

TEST_CASE("linear regression on constant labels") {
  const Dataset ds = full_rank_linear([](const Features&) { return 0.37; });
  const LinearModel m = train_linear(ds);
  for (double w : m.weights) CHECK(std::abs(w) < 1e-12);
  CHECK(m.bias == doctest::Approx(0.37));
}

TEST_CASE("linear regression with a duplicated feature column") {
  // rp duplicates d; the raw design is rank deficient.
  std::vector<FeatureVector> xs;
  std::vector<double> ys;
  Rng rng(5);
  for (int i = 0; i < 60; ++i) {
    const int d = 1 + static_cast<int>(rng.uniform_below(28));
    const double ipi = rng.uniform(0.02, 2.0);
    xs.push_back({d, ipi, d, static_cast<int>(rng.uniform_below(30))});
    ys.push_back(0.02 * d - 0.1 * ipi + 0.3 + 0.01 * rng.uniform01());
  }
  const Dataset ds = make_dataset(xs, ys);

  // Pseudo-inverse oracle (SVD of the augmented raw design).
  Eigen::MatrixXd a(60, 5);
  Eigen::VectorXd y(60);
  for (int i = 0; i < 60; ++i) {
    const auto f = xs[static_cast<std::size_t>(i)].values();
    a.row(i) << f[0], f[1], f[2], f[3], 1.0;
    y(i) = ys[static_cast<std::size_t>(i)];
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd pinv = svd.solve(y);
  const Eigen::VectorXd oracle_pred = a * pinv;

  for (double lambda : {0.0, 1e-8}) {
    const LinearModel m = train_linear(ds, lambda);
    CAPTURE(lambda);
    CHECK(m.ridge_lambda > 0.0);
    if (lambda == 0.0) CHECK(m.auto_ridge);
    for (double w : m.weights) CHECK(std::isfinite(w));
    for (int i = 0; i < 60; ++i) {
      CHECK(std::abs(raw_output(m, xs[static_cast<std::size_t>(i)].values()) - oracle_pred(i)) < 1e-6);
    }
  }
}

TEST_CASE("least squares optimality against perturbations") {
  const Dataset ds = random_dataset(11, 150);
  const LinearModel m = train_linear(ds);
  const auto [w, b] = m.raw_coefficients();
  const std::vector<double> best{w[0], w[1], w[2], w[3], b};
  const double best_mse = linear_mse(ds, best);
  CHECK(best_mse == doctest::Approx(m.meta.final_loss).epsilon(1e-9));
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> other = best;
    for (double& c : other) c += rng.uniform(-1e-3, 1e-3);
    CHECK(linear_mse(ds, other) >= best_mse);
  }
  CHECK_THROWS_AS(train_linear(make_dataset({{1, 1.0, 1, 1}}, {0.5})), TrainingError);
}

TEST_CASE("regression tree on a step in d") {
  std::vector<FeatureVector> xs;
  std::vector<double> ys;
  for (int d = 1; d <= 10; ++d) {
    xs.push_back({d, 1.0 + 0.1 * d, 50 - d, d % 3});
    ys.push_back(d < 5 ? 0.0 : 1.0);
  }
  const Dataset ds = make_dataset(xs, ys);

  // Exhaustive split search oracle: every feature, every midpoint.
  double best_sse = 1e300;
  int best_f = -1;
  double best_t = 0;
  for (int f = 0; f < 4; ++f) {
    std::vector<double> vals;
    for (const auto& x : xs) vals.push_back(x.values()[static_cast<std::size_t>(f)]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double t = (vals[k] + vals[k + 1]) / 2;
      double sl = 0, sr = 0, nl = 0, nr = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        (xs[i].values()[static_cast<std::size_t>(f)] < t ? sl : sr) += ys[i];
        (xs[i].values()[static_cast<std::size_t>(f)] < t ? nl : nr) += 1;
      }
      double sse = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const bool left = xs[i].values()[static_cast<std::size_t>(f)] < t;
        const double mean = left ? sl / nl : sr / nr;
        sse += (ys[i] - mean) * (ys[i] - mean);
      }
      if (sse < best_sse - 1e-12) {
        best_sse = sse;
        best_f = f;
        best_t = t;
      }
    }
  }
  REQUIRE(best_sse == 0.0);

  const TreeModel m = train_tree(ds, 3, 1);
  REQUIRE(m.nodes.size() == 3);
  CHECK(m.depth() == 1);
  CHECK(m.nodes[0].feature == best_f);
  CHECK(m.nodes[0].feature == 0);
  CHECK(m.nodes[0].threshold == best_t);
  CHECK(m.nodes[0].threshold == 4.5);
  CHECK(training_rmse(m, ds) == 0.0);

  const Model model = m;
  CHECK(predict(model, FeatureVector{2, 1.0, 0, 0}) == 0.0);
  CHECK(predict(model, FeatureVector{7, 1.0, 0, 0}) == 1.0);
}

TEST_CASE("regression tree edge cases") {
  const Dataset constant = full_rank_linear([](const Features&) { return 0.25; });
  const TreeModel leaf = train_tree(constant, 8, 1);
  CHECK(leaf.nodes.size() == 1);
  CHECK(leaf.depth() == 0);
  CHECK(leaf.nodes[0].value == 0.25);

  // d and rp identical: equal-gain splits resolve to the lower feature index.
  const Dataset dup = make_dataset({{1, 1.0, 1, 0}, {2, 1.0, 2, 0}, {3, 1.0, 3, 0}, {4, 1.0, 4, 0}}, {0, 0, 1, 1});
  const TreeModel t = train_tree(dup, 1, 1);
  CHECK(t.nodes[0].feature == 0);

  // Two equal-gain thresholds on one feature: the lower threshold wins.
  const Dataset sym = make_dataset({{1, 1.0, 0, 0}, {2, 1.0, 0, 0}, {3, 1.0, 0, 0}}, {0, 1, 0});
  const TreeModel s = train_tree(sym, 1, 1);
  CHECK(s.nodes[0].feature == 0);
  CHECK(s.nodes[0].threshold == 1.5);

  CHECK_THROWS_AS(train_tree(sym, 2, 5), TrainingError);

  // min_samples_leaf bounds every leaf.
  const Dataset random = random_dataset(21, 300);
  const TreeModel bounded = train_tree(random, 12, 20);
  for (const auto& n : bounded.nodes) {
    if (n.is_leaf()) CHECK(n.samples >= 20);
  }
  CHECK(bounded.depth() <= 12);
}

TEST_CASE("tree predictions are invariant to affine feature scaling") {
  const Dataset ds = random_dataset(31, 250);
  const double alpha[] = {2.0, 0.5, 4.0, 0.25};
  const double beta[] = {3.0, -1.0, 10.0, 0.0};
  // Map through the affine transform; integer features stay exactly representable.
  Dataset scaled = ds;
  std::vector<Features> transformed;
  for (auto& s : scaled.samples) {
    auto v = s.features.values();
    s.features.d = static_cast<int>(alpha[0] * v[0] + beta[0]);
    s.features.ipi_s = alpha[1] * v[1] + beta[1];
    s.features.rp = static_cast<int>(alpha[2] * v[2] + beta[2]);
    s.features.errp = static_cast<int>(alpha[3] * v[3] + beta[3]);
  }
  // errp * 0.25 truncates; use only features that map exactly.
  for (std::size_t i = 0; i < ds.size(); ++i) scaled.samples[i].features.errp = ds.samples[i].features.errp;

  const TreeModel a = train_tree(ds, 6, 3);
  const TreeModel b = train_tree(scaled, 6, 3);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    CHECK(a.nodes[k].feature == b.nodes[k].feature);
    CHECK(a.nodes[k].value == b.nodes[k].value);
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(raw_output(a, ds.samples[i].features.values()) == raw_output(b, scaled.samples[i].features.values()));
  }
}

TEST_CASE("mlp learns a constant") {
  const Dataset ds = full_rank_linear([](const Features&) { return 0.42; });
  const MlpModel m = train_mlp(ds);
  CHECK(m.layer_sizes.size() == 12);
  // The output bias reaches c quickly; the input-dependent part left by the
  // random initialization decays slowly under plain gradient descent.
  double mean = 0.0;
  for (const auto& s : ds.samples) {
    const double p = raw_output(m, s.features.values());
    CHECK(std::abs(p - 0.42) < 2e-2);
    mean += p;
  }
  CHECK(std::abs(mean / static_cast<double>(ds.size()) - 0.42) < 1e-3);
  CHECK(m.loss_history.size() == 2001);
  CHECK(m.meta.final_loss <= m.loss_history.front());
}

TEST_CASE("mlp separates an XOR-like target that linear regression cannot") {
  const Dataset ds = xor_dataset();
  REQUIRE(ds.size() == 36);
  const auto oracle = ols_normal_equations(ds);  // rp/errp constant: their columns are dropped
  (void)oracle;
  const LinearModel lin = train_linear(ds);
  const double lin_rmse = training_rmse(lin, ds);
  CHECK(lin_rmse > 0.3);

  const MlpModel mlp = train_mlp(ds);
  const double mlp_rmse = training_rmse(mlp, ds);
  MESSAGE("xor: linear rmse " << lin_rmse << ", mlp rmse " << mlp_rmse);
  CHECK(mlp_rmse < 0.05);
  CHECK(mlp.loss_history.back() <= mlp.loss_history.front());
}

TEST_CASE("mlp determinism and errors") {
  const Dataset ds = random_dataset(41, 40);
  MlpHyperparams hp;
  hp.hidden_layers = 2;
  hp.iterations = 200;
  const MlpModel a = train_mlp(ds, hp);
  const MlpModel b = train_mlp(ds, hp);
  CHECK(a == b);
  hp.init_seed = 43;
  CHECK_FALSE(a == train_mlp(ds, hp));

  MlpHyperparams bad;
  bad.hidden_layers = 0;
  CHECK_THROWS_AS(train_mlp(ds, bad), TrainingError);
  bad = {};
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train_mlp(ds, bad), TrainingError);
  CHECK_THROWS_AS(train_mlp(Dataset{}, {}), TrainingError);

  MlpHyperparams wild;
  wild.hidden_layers = 1;
  wild.units_per_hidden = 50;
  wild.learning_rate = 50.0;
  wild.iterations = 500;
  // Raw features with large ranges make the step blow up.
  try {
    train_mlp(full_rank_linear([](const Features& x) { return 100 * x[2]; }), wild);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    CHECK(e.iteration() >= 0);
  }
}

TEST_CASE("mlp gradients") {
  SUBCASE("zero network, zero data") {
    MlpModel m = MlpModel::initialize({4, 10, 10, 1}, 1);
    for (auto& w : m.weights) w.setZero();
    const Dataset zeros = make_dataset({{0, 0.0, 0, 0}, {0, 0.0, 0, 0}}, {0.0, 0.0});
    const auto g = mlp_gradients(m, zeros);
    for (const auto& w : g.weights) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& b : g.biases) CHECK(b.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("single linear neuron matches the regression gradient") {
    MlpModel m = MlpModel::initialize({4, 1}, 2);
    const Dataset ds = random_dataset(5, 25);
    const auto g = mlp_gradients(m, ds);
    Eigen::Vector4d expected = Eigen::Vector4d::Zero();
    double expected_b = 0.0;
    for (const auto& s : ds.samples) {
      const auto x = s.features.values();
      double yhat = m.biases[0](0);
      for (int j = 0; j < 4; ++j) yhat += m.weights[0](0, j) * x[static_cast<std::size_t>(j)];
      for (int j = 0; j < 4; ++j) expected(j) += 2.0 * (yhat - s.plr) * x[static_cast<std::size_t>(j)] / 25.0;
      expected_b += 2.0 * (yhat - s.plr) / 25.0;
    }
    for (int j = 0; j < 4; ++j) CHECK(g.weights[0](0, j) == doctest::Approx(expected(j)).epsilon(1e-12));
    CHECK(g.biases[0](0) == doctest::Approx(expected_b).epsilon(1e-12));
  }
  SUBCASE("finite differences") {
    for (const auto& sizes : {std::vector<int>{4, 10, 10, 10, 10, 10, 10, 10, 10, 10, 10, 1}, std::vector<int>{4, 10, 1}}) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        MlpModel m = MlpModel::initialize(sizes, seed);
        const Dataset batch = random_dataset(100 + seed, 16);
        m.scaler = fit_scaler(batch);
        const auto check = finite_difference_check(m, batch, 1e-5, 1e-8);
        CAPTURE(seed);
        CAPTURE(sizes.size());
        CHECK(check.checked == m.parameter_count());
        CHECK(check.max_rel_error < 1e-4);
      }
    }
  }
}

TEST_CASE("prediction clamping and input errors") {
  LinearModel flat;
  flat.bias = 0.3;
  CHECK(predict(Model{flat}, FeatureVector{5, 1.0, 3, 2}) == 0.3);
  flat.bias = -0.2;
  CHECK(predict(Model{flat}, FeatureVector{5, 1.0, 3, 2}) == 0.0);
  flat.bias = 1.7;
  CHECK(predict(Model{flat}, FeatureVector{5, 1.0, 3, 2}) == 1.0);
  CHECK_THROWS_AS(predict(Model{flat}, Features{1, std::nan(""), 0, 0}), InputError);
  CHECK_THROWS_AS(predict(Model{flat}, Features{1, INFINITY, 0, 0}), InputError);

  const Dataset ds = random_dataset(51, 80);
  MlpHyperparams hp;
  hp.hidden_layers = 1;
  hp.iterations = 300;
  const Model models[] = {train_linear(ds), train_tree(ds), train_mlp(ds, hp)};
  Rng rng(52);
  for (const auto& m : models) {
    for (int i = 0; i < 200; ++i) {
      const Features x{rng.uniform(-100, 100), rng.uniform(-10, 10), rng.uniform(-1000, 5000), rng.uniform(-50, 500)};
      const double p = predict(m, x);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
}

TEST_CASE("model files") {
  const Dataset ds = random_dataset(61, 120);
  MlpHyperparams hp;
  hp.hidden_layers = 2;
  hp.iterations = 100;
  const Model models[] = {train_linear(ds, 1e-4), train_tree(ds, 4, 5), train_mlp(ds, hp)};
  const auto dir = std::filesystem::temp_directory_path() / "cogmac_model_io";
  std::filesystem::create_directories(dir);
  Rng rng(62);
  for (const auto& m : models) {
    const auto path = dir / (std::string(to_string(kind_of(m))) + ".json");
    save_model(m, path);
    const Model back = load_model(path);
    CHECK(kind_of(back) == kind_of(m));
    CHECK(back == m);
    CHECK(meta_of(back).interval_s == 30.0);
    for (int i = 0; i < 100; ++i) {
      const Features x{rng.uniform(1, 28), rng.uniform(0.01, 2), rng.uniform(0, 500), rng.uniform(0, 50)};
      CHECK(predict(back, x) == predict(m, x));
    }
    const std::string text = model_to_json(m);
    CHECK_THROWS_AS(model_from_json(text.substr(0, text.size() / 2)), SchemaError);
  }

  std::string text = model_to_json(models[0]);
  const auto pos = text.find("\"linear\"");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 8, "\"forest\"");
  try {
    model_from_json(text);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("forest") != std::string::npos);
  }

  auto doc = nlohmann::json::parse(model_to_json(models[2]));
  doc["parameters"]["layers"][1]["biases"] = nlohmann::json::array({1.0});
  try {
    model_from_json(doc.dump());
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("parameters.layers[1].biases") != std::string::npos);
  }
  doc = nlohmann::json::parse(model_to_json(models[1]));
  doc["training_meta"].erase("seed");
  CHECK_THROWS_WITH_AS(model_from_json(doc.dump()), "missing field 'training_meta.seed'", SchemaError);
  CHECK_THROWS_AS(load_model(dir / "missing.json"), std::runtime_error);
}
