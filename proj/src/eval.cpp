#include "cogmac/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cogmac/error.hpp"
#include "cogmac/rng.hpp"

namespace cogmac::eval {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

double rmse(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw ContractViolation("rmse: length mismatch");
  if (y.empty()) throw ContractViolation("rmse: empty input");
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sse += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  return std::sqrt(sse / static_cast<double>(y.size()));
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k, std::uint64_t seed, SplitMode mode) {
  if (k < 2) throw ContractViolation("kfold_split: k must be at least 2");
  const auto folds = static_cast<std::size_t>(k);
  if (folds > n) {
    throw ContractViolation("kfold_split: k=" + std::to_string(k) + " exceeds sample count " + std::to_string(n));
  }
  std::vector<std::vector<std::size_t>> out(folds);
  if (mode == SplitMode::Contiguous) {
    for (std::size_t f = 0; f < folds; ++f) {
      for (std::size_t i = f * n / folds; i < (f + 1) * n / folds; ++i) out[f].push_back(i);
    }
    return out;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.uniform_below(i + 1)]);
  for (std::size_t p = 0; p < n; ++p) out[p % folds].push_back(order[p]);
  return out;
}

ModelKind kind_of(const ModelSpec& spec) {
  return std::visit(Overloaded{[](const LinearSpec&) { return ModelKind::Linear; },
                               [](const TreeSpec&) { return ModelKind::Tree; },
                               [](const models::MlpHyperparams&) { return ModelKind::Mlp; }},
                    spec);
}

std::string describe(const ModelSpec& spec) {
  return std::visit(
      Overloaded{[](const LinearSpec& s) { return "lambda=" + fmt("%g", s.ridge_lambda); },
                 [](const TreeSpec& s) {
                   return "depth=" + std::to_string(s.max_depth) + " min_leaf=" + std::to_string(s.min_samples_leaf);
                 },
                 [](const models::MlpHyperparams& s) {
                   return "layers=" + std::to_string(s.hidden_layers) + " units=" + std::to_string(s.units_per_hidden) +
                          " iters=" + std::to_string(s.iterations) + " lr=" + fmt("%g", s.learning_rate);
                 }},
      spec);
}

ModelSpec default_spec(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return LinearSpec{};
    case ModelKind::Tree: return TreeSpec{};
    case ModelKind::Mlp: return models::MlpHyperparams{};
  }
  throw ContractViolation("default_spec: unknown kind");
}

std::vector<ModelSpec> default_grid(ModelKind kind) {
  std::vector<ModelSpec> grid;
  switch (kind) {
    case ModelKind::Linear:
      for (double l : {0.0, 1e-4, 1e-2}) grid.push_back(LinearSpec{l});
      break;
    case ModelKind::Tree:
      for (int depth : {2, 4, 8, 12}) {
        for (int leaf : {1, 5, 20}) grid.push_back(TreeSpec{depth, leaf});
      }
      break;
    case ModelKind::Mlp:
      for (int layers : {1, 2, 10}) {
        for (int units : {10, 50}) {
          models::MlpHyperparams hp;
          hp.hidden_layers = layers;
          hp.units_per_hidden = units;
          grid.push_back(hp);
        }
      }
      break;
  }
  return grid;
}

Model train_model(const ModelSpec& spec, const Dataset& dataset, std::uint64_t seed) {
  return std::visit(Overloaded{[&](const LinearSpec& s) -> Model { return models::train_linear(dataset, s.ridge_lambda); },
                               [&](const TreeSpec& s) -> Model {
                                 return models::train_tree(dataset, s.max_depth, s.min_samples_leaf);
                               },
                               [&](models::MlpHyperparams hp) -> Model {
                                 hp.init_seed = seed;
                                 return models::train_mlp(dataset, hp);
                               }},
                    spec);
}

std::uint64_t fold_seed(std::uint64_t master, std::size_t fold, std::size_t grid_index) {
  return derive_seed(derive_seed(master, 0x10000 + grid_index), fold);
}

Model train_fold(const Dataset& dataset, const ModelSpec& spec, const std::vector<std::vector<std::size_t>>& folds,
                 std::size_t held_out, std::uint64_t seed) {
  std::vector<std::size_t> train_idx;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != held_out) train_idx.insert(train_idx.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  return train_model(spec, dataset.subset(train_idx), seed);
}

CvReport cross_validate(const Dataset& dataset, const ModelSpec& spec, int k, std::uint64_t seed,
                        std::size_t grid_index, SplitMode mode) {
  const auto folds = kfold_split(dataset.size(), k, seed, mode);
  CvReport report;
  report.spec = spec;
  report.k = k;
  report.interval_s = dataset.interval_s;
  report.mode = mode;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    Model model;
    try {
      model = train_fold(dataset, spec, folds, f, fold_seed(seed, f, grid_index));
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.iteration(), "fold " + std::to_string(f) + ": " + e.what());
    } catch (const TrainingError& e) {
      throw TrainingError("fold " + std::to_string(f) + ": " + e.what());
    }
    std::vector<double> y, y_hat;
    for (std::size_t i : folds[f]) {
      y.push_back(dataset.samples[i].plr);
      y_hat.push_back(models::predict(model, dataset.samples[i].features));
    }
    report.fold_rmses.push_back(rmse(y, y_hat));
  }
  const double n = static_cast<double>(report.fold_rmses.size());
  report.mean_rmse = std::accumulate(report.fold_rmses.begin(), report.fold_rmses.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : report.fold_rmses) ss += (r - report.mean_rmse) * (r - report.mean_rmse);
  report.std_rmse = std::sqrt(ss / n);
  return report;
}

GridResult grid_search(const Dataset& dataset, std::span<const ModelSpec> grid, int k, std::uint64_t seed) {
  if (grid.empty()) throw ContractViolation("grid_search: empty grid");
  GridResult result;
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    result.evaluated.push_back(cross_validate(dataset, grid[g], k, seed, g));
    if (result.evaluated[g].mean_rmse < result.evaluated[best].mean_rmse) best = g;
  }
  result.best = result.evaluated[best];
  return result;
}

std::vector<double> default_intervals() { return {5.0, 10.0, 15.0, 30.0, 60.0}; }

SweepReport sweep_intervals(const DatasetSource& source, std::span<const double> intervals,
                            std::span<const ModelKind> kinds, int k, std::uint64_t seed, const GridFor& grid_for) {
  if (intervals.empty()) throw ContractViolation("sweep_intervals: no intervals");
  SweepReport report;
  for (double interval : intervals) {
    if (!(interval > 0.0)) throw ContractViolation("sweep_intervals: interval must be positive");
    const Dataset ds = source(interval);
    for (ModelKind kind : kinds) {
      SweepRow row;
      row.interval_s = interval;
      row.model_kind = kind;
      row.samples = ds.size();
      if (ds.size() < static_cast<std::size_t>(std::max(k, 2))) {
        row.absent_reason = "insufficient windows";
      } else {
        const auto grid = grid_for(kind);
        const GridResult r = grid_search(ds, grid, k, seed);
        row.best = r.best.spec;
        row.mean_rmse = r.best.mean_rmse;
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

SweepReport sweep_intervals(const sim::Trace& trace, std::span<const double> intervals,
                            std::span<const ModelKind> kinds, int k, std::uint64_t seed, const GridFor& grid_for) {
  return sweep_intervals([&](double interval) { return features::build_dataset(trace, interval); }, intervals, kinds,
                         k, seed, grid_for);
}

TestReport evaluate_on_test(const Model& model, const Dataset& test) {
  if (test.empty()) throw ContractViolation("evaluate_on_test: empty test set");
  const double trained = models::meta_of(model).interval_s;
  if (std::abs(trained - test.interval_s) > 1e-9) {
    throw ContractViolation("evaluate_on_test: model trained at " + fmt("%g", trained) + " s windows, test set uses " +
                            fmt("%g", test.interval_s) + " s");
  }
  TestReport report;
  std::vector<double> y, y_hat;
  for (const auto& s : test.samples) {
    const double p = models::predict(model, s.features);
    report.rows.push_back({s.window_start_s, s.plr, p});
    y.push_back(s.plr);
    y_hat.push_back(p);
  }
  report.overall_rmse = rmse(y, y_hat);
  return report;
}

std::string_view to_string(SplitMode mode) { return mode == SplitMode::Shuffled ? "shuffled" : "contiguous"; }

void write_cv_csv(std::ostream& out, std::span<const CvReport> reports) {
  out << "model_kind,hyperparams,split,k,interval_s,mean_rmse,std_rmse,fold_rmses\n";
  for (const auto& r : reports) {
    out << models::to_string(r.model_kind()) << ',' << describe(r.spec) << ',' << to_string(r.mode) << ',' << r.k
        << ',' << fmt("%g", r.interval_s) << ',' << fmt("%.6f", r.mean_rmse) << ',' << fmt("%.6f", r.std_rmse) << ',';
    for (std::size_t i = 0; i < r.fold_rmses.size(); ++i) out << (i ? ";" : "") << fmt("%.6f", r.fold_rmses[i]);
    out << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << "interval_s,model_kind,hyperparams,mean_rmse,samples,status\n";
  for (const auto& r : report.rows) {
    out << fmt("%g", r.interval_s) << ',' << models::to_string(r.model_kind) << ','
        << (r.present() ? describe(*r.best) : "") << ',' << (r.present() ? fmt("%.6f", r.mean_rmse) : "") << ','
        << r.samples << ',' << (r.present() ? "ok" : r.absent_reason) << '\n';
  }
}

std::vector<std::filesystem::path> write_sweep_gnuplot(const std::filesystem::path& dir, const SweepReport& report) {
  std::filesystem::create_directories(dir);
  std::map<std::string, std::vector<const SweepRow*>> by_kind;
  for (const auto& r : report.rows) {
    if (r.present()) by_kind[std::string(models::to_string(r.model_kind))].push_back(&r);
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [kind, rows] : by_kind) {
    const auto path = dir / ("sweep_" + kind + ".dat");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# interval_s mean_rmse (" << kind << ")\n";
    for (const SweepRow* r : rows) out << fmt("%g", r->interval_s) << ' ' << fmt("%.6f", r->mean_rmse) << '\n';
    written.push_back(path);
  }
  return written;
}

void write_test_csv(std::ostream& out, const TestReport& report) {
  out << "window_start_s,true_plr,predicted_plr\n";
  for (const auto& r : report.rows) {
    out << fmt("%.6f", r.window_start_s) << ',' << fmt("%.6f", r.true_plr) << ',' << fmt("%.6f", r.predicted_plr)
        << '\n';
  }
}

std::string format_cv_table(std::span<const CvReport> reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-7s %-34s %4s %10s %10s\n", "model", "hyperparams", "k", "mean_rmse", "std_rmse");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-7s %-34s %4d %10.6f %10.6f\n", std::string(models::to_string(r.model_kind())).c_str(),
                  describe(r.spec).c_str(), r.k, r.mean_rmse, r.std_rmse);
    out << line;
  }
  return out.str();
}

std::string format_sweep_table(const SweepReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%10s %-7s %-34s %10s\n", "interval_s", "model", "best hyperparams", "mean_rmse");
  out << line;
  for (const auto& r : report.rows) {
    const std::string kind(models::to_string(r.model_kind));
    if (r.present()) {
      std::snprintf(line, sizeof line, "%10g %-7s %-34s %10.6f\n", r.interval_s, kind.c_str(), describe(*r.best).c_str(),
                    r.mean_rmse);
    } else {
      std::snprintf(line, sizeof line, "%10g %-7s %-34s %10s\n", r.interval_s, kind.c_str(),
                    ("(" + r.absent_reason + ")").c_str(), "-");
    }
    out << line;
  }
  return out.str();
}

}  // namespace cogmac::eval
