#pragma once

// Model selection and assessment: k-fold cross-validation, hyperparameter
// grids, the observation-interval sweep and held-out test evaluation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cogmac/features.hpp"
#include "cogmac/models.hpp"

namespace cogmac::eval {

using features::Dataset;
using models::Model;
using models::ModelKind;

/// Root mean squared error. Throws ContractViolation on empty or mismatched input.
double rmse(std::span<const double> y, std::span<const double> y_hat);

enum class SplitMode { Shuffled, Contiguous };

/// Fold index lists partitioning {0..n-1}. Shuffled mode permutes indices with
/// a seeded Fisher-Yates shuffle and deals them round-robin; contiguous mode
/// cuts the unshuffled sequence into k blocks. Fold sizes differ by at most 1.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, int k, std::uint64_t seed,
                                                  SplitMode mode = SplitMode::Shuffled);

struct LinearSpec {
  double ridge_lambda = 0.0;
  bool operator==(const LinearSpec&) const = default;
};

struct TreeSpec {
  int max_depth = 8;
  int min_samples_leaf = 5;
  bool operator==(const TreeSpec&) const = default;
};

/// Hyperparameters of one trainable model. For the MLP, init_seed is replaced
/// by the per-fold seed during cross-validation.
using ModelSpec = std::variant<LinearSpec, TreeSpec, models::MlpHyperparams>;

ModelKind kind_of(const ModelSpec& spec);
std::string describe(const ModelSpec& spec);  // e.g. "depth=8 min_leaf=5"
ModelSpec default_spec(ModelKind kind);
std::vector<ModelSpec> default_grid(ModelKind kind);

/// Trains `spec` on `dataset`; `seed` initializes the MLP and is ignored otherwise.
Model train_model(const ModelSpec& spec, const Dataset& dataset, std::uint64_t seed);

/// Seed for the model trained in `fold` at `grid_index`.
std::uint64_t fold_seed(std::uint64_t master, std::size_t fold, std::size_t grid_index);

struct CvReport {
  ModelSpec spec;
  int k = 0;
  std::vector<double> fold_rmses;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;  // population
  double interval_s = 0.0;
  SplitMode mode = SplitMode::Shuffled;

  ModelKind model_kind() const { return kind_of(spec); }
};

/// Model trained on every fold except `held_out`.
Model train_fold(const Dataset& dataset, const ModelSpec& spec, const std::vector<std::vector<std::size_t>>& folds,
                 std::size_t held_out, std::uint64_t seed);

/// Training failures are rethrown as TrainingError (DivergenceError for
/// divergence) with the fold index in the message.
CvReport cross_validate(const Dataset& dataset, const ModelSpec& spec, int k, std::uint64_t seed,
                        std::size_t grid_index = 0, SplitMode mode = SplitMode::Shuffled);

struct GridResult {
  CvReport best;
  std::vector<CvReport> evaluated;  // grid order
};

/// Exhaustive search; lowest mean RMSE wins, ties go to the earlier entry.
/// Every point is validated on the same folds.
GridResult grid_search(const Dataset& dataset, std::span<const ModelSpec> grid, int k, std::uint64_t seed);

struct SweepRow {
  double interval_s = 0.0;
  ModelKind model_kind = ModelKind::Linear;
  std::optional<ModelSpec> best;  // empty when the row is absent
  double mean_rmse = 0.0;
  std::size_t samples = 0;
  std::string absent_reason;

  bool present() const { return best.has_value(); }
};

struct SweepReport {
  std::vector<SweepRow> rows;  // interval-major, kinds in request order
};

using DatasetSource = std::function<Dataset(double interval_s)>;
using GridFor = std::function<std::vector<ModelSpec>(ModelKind)>;

std::vector<double> default_intervals();

/// For each interval, rebuilds the dataset and grid-searches every model kind.
/// Intervals yielding fewer than k windows produce absent rows.
SweepReport sweep_intervals(const DatasetSource& source, std::span<const double> intervals,
                            std::span<const ModelKind> kinds, int k, std::uint64_t seed,
                            const GridFor& grid_for = default_grid);
SweepReport sweep_intervals(const sim::Trace& trace, std::span<const double> intervals,
                            std::span<const ModelKind> kinds, int k, std::uint64_t seed,
                            const GridFor& grid_for = default_grid);

struct TestRow {
  double window_start_s = 0.0;
  double true_plr = 0.0;
  double predicted_plr = 0.0;
};

struct TestReport {
  std::vector<TestRow> rows;
  double overall_rmse = 0.0;
};

/// Throws ContractViolation on an empty test set or when the dataset interval
/// differs from the model's training interval.
TestReport evaluate_on_test(const Model& model, const Dataset& test);

// --- reports ------------------------------------------------------------------

std::string_view to_string(SplitMode mode);

void write_cv_csv(std::ostream& out, std::span<const CvReport> reports);
void write_sweep_csv(std::ostream& out, const SweepReport& report);
/// Writes `<dir>/sweep_<kind>.dat` (interval_s, mean_rmse) for each kind with present rows.
std::vector<std::filesystem::path> write_sweep_gnuplot(const std::filesystem::path& dir, const SweepReport& report);
void write_test_csv(std::ostream& out, const TestReport& report);

std::string format_cv_table(std::span<const CvReport> reports);
std::string format_sweep_table(const SweepReport& report);

}  // namespace cogmac::eval
