#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cogmac/controller.hpp"
#include "cogmac/corpus.hpp"
#include "cogmac/error.hpp"
#include "cogmac/eval.hpp"
#include "cogmac/features.hpp"
#include "cogmac/models.hpp"
#include "cogmac/sim.hpp"

namespace cogmac::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  bool seed_given = false;
  bool quiet = false;
};

class Console {
 public:
  Console(std::ostream& out, const Globals& g) : out_(out), g_(g) {}
  template <class... Ts>
  void info(const Ts&... parts) {
    if (g_.quiet) return;
    (out_ << ... << parts) << '\n';
  }
  void block(const std::string& text) {
    if (!g_.quiet) out_ << text;
  }

 private:
  std::ostream& out_;
  const Globals& g_;
};

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Configuration documents: schema problems are configuration errors.
template <class F>
auto load_config(const fs::path& path, F parse) {
  std::string text;
  try {
    text = corpus::read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse(text);
  } catch (const SchemaError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

features::Dataset load_dataset(const fs::path& path, double interval_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  features::Dataset ds;
  try {
    ds = features::read_dataset_csv(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  if (interval_override > 0.0) ds.interval_s = interval_override;
  if (!(ds.interval_s > 0.0)) {
    throw ConfigError(path.string() + ": cannot infer the window interval from window_start_s; pass --interval");
  }
  return ds;
}

// A corpus root holds train/ and test/; a split directory holds the manifest.
fs::path split_dir(const fs::path& dir, const std::string& split) {
  if (fs::exists(dir / corpus::kManifestFile)) return dir;
  const fs::path sub = dir / split;
  if (fs::exists(sub / corpus::kManifestFile)) return sub;
  throw ConfigError("no manifest.json in " + dir.string() + " or " + sub.string());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_positive(const std::string& token, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || !(v > 0.0)) throw ConfigError(std::string("bad ") + what + " '" + token + "'");
  return v;
}

models::ModelKind parse_kind(const std::string& token) {
  try {
    return models::parse_model_kind(token);
  } catch (const SchemaError&) {
    throw ConfigError("unknown model kind '" + token + "' (expected linear, tree or mlp)");
  }
}

// --- subcommands ---------------------------------------------------------------

struct SimulateOpts {
  std::string config, out;
  std::optional<int> nodes;
  std::optional<double> ipi, duration;
};

int cmd_simulate(const SimulateOpts& o, const Globals& g, Console& con) {
  sim::SimConfig cfg;
  if (!o.config.empty()) cfg = load_config(o.config, [](const std::string& t) { return sim::config_from_json(t); });
  if (o.nodes) cfg.num_transmitters = *o.nodes;
  if (o.ipi) cfg.traffic_ipi_s = *o.ipi;
  if (o.duration) cfg.duration_s = *o.duration;
  if (g.seed_given || o.config.empty()) cfg.seed = g.seed;
  sim::validate(cfg);
  const sim::Trace trace = sim::simulate(cfg);
  corpus::write_atomic(o.out, [&](std::ostream& out) { sim::write_trace_csv(out, trace); });
  long gen = 0, ok = 0;
  for (const auto& e : trace.events) {
    gen += e.kind == sim::EventKind::GEN;
    ok += e.kind == sim::EventKind::RX_OK;
  }
  con.info("simulated ", cfg.num_transmitters, " nodes for ", cfg.duration_s, " s: ", trace.events.size(), " events, ",
           gen, " generated, ", ok, " delivered -> ", o.out);
  return kExitOk;
}

struct CorpusOpts {
  std::string spec, out, split = "both";
  bool fast = false;
};

int cmd_corpus(const CorpusOpts& o, const Globals& g, Console& con) {
  corpus::CorpusSpec spec;
  if (!o.spec.empty()) spec = load_config(o.spec, [](const std::string& t) { return corpus::spec_from_json(t); });
  if (g.seed_given) spec.master_seed = g.seed;
  if (o.fast) spec.per_point_duration_s = corpus::kFastDurationS;
  corpus::validate(spec);

  std::vector<corpus::Split> splits;
  if (o.split == "both") {
    splits = {corpus::Split::Train, corpus::Split::Test};
  } else {
    splits = {corpus::parse_split(o.split)};
  }
  for (auto split : splits) {
    const fs::path dir = fs::path(o.out) / std::string(corpus::to_string(split));
    const auto m = corpus::write_corpus(spec, split, dir, [&](std::size_t done, std::size_t total) {
      if (done == total || done % 10 == 0) con.info("  ", corpus::to_string(split), ": ", done, "/", total, " traces");
    });
    con.info("wrote ", m.traces.size(), " traces (", spec.per_point_duration_s, " s each) and manifest to ",
             dir.string());
  }
  return kExitOk;
}

struct ExtractOpts {
  std::string input, out, config, split = "train";
  double interval = 30.0;
  int horizon = 0;
};

int cmd_extract(const ExtractOpts& o, const Globals&, Console& con) {
  if (o.horizon < 0) throw ConfigError("--horizon must be >= 0");
  const fs::path input(o.input);
  features::Dataset ds;
  features::LabelDiagnostics diag;
  if (fs::is_directory(input)) {
    const fs::path dir = split_dir(input, o.split);
    const auto manifest = corpus::read_manifest(dir);
    ds = std::move(corpus::build_datasets(dir, manifest, {o.interval}, o.horizon, &diag).front());
    con.info("extracted ", ds.size(), " windows from ", manifest.traces.size(), " traces in ", dir.string());
  } else {
    if (o.config.empty()) throw ConfigError("extracting a single trace needs --config with its SimConfig");
    const auto cfg = load_config(o.config, [](const std::string& t) { return sim::config_from_json(t); });
    std::ifstream in(input, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trace " + input.string());
    sim::Trace trace;
    trace.events = sim::read_trace_csv(in);
    trace.duration_s = cfg.duration_s;
    trace.num_transmitters = cfg.num_transmitters;
    trace.traffic_ipi_s = cfg.traffic_ipi_s;
    ds = features::shift_labels(features::build_dataset(trace, o.interval, &diag), o.horizon);
    con.info("extracted ", ds.size(), " windows from ", input.string());
  }
  if (diag.clamped_windows > 0) con.info("note: ", diag.clamped_windows, " windows had more receptions than generations");
  corpus::write_atomic(o.out, [&](std::ostream& out) { features::write_dataset_csv(out, ds); });
  return kExitOk;
}

struct TrainOpts {
  std::string data, model = "mlp", out, cv_out;
  double interval = 0.0;
  int cv = 0;
  std::optional<double> ridge, learning_rate;
  std::optional<int> max_depth, min_leaf, hidden_layers, units, iterations;
};

eval::ModelSpec spec_from(const TrainOpts& o, const Globals& g) {
  switch (parse_kind(o.model)) {
    case models::ModelKind::Linear: {
      eval::LinearSpec s;
      if (o.ridge) s.ridge_lambda = *o.ridge;
      if (s.ridge_lambda < 0.0) throw ConfigError("--ridge must be >= 0");
      return s;
    }
    case models::ModelKind::Tree: {
      eval::TreeSpec s;
      if (o.max_depth) s.max_depth = *o.max_depth;
      if (o.min_leaf) s.min_samples_leaf = *o.min_leaf;
      if (s.max_depth < 0 || s.min_samples_leaf < 1) throw ConfigError("tree needs --max-depth >= 0 and --min-leaf >= 1");
      return s;
    }
    case models::ModelKind::Mlp: {
      models::MlpHyperparams hp;
      if (o.hidden_layers) hp.hidden_layers = *o.hidden_layers;
      if (o.units) hp.units_per_hidden = *o.units;
      if (o.iterations) hp.iterations = *o.iterations;
      if (o.learning_rate) hp.learning_rate = *o.learning_rate;
      hp.init_seed = g.seed;
      try {
        models::validate(hp);
      } catch (const TrainingError& e) {
        throw ConfigError(e.what());
      }
      return hp;
    }
  }
  throw ConfigError("unknown model kind");
}

int cmd_train(const TrainOpts& o, const Globals& g, Console& con) {
  const eval::ModelSpec spec = spec_from(o, g);
  const features::Dataset ds = load_dataset(o.data, o.interval);
  if (o.cv != 0) {
    const eval::CvReport cv = eval::cross_validate(ds, spec, o.cv, g.seed);
    con.block(eval::format_cv_table(std::vector<eval::CvReport>{cv}));
    if (!o.cv_out.empty()) {
      corpus::write_atomic(o.cv_out, [&](std::ostream& out) { eval::write_cv_csv(out, std::vector<eval::CvReport>{cv}); });
    }
  }
  const models::Model model = eval::train_model(spec, ds, g.seed);
  models::save_model(model, o.out);
  const auto& meta = models::meta_of(model);
  con.info("trained ", models::to_string(models::kind_of(model)), " (", eval::describe(spec), ") on ", ds.size(),
           " windows of ", ds.interval_s, " s: training rmse ", fixed(std::sqrt(meta.final_loss)), " -> ", o.out);
  return kExitOk;
}

struct EvaluateOpts {
  std::string model, data, out, summary;
  double interval = 0.0;
};

int cmd_evaluate(const EvaluateOpts& o, const Globals&, Console& con) {
  const models::Model model = models::load_model(o.model);
  const features::Dataset ds = load_dataset(o.data, o.interval);
  const eval::TestReport report = eval::evaluate_on_test(model, ds);
  corpus::write_atomic(o.out, [&](std::ostream& out) { eval::write_test_csv(out, report); });
  if (!o.summary.empty()) {
    const nlohmann::json j = {{"model_kind", models::to_string(models::kind_of(model))},
                              {"interval_s", ds.interval_s},
                              {"windows", report.rows.size()},
                              {"overall_rmse", report.overall_rmse}};
    corpus::write_atomic(o.summary, j.dump(2) + "\n");
  }
  char line[128];
  std::snprintf(line, sizeof line, "%-7s %10s %8s %12s\n%-7s %10g %8zu %12.6f\n", "model", "interval_s", "windows",
                "overall_rmse", std::string(models::to_string(models::kind_of(model))).c_str(), ds.interval_s,
                report.rows.size(), report.overall_rmse);
  con.block(line);
  return kExitOk;
}

struct SweepOpts {
  std::string corpus, split = "train", intervals = "5,10,15,30,60", models = "linear,tree,mlp", out, plot_dir;
  int folds = 10;
};

int cmd_sweep(const SweepOpts& o, const Globals& g, Console& con) {
  std::vector<double> intervals;
  for (const auto& t : split_list(o.intervals)) intervals.push_back(parse_positive(t, "interval"));
  if (intervals.empty()) throw ConfigError("--intervals is empty");
  std::vector<models::ModelKind> kinds;
  for (const auto& t : split_list(o.models)) kinds.push_back(parse_kind(t));
  if (kinds.empty()) throw ConfigError("--models is empty");
  if (o.folds < 2) throw ConfigError("--folds must be at least 2");

  const fs::path dir = split_dir(o.corpus, o.split);
  const auto manifest = corpus::read_manifest(dir);
  const auto datasets = corpus::build_datasets(dir, manifest, intervals);
  auto source = [&](double interval) {
    const auto it = std::find(intervals.begin(), intervals.end(), interval);
    return datasets[static_cast<std::size_t>(it - intervals.begin())];
  };
  const eval::SweepReport report = eval::sweep_intervals(source, intervals, kinds, o.folds, g.seed);
  corpus::write_atomic(o.out, [&](std::ostream& out) { eval::write_sweep_csv(out, report); });
  const fs::path plot_dir = o.plot_dir.empty() ? fs::path(o.out).parent_path() : fs::path(o.plot_dir);
  const auto files = eval::write_sweep_gnuplot(plot_dir.empty() ? fs::path(".") : plot_dir, report);
  con.block(eval::format_sweep_table(report));
  con.info("wrote ", o.out, " and ", files.size(), " gnuplot data files");
  return kExitOk;
}

struct LoopOpts {
  std::string model, data, out, audit;
  double interval = 0.0;
  controller::ControllerPolicy policy;
};

int cmd_loop(const LoopOpts& o, const Globals&, Console& con, std::ostream& err) {
  controller::validate(o.policy);
  const models::Model model = models::load_model(o.model);
  const features::Dataset ds = load_dataset(o.data, o.interval);
  const double trained = models::meta_of(model).interval_s;
  if (std::abs(trained - ds.interval_s) > 1e-9) {
    throw ContractViolation("loop: model trained at " + fixed(trained, 3) + " s windows, features use " +
                            fixed(ds.interval_s, 3) + " s");
  }
  const auto result = controller::run_loop(controller::dataset_stream(ds, !o.audit.empty()), model, o.policy);
  corpus::write_atomic(o.out, [&](std::ostream& out) { controller::write_log_csv(out, result.log); });
  if (!o.audit.empty()) {
    corpus::write_atomic(o.audit, [&](std::ostream& out) { controller::write_audit_csv(out, result.log); });
  }
  const auto switches = std::count_if(result.log.begin(), result.log.end(),
                                      [](const auto& d) { return d.action == controller::Action::SWITCH; });
  con.info("replayed ", result.log.size(), " windows: ", switches, " SWITCH decisions -> ", o.out);
  if (result.error) {
    err << "cogmac loop: stopped early: " << *result.error << " (partial log kept)\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cognitive MAC: simulate CSMA/CA traces, learn packet loss, replay the controller", "cogmac"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed (default 42)");
  app.add_flag("--quiet", g.quiet, "Suppress informational output");

  SimulateOpts so;
  auto* simulate = app.add_subcommand("simulate", "Run one simulation and write its trace CSV");
  simulate->add_option("--config", so.config, "SimConfig JSON")->check(CLI::ExistingFile);
  simulate->add_option("--out", so.out, "Trace CSV path")->required();
  simulate->add_option("--nodes", so.nodes, "Override num_transmitters");
  simulate->add_option("--ipi", so.ipi, "Override traffic_ipi_s");
  simulate->add_option("--duration", so.duration, "Override duration_s");

  CorpusOpts co;
  auto* corp = app.add_subcommand("corpus", "Simulate the training and test corpora");
  corp->add_option("--spec", co.spec, "CorpusSpec JSON (default grid if omitted)")->check(CLI::ExistingFile);
  corp->add_option("--out", co.out, "Output directory (train/ and test/ are created)")->required();
  corp->add_option("--split", co.split, "train, test or both")->check(CLI::IsMember({"train", "test", "both"}));
  corp->add_flag("--fast", co.fast, "60 s per grid point instead of the spec duration");

  ExtractOpts eo;
  auto* extract = app.add_subcommand("extract", "Window a trace or corpus into a features CSV");
  extract->add_option("--input", eo.input, "Trace CSV or corpus directory")->required()->check(CLI::ExistingPath);
  extract->add_option("--interval", eo.interval, "Observation interval in seconds")->check(CLI::PositiveNumber);
  extract->add_option("--out", eo.out, "Features CSV path")->required();
  extract->add_option("--horizon", eo.horizon, "Label each window with the plr this many windows ahead");
  extract->add_option("--config", eo.config, "SimConfig JSON of a single trace")->check(CLI::ExistingFile);
  extract->add_option("--split", eo.split, "Split to read from a corpus root")->check(CLI::IsMember({"train", "test"}));

  TrainOpts to;
  auto* train = app.add_subcommand("train", "Train a model on a features CSV");
  train->add_option("--data", to.data, "Features CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--model", to.model, "linear, tree or mlp");
  train->add_option("--out", to.out, "Model JSON path")->required();
  train->add_option("--interval", to.interval, "Window interval when it cannot be inferred");
  train->add_option("--ridge", to.ridge, "linear: ridge lambda");
  train->add_option("--max-depth", to.max_depth, "tree: maximum depth");
  train->add_option("--min-leaf", to.min_leaf, "tree: minimum samples per leaf");
  train->add_option("--hidden-layers", to.hidden_layers, "mlp: hidden layers");
  train->add_option("--units", to.units, "mlp: units per hidden layer");
  train->add_option("--iterations", to.iterations, "mlp: gradient descent iterations");
  train->add_option("--learning-rate", to.learning_rate, "mlp: learning rate");
  train->add_option("--cv", to.cv, "Also report k-fold cross-validation (0 = off)");
  train->add_option("--cv-out", to.cv_out, "CV report CSV path");

  EvaluateOpts vo;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a model on a held-out features CSV");
  evaluate->add_option("--model", vo.model, "Model JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", vo.data, "Test features CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", vo.out, "Per-window predictions CSV")->required();
  evaluate->add_option("--summary", vo.summary, "Summary JSON path");
  evaluate->add_option("--interval", vo.interval, "Window interval when it cannot be inferred");

  SweepOpts wo;
  auto* sweep = app.add_subcommand("sweep", "Grid-search every model kind at each observation interval");
  sweep->add_option("--corpus", wo.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--split", wo.split, "Split to read from a corpus root")->check(CLI::IsMember({"train", "test"}));
  sweep->add_option("--intervals", wo.intervals, "Comma-separated intervals in seconds");
  sweep->add_option("--models", wo.models, "Comma-separated model kinds");
  sweep->add_option("--folds", wo.folds, "Cross-validation folds");
  sweep->add_option("--out", wo.out, "Sweep CSV path")->required();
  sweep->add_option("--plot-dir", wo.plot_dir, "Directory for sweep_<kind>.dat (default: next to --out)");

  LoopOpts lo;
  auto* loop = app.add_subcommand("loop", "Replay features through the controller");
  loop->add_option("--model", lo.model, "Model JSON")->required()->check(CLI::ExistingFile);
  loop->add_option("--data", lo.data, "Features CSV")->required()->check(CLI::ExistingFile);
  loop->add_option("--out", lo.out, "Decision log CSV")->required();
  loop->add_option("--audit", lo.audit, "Also write predicted vs true plr");
  loop->add_option("--interval", lo.interval, "Window interval when it cannot be inferred");
  loop->add_option("--up", lo.policy.switch_up_threshold, "Switch-up threshold");
  loop->add_option("--down", lo.policy.switch_down_threshold, "Switch-down threshold");
  loop->add_option("--dwell", lo.policy.min_dwell_windows, "Windows a crossing must persist");
  loop->add_option("--target", lo.policy.target_protocol, "Protocol to switch to");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  g.seed_given = app.count("--seed") > 0;
  Console con(out, g);
  const std::string name = app.get_subcommands().front()->get_name();

  try {
    if (name == "simulate") return cmd_simulate(so, g, con);
    if (name == "corpus") return cmd_corpus(co, g, con);
    if (name == "extract") return cmd_extract(eo, g, con);
    if (name == "train") return cmd_train(to, g, con);
    if (name == "evaluate") return cmd_evaluate(vo, g, con);
    if (name == "sweep") return cmd_sweep(wo, g, con);
    if (name == "loop") return cmd_loop(lo, g, con, err);
  } catch (const ConfigError& e) {
    err << "cogmac " << name << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "cogmac " << name << ": " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace cogmac::cli
