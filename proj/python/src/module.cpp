#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <sstream>

#include "cogmac/controller.hpp"
#include "cogmac/error.hpp"
#include "cogmac/eval.hpp"
#include "cogmac/features.hpp"
#include "cogmac/models.hpp"
#include "cogmac/sim.hpp"

namespace py = pybind11;
using namespace cogmac;

namespace {

py::array_t<double> feature_matrix(const features::Dataset& ds) {
  py::array_t<double> out({static_cast<py::ssize_t>(ds.size()), static_cast<py::ssize_t>(features::kNumFeatures)});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto v = ds.samples[i].features.values();
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = v[j];
  }
  return out;
}

features::FeatureVector row_to_features(const double* row) {
  return {static_cast<int>(row[0]), row[1], static_cast<int>(row[2]), static_cast<int>(row[3])};
}

eval::ModelSpec spec_for(const std::string& kind, const py::kwargs& hp, std::uint64_t seed) {
  eval::ModelSpec spec = eval::default_spec(models::parse_model_kind(kind));
  if (auto* s = std::get_if<eval::LinearSpec>(&spec)) {
    if (hp.contains("ridge_lambda")) s->ridge_lambda = hp["ridge_lambda"].cast<double>();
  } else if (auto* s = std::get_if<eval::TreeSpec>(&spec)) {
    if (hp.contains("max_depth")) s->max_depth = hp["max_depth"].cast<int>();
    if (hp.contains("min_samples_leaf")) s->min_samples_leaf = hp["min_samples_leaf"].cast<int>();
  } else if (auto* s = std::get_if<models::MlpHyperparams>(&spec)) {
    if (hp.contains("hidden_layers")) s->hidden_layers = hp["hidden_layers"].cast<int>();
    if (hp.contains("units_per_hidden")) s->units_per_hidden = hp["units_per_hidden"].cast<int>();
    if (hp.contains("iterations")) s->iterations = hp["iterations"].cast<int>();
    if (hp.contains("learning_rate")) s->learning_rate = hp["learning_rate"].cast<double>();
    s->init_seed = seed;
  }
  return spec;
}

struct PyModel {
  models::Model model;
};

}  // namespace

PYBIND11_MODULE(_cogmac, m) {
  m.doc() = "Cognitive MAC simulator, features, models and controller";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  py::class_<sim::InterferencePattern>(m, "InterferencePattern")
      .def(py::init([](double on_s, double off_s, double start_s) {
             return sim::InterferencePattern{on_s, off_s, start_s};
           }),
           py::arg("on_s") = 0.002, py::arg("off_s") = 0.008, py::arg("start_s") = 0.0)
      .def_readwrite("on_s", &sim::InterferencePattern::on_s)
      .def_readwrite("off_s", &sim::InterferencePattern::off_s)
      .def_readwrite("start_s", &sim::InterferencePattern::start_s);

  py::class_<sim::SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("num_transmitters", &sim::SimConfig::num_transmitters)
      .def_readwrite("traffic_ipi_s", &sim::SimConfig::traffic_ipi_s)
      .def_readwrite("payload_bytes", &sim::SimConfig::payload_bytes)
      .def_readwrite("duration_s", &sim::SimConfig::duration_s)
      .def_readwrite("interference", &sim::SimConfig::interference)
      .def_readwrite("seed", &sim::SimConfig::seed)
      .def("validate", [](const sim::SimConfig& c) { sim::validate(c); })
      .def("to_json", &sim::config_to_json)
      .def_static("from_json", [](const std::string& text) { return sim::config_from_json(text); });

  py::class_<sim::Trace>(m, "Trace")
      .def_readonly("duration_s", &sim::Trace::duration_s)
      .def_readonly("num_transmitters", &sim::Trace::num_transmitters)
      .def_readonly("traffic_ipi_s", &sim::Trace::traffic_ipi_s)
      .def("__len__", [](const sim::Trace& t) { return t.events.size(); })
      .def("events",
           [](const sim::Trace& t) {
             py::list out;
             for (const auto& e : t.events) {
               out.append(py::make_tuple(e.time_s(), e.node_id, std::string(sim::to_string(e.kind)), e.seq,
                                         e.size_bytes));
             }
             return out;
           })
      .def("count",
           [](const sim::Trace& t, const std::string& kind) {
             const auto k = sim::parse_event_kind(kind);
             return std::count_if(t.events.begin(), t.events.end(), [k](const auto& e) { return e.kind == k; });
           })
      .def("to_csv", &sim::trace_to_csv);

  m.def("simulate", &sim::simulate, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  py::class_<features::Dataset>(m, "Dataset")
      .def_readonly("interval_s", &features::Dataset::interval_s)
      .def("__len__", &features::Dataset::size)
      .def_property_readonly("X", &feature_matrix)
      .def_property_readonly("y",
                             [](const features::Dataset& ds) {
                               const auto labels = ds.labels();
                               return py::array_t<double>(static_cast<py::ssize_t>(labels.size()), labels.data());
                             })
      .def_property_readonly("window_start_s",
                             [](const features::Dataset& ds) {
                               std::vector<double> v;
                               for (const auto& s : ds.samples) v.push_back(s.window_start_s);
                               return v;
                             })
      .def("to_csv", &features::dataset_to_csv)
      .def_static("from_csv", [](const std::string& text) {
        std::istringstream in(text);
        return features::read_dataset_csv(in);
      });

  m.def("build_dataset",
        [](const sim::Trace& trace, double interval_s) { return features::build_dataset(trace, interval_s); },
        py::arg("trace"), py::arg("interval_s") = 30.0);

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("kind",
                             [](const PyModel& p) { return std::string(models::to_string(models::kind_of(p.model))); })
      .def_property_readonly("interval_s", [](const PyModel& p) { return models::meta_of(p.model).interval_s; })
      .def("predict",
           [](const PyModel& p, py::array_t<double, py::array::c_style | py::array::forcecast> x) {
             if (x.ndim() != 2 || x.shape(1) != static_cast<py::ssize_t>(features::kNumFeatures)) {
               throw ConfigError("predict expects an (n, 4) array of [d, ipi_s, rp, errp]");
             }
             py::array_t<double> out(x.shape(0));
             auto o = out.mutable_unchecked<1>();
             for (py::ssize_t i = 0; i < x.shape(0); ++i) o(i) = models::predict(p.model, row_to_features(x.data(i, 0)));
             return out;
           })
      .def("to_json", [](const PyModel& p) { return models::model_to_json(p.model); })
      .def_static("from_json", [](const std::string& text) { return PyModel{models::model_from_json(text)}; });

  m.def(
      "train",
      [](const features::Dataset& ds, const std::string& kind, std::uint64_t seed, const py::kwargs& hp) {
        const auto spec = spec_for(kind, hp, seed);
        py::gil_scoped_release release;
        return PyModel{eval::train_model(spec, ds, seed)};
      },
      py::arg("dataset"), py::arg("kind") = "mlp", py::arg("seed") = 42);

  m.def(
      "cross_validate",
      [](const features::Dataset& ds, const std::string& kind, int k, std::uint64_t seed, const py::kwargs& hp) {
        const auto spec = spec_for(kind, hp, seed);
        eval::CvReport r;
        {
          py::gil_scoped_release release;
          r = eval::cross_validate(ds, spec, k, seed);
        }
        py::dict out;
        out["model_kind"] = std::string(models::to_string(r.model_kind()));
        out["hyperparams"] = eval::describe(r.spec);
        out["k"] = r.k;
        out["fold_rmses"] = r.fold_rmses;
        out["mean_rmse"] = r.mean_rmse;
        out["std_rmse"] = r.std_rmse;
        return out;
      },
      py::arg("dataset"), py::arg("kind") = "mlp", py::arg("k") = 10, py::arg("seed") = 42);

  m.def("rmse", [](const std::vector<double>& y, const std::vector<double>& y_hat) { return eval::rmse(y, y_hat); },
        py::arg("y"), py::arg("y_hat"));

  m.def(
      "replay",
      [](const PyModel& p, const features::Dataset& ds, double up, double down, int dwell,
         const std::string& target) {
        const controller::ControllerPolicy policy{up, down, dwell, target};
        const auto result = controller::run_loop(controller::dataset_stream(ds, false), p.model, policy);
        if (result.error) throw std::runtime_error(*result.error);
        return controller::log_to_csv(result.log);
      },
      py::arg("model"), py::arg("dataset"), py::arg("up") = 0.2, py::arg("down") = 0.1, py::arg("dwell") = 2,
      py::arg("target") = "TSCH");
}
