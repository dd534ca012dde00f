#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "msgc/checkpoint.hpp"
#include "msgc/config.hpp"
#include "msgc/correlations.hpp"
#include "msgc/error.hpp"
#include "msgc/graph.hpp"
#include "msgc/pipeline.hpp"
#include "msgc/training.hpp"

namespace py = pybind11;
using namespace msgc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& values, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

Array to_array(const Matrix& m) {
  return to_array(m.values(), {static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
}

Matrix to_matrix(const Array& a, const char* what) {
  if (a.ndim() != 2) throw py::value_error(std::string(what) + " must be a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

ModelConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  ModelConfig c;
  from_json(j, c);
  return c;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw UsageError("unknown split '" + s + "' (expected train, val or test)");
}

py::dict predictions_dict(const Predictions& p) {
  const std::vector<py::ssize_t> shape = {static_cast<py::ssize_t>(p.window_starts.size()),
                                          static_cast<py::ssize_t>(p.output_steps),
                                          static_cast<py::ssize_t>(p.nodes), static_cast<py::ssize_t>(p.features)};
  std::vector<double> mask(p.mask.begin(), p.mask.end());
  py::dict d;
  d["window_starts"] = p.window_starts;
  d["predicted"] = to_array(p.predicted, shape);
  d["truth"] = to_array(p.truth, shape);
  d["mask"] = to_array(mask, shape).attr("astype")("bool");
  return d;
}

py::list history_list(const std::vector<HistoryRow>& history) {
  py::list out;
  for (const auto& r : history) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["train_loss"] = r.train_loss;
    d["val_loss"] = r.val_loss;
    d["epsilon"] = r.epsilon;
    d["lr"] = r.lr;
    out.append(d);
  }
  return out;
}

// A trained model together with the data it was trained on.
class Run {
 public:
  Run(TrainedRun run, std::vector<std::string> node_ids) : run_(std::move(run)), node_ids_(std::move(node_ids)) {}

  py::list history() const { return history_list(run_.state.history); }
  std::size_t epochs() const { return run_.state.epoch; }
  double best_val() const { return run_.state.best_val; }
  std::string config() const { return nlohmann::json(run_.model.config()).dump(); }

  std::string evaluate(const std::string& split) const {
    const Split s = parse_split(split);
    return metrics_json(msgc::evaluate(run_.model, run_.experiment.data, s), s);
  }

  py::dict predictions(const std::string& split) const {
    return predictions_dict(predict(run_.model, run_.experiment.data, parse_split(split)));
  }

  void save(const std::string& path) const {
    save_checkpoint(path, make_checkpoint(run_.model, node_ids_, run_.experiment.data.normalizer, &run_.state));
  }

 private:
  TrainedRun run_;
  std::vector<std::string> node_ids_;
};

// A model restored from a checkpoint file.
class Predictor {
 public:
  explicit Predictor(const std::string& path) : ck_(load_checkpoint(path)), model_(ck_.make_model()) {}

  std::string config() const { return nlohmann::json(ck_.config).dump(); }
  const std::vector<std::string>& node_ids() const { return ck_.node_ids; }

  Array forecast(const std::string& readings) const {
    const SeriesTable out = msgc::forecast(model_, ck_.normalizer, ingest(readings, ck_.node_ids));
    std::vector<double> values(out.steps() * out.nodes() * out.features());
    for (std::size_t t = 0; t < out.steps(); ++t)
      for (std::size_t n = 0; n < out.nodes(); ++n)
        for (std::size_t f = 0; f < out.features(); ++f)
          values[(t * out.nodes() + n) * out.features() + f] = out.value(t, n, f);
    return to_array(values, {static_cast<py::ssize_t>(out.steps()), static_cast<py::ssize_t>(out.nodes()),
                             static_cast<py::ssize_t>(out.features())});
  }

  std::string evaluate(const std::string& readings, const std::string& split) const {
    const Split s = parse_split(split);
    const PreparedData data = prepare_for_checkpoint(ck_, ingest(readings, ck_.node_ids));
    return metrics_json(msgc::evaluate(model_, data, s), s);
  }

 private:
  Checkpoint ck_;
  Model model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-view spatial graph convolution traffic forecaster";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", error);
  py::register_exception<ContractError>(m, "ContractError", error);
  py::register_exception<IndexError>(m, "IndexError", error);
  py::register_exception<NumericError>(m, "NumericError", error);
  auto data_error = py::register_exception<DataError>(m, "DataError", error);
  py::register_exception<UsageError>(m, "UsageError", error);
  py::register_exception<DatasetTooSmallError>(m, "DatasetTooSmallError", data_error);

  m.def("default_config", [] { return nlohmann::json(ModelConfig{}).dump(); });
  m.def("validate_config", [](const std::string& text) { return parse_config(text).validate(); });

  m.def("reachability_score", &reachability_score, py::arg("p"), py::arg("q"), py::arg("delta"),
        py::arg("travel_minutes"), py::arg("input_steps"), py::arg("same_node") = false);
  m.def(
      "reachability_stack",
      [](const Array& travel_time, double delta, std::size_t P, std::size_t Q) {
        const auto stack = build_reachability_stack(to_matrix(travel_time, "travel_time"), delta, P, Q);
        const std::size_t n = static_cast<std::size_t>(travel_time.shape(0));
        std::vector<double> values;
        for (const Matrix& mat : stack.matrices) values.insert(values.end(), mat.values().begin(), mat.values().end());
        return to_array(values, {static_cast<py::ssize_t>(Q), static_cast<py::ssize_t>(P),
                                 static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(n)});
      },
      py::arg("travel_time"), py::arg("delta"), py::arg("input_steps"), py::arg("output_steps"),
      "Array [Q, P, N, N]; entry [q-1, p-1, j, i] is the influence of node i on node j.");
  m.def(
      "adjacent_trend_scores",
      [](const Array& history, const Array& adjacency) {
        if (history.ndim() != 3) throw py::value_error("history must be a [T, N, F] array");
        const auto T = static_cast<std::size_t>(history.shape(0)), N = static_cast<std::size_t>(history.shape(1)),
                   F = static_cast<std::size_t>(history.shape(2));
        return to_array(adjacent_trend_scores(std::span<const double>(history.data(), T * N * F), T, N, F,
                                              to_matrix(adjacency, "adjacency")));
      },
      py::arg("history"), py::arg("adjacency"));
  m.def(
      "build_adjacency",
      [](const Array& d, double threshold) { return to_array(build_adjacency(to_matrix(d, "distances"), threshold)); },
      py::arg("distances"), py::arg("threshold") = 0.1);
  m.def(
      "normalized_matrix", [](const Array& a) { return to_array(normalized_matrix(to_matrix(a, "adjacency"))); },
      py::arg("adjacency"));

  m.def(
      "compute_metrics",
      [](const Array& predicted, const Array& truth, std::optional<BoolArray> mask) {
        if (predicted.size() != truth.size()) throw py::value_error("predicted and truth differ in size");
        const auto n = static_cast<std::size_t>(predicted.size());
        std::vector<std::uint8_t> m(n, 1);
        if (mask) {
          if (static_cast<std::size_t>(mask->size()) != n) throw py::value_error("mask differs in size");
          for (std::size_t i = 0; i < n; ++i) m[i] = mask->data()[i] ? 1 : 0;
        }
        const Metrics r = compute_metrics(std::span<const double>(predicted.data(), n),
                                          std::span<const double>(truth.data(), n), m);
        py::dict d;
        d["mae"] = r.mae;
        d["rmse"] = r.rmse;
        d["mape"] = r.mape;
        d["count"] = r.count;
        return d;
      },
      py::arg("predicted"), py::arg("truth"), py::arg("mask") = py::none());

  m.def(
      "synthesize",
      [](std::size_t nodes, std::size_t days, std::size_t delta_minutes, std::uint64_t seed, double diffusion,
         double noise_std) {
        SynthOptions o;
        o.n_nodes = nodes;
        o.days = days;
        o.delta_minutes = delta_minutes;
        o.seed = seed;
        o.diffusion = diffusion;
        o.noise_std = noise_std;
        const SynthResult s = synthesize(o);
        const SeriesTable& t = s.table;
        std::vector<double> values(t.steps() * t.nodes() * t.features());
        for (std::size_t k = 0; k < t.steps(); ++k)
          for (std::size_t n = 0; n < t.nodes(); ++n)
            for (std::size_t f = 0; f < t.features(); ++f)
              values[(k * t.nodes() + n) * t.features() + f] = t.value(k, n, f);
        py::dict d;
        d["node_ids"] = t.node_ids();
        d["start"] = format_timestamp(t.start());
        d["spacing_seconds"] = t.spacing_seconds();
        d["values"] = to_array(values, {static_cast<py::ssize_t>(t.steps()), static_cast<py::ssize_t>(t.nodes()),
                                        static_cast<py::ssize_t>(t.features())});
        d["distances"] = to_array(s.graph.distances);
        d["travel_time"] = to_array(s.graph.travel_time);
        d["lags"] = s.lags;
        return d;
      },
      py::arg("nodes") = 8, py::arg("days") = 28, py::arg("delta_minutes") = 5, py::arg("seed") = 0,
      py::arg("diffusion") = 0.5, py::arg("noise_std") = 0.5);

  m.def(
      "write_synthetic",
      [](const std::string& dir, std::size_t nodes, std::size_t days, std::size_t delta_minutes, std::uint64_t seed) {
        SynthOptions o;
        o.n_nodes = nodes;
        o.days = days;
        o.delta_minutes = delta_minutes;
        o.seed = seed;
        const SynthResult s = synthesize(o);
        std::filesystem::create_directories(dir);
        const std::filesystem::path p(dir);
        write_node_list((p / "nodes.txt").string(), s.graph.node_ids);
        write_distance_file((p / "distances.csv").string(), s.graph.node_ids, s.graph.distances);
        write_travel_time_file((p / "travel_time.csv").string(), s.graph.node_ids, s.graph.travel_time);
        export_readings((p / "readings.csv").string(), s.table);
      },
      py::arg("directory"), py::arg("nodes") = 8, py::arg("days") = 28, py::arg("delta_minutes") = 5,
      py::arg("seed") = 0, "Writes nodes.txt, distances.csv, travel_time.csv and readings.csv.");

  py::class_<Run>(m, "Run")
      .def_property_readonly("history", &Run::history)
      .def_property_readonly("epochs", &Run::epochs)
      .def_property_readonly("best_val", &Run::best_val)
      .def_property_readonly("config_json", &Run::config)
      .def("evaluate_json", &Run::evaluate, py::arg("split") = "test")
      .def("predictions", &Run::predictions, py::arg("split") = "test")
      .def("save", &Run::save, py::arg("path"));

  m.def(
      "train",
      [](const std::string& readings, const std::string& nodes, const std::string& distances,
         const std::string& config, const std::string& travel_time) {
        InputPaths paths;
        paths.readings = readings;
        paths.nodes = nodes;
        paths.distances = distances;
        paths.travel_time = travel_time;
        const ModelConfig cfg = parse_config(config);
        cfg.require_valid();
        py::gil_scoped_release release;
        const Inputs in = load_inputs(paths);
        return std::make_unique<Run>(train_run(in, cfg), in.table.node_ids());
      },
      py::arg("readings"), py::arg("nodes"), py::arg("distances"), py::arg("config") = "{}",
      py::arg("travel_time") = "");

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("config_json", &Predictor::config)
      .def_property_readonly("node_ids", &Predictor::node_ids)
      .def("forecast", &Predictor::forecast, py::arg("readings"),
           "Array [Q, N, F_O] of the steps after the end of the readings.")
      .def("evaluate_json", &Predictor::evaluate, py::arg("readings"), py::arg("split") = "test");
}
