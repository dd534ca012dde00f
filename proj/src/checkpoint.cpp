#include "msgc/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "msgc/error.hpp"

namespace msgc {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "msgc-checkpoint";
constexpr int kVersion = 1;

// JSON has no infinities; non-finite values travel as strings.
json number(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

double read_number(const json& j) {
  if (j.is_string()) return std::stod(j.get<std::string>());
  return j.get<double>();
}

json matrix_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.values()}}; }

Matrix matrix_from(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<double>>());
}

json reach_json(const ReachabilityStack& r) {
  json mats = json::array();
  for (const Matrix& m : r.matrices) mats.push_back(matrix_json(m));
  return {{"input_steps", r.input_steps}, {"output_steps", r.output_steps}, {"delta", r.delta}, {"matrices", mats}};
}

ReachabilityStack reach_from(const json& j) {
  ReachabilityStack r;
  r.input_steps = j.at("input_steps").get<std::size_t>();
  r.output_steps = j.at("output_steps").get<std::size_t>();
  r.delta = j.at("delta").get<double>();
  for (const auto& m : j.at("matrices")) r.matrices.push_back(matrix_from(m));
  return r;
}

json state_json(const TrainState& s) {
  json history = json::array();
  for (const auto& h : s.history) {
    history.push_back({{"epoch", h.epoch},
                       {"train_loss", number(h.train_loss)},
                       {"val_loss", number(h.val_loss)},
                       {"epsilon", number(h.epsilon)},
                       {"lr", number(h.lr)}});
  }
  return {{"epoch", s.epoch},
          {"iteration", s.iteration},
          {"lr", number(s.lr)},
          {"best_val", number(s.best_val)},
          {"epochs_since_best", s.epochs_since_best},
          {"stopped", s.stopped},
          {"adam", {{"step", s.adam.step}, {"m", s.adam.m}, {"v", s.adam.v}}},
          {"rng", s.rng_state},
          {"current", s.current},
          {"best", s.best},
          {"history", history}};
}

TrainState state_from(const json& j) {
  TrainState s;
  s.epoch = j.at("epoch").get<std::size_t>();
  s.iteration = j.at("iteration").get<std::uint64_t>();
  s.lr = read_number(j.at("lr"));
  s.best_val = read_number(j.at("best_val"));
  s.epochs_since_best = j.at("epochs_since_best").get<std::size_t>();
  s.stopped = j.at("stopped").get<bool>();
  s.adam.step = j.at("adam").at("step").get<std::uint64_t>();
  s.adam.m = j.at("adam").at("m").get<std::vector<std::vector<double>>>();
  s.adam.v = j.at("adam").at("v").get<std::vector<std::vector<double>>>();
  s.rng_state = j.at("rng").get<std::string>();
  s.current = j.at("current").get<std::vector<double>>();
  s.best = j.at("best").get<std::vector<double>>();
  for (const auto& h : j.at("history")) {
    s.history.push_back({h.at("epoch").get<std::size_t>(), read_number(h.at("train_loss")),
                         read_number(h.at("val_loss")), read_number(h.at("epsilon")), read_number(h.at("lr"))});
  }
  return s;
}

}  // namespace

Checkpoint make_checkpoint(const Model& model, const std::vector<std::string>& node_ids,
                           const Normalizer& normalizer, const TrainState* state) {
  Checkpoint ck;
  ck.config = model.config();
  ck.node_ids = node_ids;
  ck.normalizer = normalizer;
  ck.fixed = model.fixed();
  for (const auto& e : model.params().entries()) {
    ck.parameters.push_back({e.name, e.tensor.shape(), std::vector<double>(e.tensor.data().begin(), e.tensor.data().end())});
  }
  if (state) ck.training = *state;
  return ck;
}

Model Checkpoint::make_model() const {
  Model model(config, fixed);
  const auto& entries = model.params().entries();
  if (entries.size() != parameters.size()) {
    throw DataError("checkpoint holds " + std::to_string(parameters.size()) + " parameters, model expects " +
                    std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& src = parameters[i];
    Tensor dst = entries[i].tensor;
    if (src.name != entries[i].name || src.shape != dst.shape() || src.values.size() != dst.numel()) {
      throw DataError("checkpoint parameter '" + src.name + "' " + shape_str(src.shape) + " does not match '" +
                      entries[i].name + "' " + shape_str(dst.shape()));
    }
    std::copy(src.values.begin(), src.values.end(), dst.mutable_data().begin());
  }
  return model;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  json params = json::array();
  for (const auto& p : ck.parameters) params.push_back({{"name", p.name}, {"shape", p.shape}, {"values", p.values}});
  json j = {{"format", kFormat},
            {"version", kVersion},
            {"config", ck.config},
            {"node_ids", ck.node_ids},
            {"normalizer", {{"mean", ck.normalizer.mean}, {"std", ck.normalizer.std}}},
            {"buffers",
             {{"slots_per_day", ck.fixed.slots_per_day},
              {"spatial_embedding", matrix_json(ck.fixed.spatial_embedding)},
              {"temporal_embedding", matrix_json(ck.fixed.temporal_embedding)},
              {"adjacent_matrix", matrix_json(ck.fixed.adjacent_matrix)},
              {"reachability", reach_json(ck.fixed.reachability)}}},
            {"parameters", params}};
  if (ck.training) j["training"] = state_json(*ck.training);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << j.dump() << '\n';
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  try {
    json j;
    in >> j;
    if (j.value("format", "") != kFormat) throw DataError("'" + path + "' is not a checkpoint");
    if (j.at("version").get<int>() != kVersion) throw DataError("unsupported checkpoint version in '" + path + "'");
    Checkpoint ck;
    from_json(j.at("config"), ck.config);
    ck.node_ids = j.at("node_ids").get<std::vector<std::string>>();
    ck.normalizer.mean = j.at("normalizer").at("mean").get<std::vector<double>>();
    ck.normalizer.std = j.at("normalizer").at("std").get<std::vector<double>>();
    const auto& b = j.at("buffers");
    ck.fixed.slots_per_day = b.at("slots_per_day").get<std::size_t>();
    ck.fixed.spatial_embedding = matrix_from(b.at("spatial_embedding"));
    ck.fixed.temporal_embedding = matrix_from(b.at("temporal_embedding"));
    ck.fixed.adjacent_matrix = matrix_from(b.at("adjacent_matrix"));
    ck.fixed.reachability = reach_from(b.at("reachability"));
    for (const auto& p : j.at("parameters")) {
      ck.parameters.push_back(
          {p.at("name").get<std::string>(), p.at("shape").get<Shape>(), p.at("values").get<std::vector<double>>()});
    }
    if (j.contains("training")) ck.training = state_from(j.at("training"));
    return ck;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace msgc
