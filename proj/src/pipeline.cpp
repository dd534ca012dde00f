#include "msgc/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "msgc/correlations.hpp"
#include "msgc/embedding.hpp"
#include "msgc/error.hpp"

namespace msgc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Matrix read_embedding(const std::string& path, std::size_t rows, const char* what) {
  Matrix m = read_matrix_csv(path);
  if (m.rows() != rows) {
    throw DataError(std::string(what) + " '" + path + "' has " + std::to_string(m.rows()) + " rows, expected " +
                    std::to_string(rows));
  }
  return m;
}

}  // namespace

Inputs load_inputs(const InputPaths& paths) {
  if (paths.readings.empty() || paths.nodes.empty() || paths.distances.empty()) {
    throw UsageError("readings, node list and distance file are all required");
  }
  Inputs in;
  const auto ids = read_node_list(paths.nodes);
  in.table = ingest(paths.readings, ids);
  in.distances = read_distance_file(paths.distances, ids, !paths.directed);
  in.travel_time_file = paths.travel_time;
  if (!paths.spatial_embedding.empty()) {
    in.spatial_embedding = read_embedding(paths.spatial_embedding, ids.size(), "spatial embedding");
  }
  if (!paths.temporal_embedding.empty()) {
    in.temporal_embedding =
        read_embedding(paths.temporal_embedding, 7 * in.table.slots_per_day(), "temporal embedding");
  }
  return in;
}

Inputs inputs_from_synth(const SynthResult& synth) {
  Inputs in;
  in.table = synth.table;
  in.distances = synth.graph.distances;
  in.travel_time = synth.graph.travel_time;
  return in;
}

Matrix compute_spatial_embedding(const Matrix& adjacency, const ModelConfig& config) {
  return spatial_embedding(adjacency, config.spatial_emb_dim, config.embedding, config.seed);
}

Matrix compute_temporal_embedding(std::size_t slots_per_day, const ModelConfig& config) {
  return temporal_embedding(slots_per_day, config.temporal_emb_dim, config.embedding, config.seed + 0x51ULL);
}

Experiment build_experiment(const Inputs& inputs, const ModelConfig& config) {
  config.require_valid();
  const SeriesTable& table = inputs.table;
  if (inputs.distances.rows() != table.nodes() || inputs.distances.cols() != table.nodes()) {
    throw DataError("distance matrix does not match the node count of the readings");
  }
  Experiment ex;
  ex.data = prepare_data(table, config);

  if (inputs.travel_time) {
    ex.mean_speed_kmh = config.mean_speed_kmh;
  } else if (config.mean_speed_kmh > 0.0) {
    ex.mean_speed_kmh = config.mean_speed_kmh;
  } else {
    ex.mean_speed_kmh = ex.data.normalizer.mean[0];
    if (!(ex.mean_speed_kmh > 0.0)) {
      throw DataError("training mean of feature 0 is not a positive speed; set mean_speed_kmh explicitly");
    }
  }
  GraphBuildOptions go;
  go.threshold = config.adjacency_threshold;
  go.mean_speed_kmh = ex.mean_speed_kmh > 0.0 ? ex.mean_speed_kmh : 1.0;
  ex.graph = make_graph(table.node_ids(), inputs.distances, go);
  if (inputs.travel_time) {
    if (inputs.travel_time->rows() != table.nodes() || inputs.travel_time->cols() != table.nodes()) {
      throw DataError("travel-time matrix does not match the node count");
    }
    ex.graph.travel_time = *inputs.travel_time;
  } else if (!inputs.travel_time_file.empty()) {
    apply_travel_time_file(inputs.travel_time_file, table.node_ids(), ex.graph.travel_time);
  }

  ex.trend = adjacent_trend_scores(ex.data.table, ex.data.dataset.train_end, ex.graph.adjacency);
  ex.fixed.adjacent_matrix = normalized_matrix(ex.trend);
  ex.fixed.reachability =
      build_reachability_stack(ex.graph.travel_time, table.delta_minutes(), config.input_steps, config.output_steps);
  if (config.normalize_attention_matrices) {
    for (Matrix& m : ex.fixed.reachability.matrices) m = normalized_matrix(m);
  }
  ex.fixed.slots_per_day = table.slots_per_day();

  if (inputs.spatial_embedding) {
    if (inputs.spatial_embedding->cols() != config.spatial_emb_dim) {
      throw DataError("precomputed spatial embedding width differs from spatial_emb_dim");
    }
    ex.fixed.spatial_embedding = *inputs.spatial_embedding;
  } else {
    ex.fixed.spatial_embedding = compute_spatial_embedding(ex.graph.adjacency, config);
  }
  if (inputs.temporal_embedding) {
    if (inputs.temporal_embedding->cols() != config.temporal_emb_dim) {
      throw DataError("precomputed temporal embedding width differs from temporal_emb_dim");
    }
    ex.fixed.temporal_embedding = *inputs.temporal_embedding;
  } else {
    ex.fixed.temporal_embedding = compute_temporal_embedding(ex.fixed.slots_per_day, config);
  }
  return ex;
}

TrainedRun train_run(const Inputs& inputs, const ModelConfig& config, const TrainOptions& options) {
  Experiment ex = build_experiment(inputs, config);
  Model model(config, ex.fixed);
  TrainState state = initial_state(model, config);
  train(model, ex.data, state, options);
  return TrainedRun{std::move(ex), std::move(model), std::move(state)};
}

Evaluation evaluate(const Model& model, const PreparedData& data, Split split, const SeriesTable* truth) {
  if (data.dataset.count(split) == 0) {
    throw DatasetTooSmallError(std::string("no ") + split_name(split) + " windows to evaluate");
  }
  Evaluation ev;
  const std::size_t F = model.config().output_features;
  ev.model = predict(model, data, split, truth);
  ev.ha = ha_baseline(data, split, F, truth);
  ev.model_report = compute_report(ev.model);
  ev.ha_report = compute_report(ev.ha);
  return ev;
}

PreparedData prepare_for_checkpoint(const Checkpoint& checkpoint, SeriesTable table) {
  if (table.node_ids() != checkpoint.node_ids) throw DataError("readings node ids differ from the checkpoint's");
  if (table.slots_per_day() != checkpoint.fixed.slots_per_day) {
    throw DataError("readings spacing gives " + std::to_string(table.slots_per_day()) +
                    " slots per day, the checkpoint was trained with " +
                    std::to_string(checkpoint.fixed.slots_per_day));
  }
  return prepare_data(std::move(table), checkpoint.config, checkpoint.normalizer);
}

// ---------------------------------------------------------------------------------------------

namespace {

json metrics_to_json(const Metrics& m) {
  return {{"mae", m.mae}, {"rmse", m.rmse}, {"mape", m.mape}, {"count", m.count}, {"mape_count", m.mape_count}};
}

json report_to_json(const MetricsReport& r) {
  json steps = json::array();
  for (const auto& m : r.per_step) steps.push_back(metrics_to_json(m));
  return {{"overall", metrics_to_json(r.overall)}, {"per_step", steps}};
}

}  // namespace

std::string metrics_json(const Evaluation& ev, Split split) {
  json j = {{"split", split_name(split)},
            {"windows", ev.model.window_starts.size()},
            {"output_steps", ev.model.output_steps},
            {"model", report_to_json(ev.model_report)},
            {"ha", report_to_json(ev.ha_report)}};
  return j.dump(2);
}

void write_predictions_csv(const std::string& path, const Predictions& pr, const SeriesTable& table,
                           std::size_t input_steps) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions '" + path + "'");
  out << "window_start,step,timestamp,node_id,feature,predicted,truth,observed\n";
  for (std::size_t w = 0; w < pr.window_starts.size(); ++w)
    for (std::size_t q = 0; q < pr.output_steps; ++q) {
      const std::string ts = format_timestamp(table.timestamp(pr.window_starts[w] + input_steps + q));
      for (std::size_t n = 0; n < pr.nodes; ++n)
        for (std::size_t f = 0; f < pr.features; ++f) {
          const std::size_t k = pr.cell(w, q, n, f);
          out << pr.window_starts[w] << ',' << q + 1 << ',' << ts << ',' << table.node_ids()[n] << ',' << f << ','
              << format_double(pr.predicted[k]) << ',' << format_double(pr.truth[k]) << ',' << int(pr.mask[k])
              << '\n';
        }
    }
}

SeriesTable forecast(const Model& model, const Normalizer& normalizer, const SeriesTable& table) {
  const auto& c = model.config();
  const std::size_t P = c.input_steps, N = table.nodes(), F = table.features();
  if (table.steps() < P) throw DatasetTooSmallError("forecast needs at least " + std::to_string(P) + " steps");
  if (F != c.input_features) throw DataError("readings feature count differs from the model's");
  if (table.slots_per_day() != model.fixed().slots_per_day) throw DataError("readings spacing differs from the model's");
  const std::size_t start = table.steps() - P;
  Batch batch;
  batch.size = 1;
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t t = start + p;
    std::vector<double> x(N * F, 0.0);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < F; ++f)
        if (table.observed(t, n, f)) x[n * F + f] = normalizer.apply(table.value(t, n, f), f);
    batch.inputs.emplace_back(Shape{1, N, F}, std::move(x));
    batch.temporal_rows.push_back({table.temporal_row(t)});
  }
  const ForwardResult out = model.forward(batch);
  SeriesTable result(table.node_ids(), table.timestamp(table.steps()), table.spacing_seconds(), c.output_steps,
                     c.output_features);
  for (std::size_t q = 0; q < c.output_steps; ++q) {
    const auto v = out.predictions[q].data();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < c.output_features; ++f) {
        result.value(q, n, f) = normalizer.inverse(v[n * c.output_features + f], f);
        result.set_observed(q, n, f, true);
      }
  }
  return result;
}

std::vector<std::string> write_matrices(const std::string& dir, const Experiment& ex) {
  fs::create_directories(dir);
  const auto& ids = ex.graph.node_ids;
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const Matrix& m) {
    const std::string path = (fs::path(dir) / name).string();
    write_matrix_csv(path, m, ids);
    written.push_back(path);
  };
  put("adjacency.csv", ex.graph.adjacency);
  put("normalized_adjacency.csv", normalized_matrix(ex.graph.adjacency));
  put("adjacent_trend.csv", ex.trend);
  put("adjacent_trend_normalized.csv", ex.fixed.adjacent_matrix);
  put("travel_time.csv", ex.graph.travel_time);
  const auto& r = ex.fixed.reachability;
  for (std::size_t q = 1; q <= r.output_steps; ++q)
    for (std::size_t p = 1; p <= r.input_steps; ++p) {
      put("reachability_q" + std::to_string(q) + "_p" + std::to_string(p) + ".csv", r.at(q, p));
    }
  return written;
}

// ---------------------------------------------------------------------------------------------

StressResult run_stress(const Inputs& inputs, const ModelConfig& config, const StressOptions& options) {
  if (options.levels.empty()) throw UsageError("stress: no levels given");
  if (options.seeds.empty()) throw UsageError("stress: no seeds given");
  for (double level : options.levels) {
    if (!(level >= 0.0 && level <= 1.0)) throw UsageError("stress level " + format_double(level) + " outside [0,1]");
    if (options.mode == StressMode::Sparsity && level == 0.0) {
      throw UsageError("sparsity level must be > 0");
    }
  }
  std::vector<double> levels = options.levels;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  StressResult result;
  for (double level : levels) {
    for (std::uint64_t seed : options.seeds) {
      ModelConfig cfg = config;
      cfg.seed = seed;
      Metrics m;
      if (options.mode == StressMode::Fault) {
        const std::uint64_t fault_seed = seed ^ 0x6661756c74ULL;
        if (options.test_only) {
          TrainedRun run = train_run(inputs, cfg);
          SeriesTable faulted = inject_faults(inputs.table, level, fault_seed);
          PreparedData data = prepare_data(std::move(faulted), cfg, run.experiment.data.normalizer);
          m = compute_report(predict(run.model, data, Split::Test, &inputs.table)).overall;
        } else {
          Inputs corrupted = inputs;
          corrupted.table = inject_faults(inputs.table, level, fault_seed);
          TrainedRun run = train_run(corrupted, cfg);
          m = compute_report(predict(run.model, run.experiment.data, Split::Test, &inputs.table)).overall;
        }
      } else {
        Inputs reduced = inputs;
        reduced.table =
            subsample(inputs.table, level, seed, cfg.input_steps, cfg.output_steps, cfg.subsample_prefix);
        TrainedRun run = train_run(reduced, cfg);
        m = compute_report(predict(run.model, run.experiment.data, Split::Test)).overall;
      }
      result.runs.push_back({level, seed, m});
    }
    for (const char* metric : {"mae", "rmse", "mape"}) {
      std::vector<double> values;
      for (const auto& run : result.runs) {
        if (run.level != level) continue;
        const std::string name = metric;
        values.push_back(name == "mae" ? run.metrics.mae : name == "rmse" ? run.metrics.rmse : run.metrics.mape);
      }
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
      result.rows.push_back({level, metric, mean, sd, values.size()});
    }
  }
  return result;
}

void write_stress_csv(const std::string& path, StressMode mode, const StressResult& result) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "mode,level,metric,mean,std,runs\n";
  for (const auto& row : result.rows) {
    out << (mode == StressMode::Fault ? "fault" : "sparsity") << ',' << format_double(row.level) << ',' << row.metric
        << ',' << format_double(row.mean) << ',' << format_double(row.std) << ',' << row.runs << '\n';
  }
}

void write_stress_runs_csv(const std::string& path, const StressResult& result) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "level,seed,mae,rmse,mape\n";
  for (const auto& run : result.runs) {
    out << format_double(run.level) << ',' << run.seed << ',' << format_double(run.metrics.mae) << ','
        << format_double(run.metrics.rmse) << ',' << format_double(run.metrics.mape) << '\n';
  }
}

// ---------------------------------------------------------------------------------------------

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

void write_manifest(const std::string& path, const Manifest& m) {
  auto files = [](const std::vector<std::string>& paths) {
    json arr = json::array();
    for (const auto& p : paths) {
      json entry = {{"path", p}};
      if (fs::is_regular_file(p)) {
        entry["sha256"] = file_digest(p);
        entry["bytes"] = fs::file_size(p);
      }
      arr.push_back(entry);
    }
    return arr;
  };
  json j = {{"command", m.command},
            {"argv", m.argv},
            {"seed", m.config.seed},
            {"config", m.config},
            {"inputs", files(m.inputs)},
            {"artifacts", files(m.artifacts)},
            {"seconds", m.seconds}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace msgc
