// msgc: command-line front end for embedding, training, evaluation and the robustness suites.
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure, 1 anything else.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msgc/checkpoint.hpp"
#include "msgc/config.hpp"
#include "msgc/correlations.hpp"
#include "msgc/data.hpp"
#include "msgc/error.hpp"
#include "msgc/graph.hpp"
#include "msgc/pipeline.hpp"
#include "msgc/training.hpp"

namespace fs = std::filesystem;
using namespace msgc;

namespace {

struct DataArgs {
  InputPaths paths;

  void attach(CLI::App* cmd, bool readings_required = true) {
    auto* r = cmd->add_option("--readings", paths.readings, "Readings CSV (timestamp,node_id,feature_0,...)");
    if (readings_required) r->required();
    cmd->add_option("--nodes", paths.nodes, "Node list, one id per line")->required();
    cmd->add_option("--distances", paths.distances, "Distance CSV (from,to,distance_m)")->required();
    cmd->add_option("--travel-time", paths.travel_time, "Travel-time CSV (from,to,minutes) overriding derived times");
    cmd->add_option("--spatial-embedding", paths.spatial_embedding, "Precomputed spatial embedding CSV");
    cmd->add_option("--temporal-embedding", paths.temporal_embedding, "Precomputed temporal embedding CSV");
    cmd->add_flag("--directed", paths.directed, "Do not mirror distance rows");
  }

  std::vector<std::string> files() const {
    std::vector<std::string> out;
    for (const auto* p : {&paths.readings, &paths.nodes, &paths.distances, &paths.travel_time,
                          &paths.spatial_embedding, &paths.temporal_embedding}) {
      if (!p->empty()) out.push_back(*p);
    }
    return out;
  }
};

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;
  std::vector<std::string> ablations;
  std::int64_t seed = -1;
  std::int64_t epochs = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "JSON configuration file");
    cmd->add_option("--set", overrides, "Override a config key: key=value (repeatable)");
    cmd->add_option("--ablate", ablations,
                    "Disable a branch: semantic, adjacent, reachability, temporal_attention, temporal_embedding, "
                    "spatial_embedding");
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--epochs", epochs, "Maximum training epochs");
  }

  // Defaults, then the file, then --set, then dedicated flags.
  ModelConfig resolve(const ModelConfig& base = {}) const {
    ModelConfig c = file.empty() ? base : load_config(file);
    apply_overrides(c, overrides);
    for (const auto& a : ablations) c.ablate(a);
    if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
    if (epochs >= 0) c.max_epochs = static_cast<std::size_t>(epochs);
    c.require_valid();
    return c;
  }
};

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw UsageError("unknown split '" + s + "' (expected train, val or test)");
}

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("invalid level '" + item + "'");
    }
  }
  return out;
}

SeriesTable ingest_for(const Checkpoint& ck, const std::string& readings, const std::string& nodes) {
  return ingest(readings, nodes.empty() ? ck.node_ids : read_node_list(nodes));
}

void print_metrics(const char* label, const Metrics& m) {
  std::cout << label << ": MAE " << m.mae << "  RMSE " << m.rmse << "  MAPE " << m.mape << "%\n";
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Multi-view spatial graph convolution seq2seq traffic forecaster"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv, argv + argc);
  const auto t0 = std::chrono::steady_clock::now();

  // synth ------------------------------------------------------------------------------------
  SynthOptions synth;
  std::string synth_out;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic road network with lagged diffusion");
  c_synth->add_option("--out", synth_out, "Output directory")->required();
  c_synth->add_option("--nodes", synth.n_nodes, "Number of sensors");
  c_synth->add_option("--days", synth.days, "Number of days");
  c_synth->add_option("--delta", synth.delta_minutes, "Minutes between readings");
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--diffusion", synth.diffusion, "Weight of lagged neighbour disturbances");
  c_synth->add_option("--noise", synth.noise_std, "Observation noise std");
  c_synth->add_option("--travel-speed", synth.travel_speed_kmh, "Speed used for true travel times (km/h)");

  // embed ------------------------------------------------------------------------------------
  DataArgs embed_data;
  ConfigArgs embed_cfg;
  std::size_t embed_slots = 0;
  std::string embed_out;
  auto* c_embed = app.add_subcommand("embed", "Learn spatial and temporal embeddings");
  embed_data.attach(c_embed, false);
  embed_cfg.attach(c_embed);
  c_embed->add_option("--slots-per-day", embed_slots, "Time slots per day (checked against --readings if given)");
  c_embed->add_option("--out", embed_out, "Output directory")->required();

  // train ------------------------------------------------------------------------------------
  DataArgs train_data;
  ConfigArgs train_cfg;
  std::string train_out, resume;
  auto* c_train = app.add_subcommand("train", "Train a model");
  train_data.attach(c_train);
  train_cfg.attach(c_train);
  c_train->add_option("--out", train_out, "Output directory")->required();
  c_train->add_option("--resume", resume, "Continue from a checkpoint's training state");

  // evaluate ---------------------------------------------------------------------------------
  std::string eval_ck, eval_readings, eval_nodes, eval_out, eval_split = "test";
  auto* c_eval = app.add_subcommand("evaluate", "Metrics of a checkpoint and the HA baseline");
  c_eval->add_option("--checkpoint", eval_ck, "Checkpoint file")->required();
  c_eval->add_option("--readings", eval_readings, "Readings CSV")->required();
  c_eval->add_option("--nodes", eval_nodes, "Node list (defaults to the checkpoint's)");
  c_eval->add_option("--split", eval_split, "train, val or test");
  c_eval->add_option("--out", eval_out, "Output directory")->required();

  // predict ----------------------------------------------------------------------------------
  std::string pred_ck, pred_readings, pred_nodes, pred_out;
  auto* c_pred = app.add_subcommand("predict", "Forecast the steps after the end of the readings");
  c_pred->add_option("--checkpoint", pred_ck, "Checkpoint file")->required();
  c_pred->add_option("--readings", pred_readings, "Readings CSV")->required();
  c_pred->add_option("--nodes", pred_nodes, "Node list (defaults to the checkpoint's)");
  c_pred->add_option("--out", pred_out, "Forecast CSV in the readings format")->required();

  // matrices ---------------------------------------------------------------------------------
  DataArgs mat_data;
  ConfigArgs mat_cfg;
  std::string mat_out;
  auto* c_mat = app.add_subcommand("matrices", "Dump the spatial matrices as CSV");
  mat_data.attach(c_mat);
  mat_cfg.attach(c_mat);
  c_mat->add_option("--out", mat_out, "Output directory")->required();

  // stress -----------------------------------------------------------------------------------
  DataArgs stress_data;
  ConfigArgs stress_cfg;
  std::string stress_mode, stress_levels, stress_out, stress_runs_out, stress_ck;
  std::vector<std::uint64_t> stress_seeds{0};
  bool stress_test_only = false;
  auto* c_stress = app.add_subcommand("stress", "Fault-tolerance or data-sparsity experiment");
  stress_data.attach(c_stress);
  stress_cfg.attach(c_stress);
  c_stress->add_option("--mode", stress_mode, "fault or sparsity")->required()->check(
      CLI::IsMember({"fault", "sparsity"}));
  c_stress->add_option("--levels", stress_levels, "Comma-separated levels in [0,1]")->required();
  c_stress->add_option("--seeds", stress_seeds, "Seeds (repeatable)");
  c_stress->add_option("--checkpoint", stress_ck, "Take the configuration from a checkpoint");
  c_stress->add_flag("--test-only", stress_test_only, "Fault mode: corrupt only the evaluated inputs");
  c_stress->add_option("--out", stress_out, "Summary CSV")->required();
  c_stress->add_option("--runs-out", stress_runs_out, "Per-seed CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (c_synth->parsed()) {
    const fs::path dir(synth_out);
    fs::create_directories(dir);
    const SynthResult s = synthesize(synth);
    const std::vector<std::string> files = {join(dir, "nodes.txt"), join(dir, "distances.csv"),
                                            join(dir, "travel_time.csv"), join(dir, "readings.csv")};
    write_node_list(files[0], s.graph.node_ids);
    write_distance_file(files[1], s.graph.node_ids, s.graph.distances);
    write_travel_time_file(files[2], s.graph.node_ids, s.graph.travel_time);
    export_readings(files[3], s.table);
    Manifest m{"synth", args, ModelConfig{}, {}, files, seconds_since(t0)};
    m.config.seed = synth.seed;
    write_manifest(join(dir, "manifest.json"), m);
    std::cout << "wrote " << s.table.nodes() << " nodes x " << s.table.steps() << " steps to " << synth_out << "\n";
    return 0;
  }

  if (c_embed->parsed()) {
    const ModelConfig cfg = embed_cfg.resolve();
    const auto ids = read_node_list(embed_data.paths.nodes);
    std::size_t T = embed_slots;
    if (!embed_data.paths.readings.empty()) {
      const std::size_t from_data = ingest(embed_data.paths.readings, ids).slots_per_day();
      if (T != 0 && T != from_data) {
        throw UsageError("--slots-per-day " + std::to_string(T) + " does not match the readings spacing (" +
                         std::to_string(from_data) + " slots per day)");
      }
      T = from_data;
    }
    if (T == 0) throw UsageError("give --slots-per-day or --readings");
    const Matrix dist = read_distance_file(embed_data.paths.distances, ids, !embed_data.paths.directed);
    const Matrix adjacency = build_adjacency(dist, cfg.adjacency_threshold);
    const fs::path dir(embed_out);
    fs::create_directories(dir);
    const std::string sp_path = join(dir, "spatial_embedding.csv"), tp_path = join(dir, "temporal_embedding.csv");
    write_matrix_csv(sp_path, compute_spatial_embedding(adjacency, cfg), ids);
    write_matrix_csv(tp_path, compute_temporal_embedding(T, cfg));
    write_manifest(join(dir, "manifest.json"),
                   {"embed", args, cfg, embed_data.files(), {sp_path, tp_path}, seconds_since(t0)});
    std::cout << "wrote " << sp_path << " and " << tp_path << "\n";
    return 0;
  }

  if (c_train->parsed()) {
    const fs::path dir(train_out);
    fs::create_directories(dir);
    TrainOptions opts;
    opts.on_epoch = [](const HistoryRow& r) {
      std::cout << "epoch " << r.epoch << "  train " << r.train_loss << "  val " << r.val_loss << "  eps "
                << r.epsilon << "  lr " << r.lr << "\n";
    };
    Checkpoint ck;
    std::vector<std::string> inputs = train_data.files();
    if (!resume.empty()) {
      Checkpoint prev = load_checkpoint(resume);
      if (!prev.training) throw UsageError("checkpoint '" + resume + "' carries no training state");
      ModelConfig cfg = train_cfg.resolve(prev.config);
      ModelConfig check = cfg;
      check.max_epochs = prev.config.max_epochs;
      if (!(check == prev.config)) throw UsageError("--resume allows changing only the epoch limit");
      prev.config = cfg;
      PreparedData data = prepare_for_checkpoint(prev, ingest(train_data.paths.readings, prev.node_ids));
      Model model = prev.make_model();
      TrainState state = *prev.training;
      state.stopped = false;
      train(model, data, state, opts);
      ck = make_checkpoint(model, prev.node_ids, prev.normalizer, &state);
      inputs.push_back(resume);
    } else {
      const ModelConfig cfg = train_cfg.resolve();
      const Inputs in = load_inputs(train_data.paths);
      TrainedRun run = train_run(in, cfg, opts);
      ck = make_checkpoint(run.model, in.table.node_ids(), run.experiment.data.normalizer, &run.state);
    }
    const std::string ck_path = join(dir, "checkpoint.json"), hist_path = join(dir, "history.csv"),
                      cfg_path = join(dir, "config.json");
    save_checkpoint(ck_path, ck);
    write_history(hist_path, ck.training->history);
    save_config(cfg_path, ck.config);
    write_manifest(join(dir, "manifest.json"),
                   {"train", args, ck.config, inputs, {ck_path, hist_path, cfg_path}, seconds_since(t0)});
    std::cout << "best validation loss " << ck.training->best_val << " after " << ck.training->epoch
              << " epochs; checkpoint " << ck_path << "\n";
    return 0;
  }

  if (c_eval->parsed()) {
    const Split split = parse_split(eval_split);
    const Checkpoint ck = load_checkpoint(eval_ck);
    const Model model = ck.make_model();
    const PreparedData data = prepare_for_checkpoint(ck, ingest_for(ck, eval_readings, eval_nodes));
    const Evaluation ev = evaluate(model, data, split);
    const fs::path dir(eval_out);
    fs::create_directories(dir);
    const std::string metrics_path = join(dir, "metrics.json"), pred_path = join(dir, "predictions.csv"),
                      ha_path = join(dir, "ha_predictions.csv");
    {
      std::ofstream out(metrics_path);
      if (!out) throw DataError("cannot write '" + metrics_path + "'");
      out << metrics_json(ev, split) << '\n';
    }
    write_predictions_csv(pred_path, ev.model, data.table, ck.config.input_steps);
    write_predictions_csv(ha_path, ev.ha, data.table, ck.config.input_steps);
    std::vector<std::string> inputs = {eval_ck, eval_readings};
    if (!eval_nodes.empty()) inputs.push_back(eval_nodes);
    write_manifest(join(dir, "manifest.json"),
                   {"evaluate", args, ck.config, inputs, {metrics_path, pred_path, ha_path}, seconds_since(t0)});
    print_metrics("model", ev.model_report.overall);
    print_metrics("HA   ", ev.ha_report.overall);
    return 0;
  }

  if (c_pred->parsed()) {
    const Checkpoint ck = load_checkpoint(pred_ck);
    const Model model = ck.make_model();
    const SeriesTable table = ingest_for(ck, pred_readings, pred_nodes);
    const SeriesTable out = forecast(model, ck.normalizer, table);
    export_readings(pred_out, out);
    std::cout << "wrote " << out.steps() << " forecast steps to " << pred_out << "\n";
    return 0;
  }

  if (c_mat->parsed()) {
    const ModelConfig cfg = mat_cfg.resolve();
    Inputs in = load_inputs(mat_data.paths);
    // Only the matrices are needed; skip embedding training.
    in.spatial_embedding = Matrix(in.table.nodes(), cfg.spatial_emb_dim);
    in.temporal_embedding = Matrix(7 * in.table.slots_per_day(), cfg.temporal_emb_dim);
    const Experiment ex = build_experiment(in, cfg);
    const auto written = write_matrices(mat_out, ex);
    write_manifest(join(fs::path(mat_out), "manifest.json"),
                   {"matrices", args, cfg, mat_data.files(), written, seconds_since(t0)});
    std::cout << "wrote " << written.size() << " matrices to " << mat_out << "\n";
    return 0;
  }

  if (c_stress->parsed()) {
    ModelConfig base;
    std::vector<std::string> inputs = stress_data.files();
    if (!stress_ck.empty()) {
      base = load_checkpoint(stress_ck).config;
      inputs.push_back(stress_ck);
    }
    const ModelConfig cfg = stress_cfg.resolve(base);
    StressOptions so;
    so.mode = stress_mode == "fault" ? StressMode::Fault : StressMode::Sparsity;
    so.levels = parse_levels(stress_levels);
    so.seeds = stress_seeds;
    so.test_only = stress_test_only;
    const Inputs in = load_inputs(stress_data.paths);
    const StressResult result = run_stress(in, cfg, so);
    const fs::path out_path(stress_out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_stress_csv(stress_out, so.mode, result);
    std::vector<std::string> artifacts = {stress_out};
    if (!stress_runs_out.empty()) {
      write_stress_runs_csv(stress_runs_out, result);
      artifacts.push_back(stress_runs_out);
    }
    write_manifest(stress_out + ".manifest.json", {"stress", args, cfg, inputs, artifacts, seconds_since(t0)});
    for (const auto& row : result.rows) {
      if (row.metric == "mae") std::cout << "level " << row.level << "  MAE " << row.mean << "\n";
    }
    return 0;
  }
  return 2;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const IndexError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
