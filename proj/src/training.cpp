#include "msgc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "msgc/error.hpp"

namespace msgc {

Normalizer Normalizer::fit(const SeriesTable& table, std::size_t end_step) {
  const std::size_t F = table.features();
  if (end_step > table.steps()) throw IndexError("Normalizer::fit: end step beyond table");
  Normalizer out;
  out.mean.assign(F, 0.0);
  out.std.assign(F, 1.0);
  std::vector<double> sum(F, 0.0), sq(F, 0.0);
  std::vector<std::size_t> count(F, 0);
  for (std::size_t t = 0; t < end_step; ++t)
    for (std::size_t n = 0; n < table.nodes(); ++n)
      for (std::size_t f = 0; f < F; ++f) {
        if (!table.observed(t, n, f)) continue;
        sum[f] += table.value(t, n, f);
        ++count[f];
      }
  for (std::size_t f = 0; f < F; ++f)
    if (count[f] > 0) out.mean[f] = sum[f] / static_cast<double>(count[f]);
  for (std::size_t t = 0; t < end_step; ++t)
    for (std::size_t n = 0; n < table.nodes(); ++n)
      for (std::size_t f = 0; f < F; ++f) {
        if (!table.observed(t, n, f)) continue;
        const double d = table.value(t, n, f) - out.mean[f];
        sq[f] += d * d;
      }
  for (std::size_t f = 0; f < F; ++f) {
    const double s = count[f] > 0 ? std::sqrt(sq[f] / static_cast<double>(count[f])) : 0.0;
    out.std[f] = s > 0.0 ? s : 1.0;
  }
  return out;
}

Tensor masked_mae(const std::vector<Tensor>& predictions, const std::vector<Tensor>& targets,
                  const std::vector<Tensor>& masks) {
  if (predictions.size() != targets.size() || predictions.size() != masks.size()) {
    throw DimensionError("masked_mae: step counts differ");
  }
  double observed = 0.0;
  for (const Tensor& m : masks)
    for (double v : m.data()) observed += v;
  if (observed == 0.0) throw ContractError("masked_mae: no observed cells");
  Tensor total;
  for (std::size_t q = 0; q < predictions.size(); ++q) {
    Tensor term = sum(mul(abs(sub(predictions[q], targets[q])), masks[q]));
    total = total.defined() ? add(total, term) : term;
  }
  return scale(total, 1.0 / observed);
}

double sampling_probability(std::uint64_t iteration, double tau) {
  if (!(tau > 0.0)) throw ContractError("sampling_probability: tau must be positive");
  return tau / (tau + std::exp(static_cast<double>(iteration) / tau));
}

// ---------------------------------------------------------------------------------------------

namespace {

PreparedData prepare_with(SeriesTable table, const ModelConfig& config, const Normalizer* fixed) {
  if (table.features() != config.input_features) {
    throw DataError("data has " + std::to_string(table.features()) + " features but the model expects " +
                    std::to_string(config.input_features));
  }
  PreparedData out;
  out.dataset = windowize(table, config.input_steps, config.output_steps, config.stride,
                          SplitFractions{config.train_fraction, config.val_fraction});
  out.normalizer = fixed ? *fixed : Normalizer::fit(table, out.dataset.train_end);
  out.normalized.assign(table.values().size(), 0.0);
  for (std::size_t t = 0; t < table.steps(); ++t)
    for (std::size_t n = 0; n < table.nodes(); ++n)
      for (std::size_t f = 0; f < table.features(); ++f) {
        if (!table.observed(t, n, f)) continue;
        out.normalized[(t * table.nodes() + n) * table.features() + f] =
            out.normalizer.apply(table.value(t, n, f), f);
      }
  out.table = std::move(table);
  return out;
}

}  // namespace

PreparedData prepare_data(SeriesTable table, const ModelConfig& config) {
  return prepare_with(std::move(table), config, nullptr);
}

PreparedData prepare_data(SeriesTable table, const ModelConfig& config, const Normalizer& normalizer) {
  return prepare_with(std::move(table), config, &normalizer);
}

Batch make_batch(const PreparedData& data, const std::vector<std::size_t>& window_ids, std::size_t output_features) {
  const auto& ds = data.dataset;
  const auto& table = data.table;
  const std::size_t B = window_ids.size(), N = table.nodes(), F = table.features();
  const std::size_t P = ds.input_steps, Q = ds.output_steps;
  if (output_features > F) throw DimensionError("make_batch: more output features than input features");
  Batch batch;
  batch.size = B;
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<double> x(B * N * F);
    std::vector<std::size_t> rows(B);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t t = ds.windows.at(window_ids[b]).start + p;
      std::copy_n(data.normalized.begin() + static_cast<std::ptrdiff_t>(t * N * F), N * F, x.begin() + b * N * F);
      rows[b] = table.temporal_row(t);
    }
    batch.inputs.emplace_back(Shape{B, N, F}, std::move(x));
    batch.temporal_rows.push_back(std::move(rows));
  }
  for (std::size_t q = 0; q < Q; ++q) {
    std::vector<double> y(B * N * output_features), m(B * N * output_features);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t t = ds.windows.at(window_ids[b]).start + P + q;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < output_features; ++f) {
          const std::size_t dst = (b * N + n) * output_features + f;
          y[dst] = data.normalized[(t * N + n) * F + f];
          m[dst] = table.observed(t, n, f) ? 1.0 : 0.0;
        }
    }
    batch.targets.emplace_back(Shape{B, N, output_features}, std::move(y));
    batch.masks.emplace_back(Shape{B, N, output_features}, std::move(m));
  }
  return batch;
}

// ---------------------------------------------------------------------------------------------

Metrics compute_metrics(std::span<const double> predicted, std::span<const double> truth,
                        std::span<const std::uint8_t> mask) {
  if (predicted.size() != truth.size() || predicted.size() != mask.size()) {
    throw DimensionError("compute_metrics: arrays differ in length");
  }
  Metrics m;
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!mask[i]) continue;
    const double e = predicted[i] - truth[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    ++m.count;
    if (std::abs(truth[i]) > 1e-6) {
      pct_sum += std::abs(e / truth[i]);
      ++m.mape_count;
    }
  }
  if (m.count == 0) throw ContractError("compute_metrics: no observed cells");
  if (m.mape_count == 0) throw NumericError("compute_metrics: MAPE undefined, every ground-truth value is zero");
  const double n = static_cast<double>(m.count);
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.mape = 100.0 * pct_sum / static_cast<double>(m.mape_count);
  return m;
}

MetricsReport compute_report(const Predictions& pr) {
  MetricsReport report;
  report.overall = compute_metrics(pr.predicted, pr.truth, pr.mask);
  const std::size_t step_cells = pr.nodes * pr.features;
  for (std::size_t q = 0; q < pr.output_steps; ++q) {
    std::vector<double> p, t;
    std::vector<std::uint8_t> m;
    for (std::size_t w = 0; w < pr.window_starts.size(); ++w) {
      const std::size_t begin = pr.cell(w, q, 0, 0);
      p.insert(p.end(), pr.predicted.begin() + begin, pr.predicted.begin() + begin + step_cells);
      t.insert(t.end(), pr.truth.begin() + begin, pr.truth.begin() + begin + step_cells);
      m.insert(m.end(), pr.mask.begin() + begin, pr.mask.begin() + begin + step_cells);
    }
    report.per_step.push_back(compute_metrics(p, t, m));
  }
  return report;
}

Predictions empty_predictions(const PreparedData& data, Split split, std::size_t output_features,
                              const SeriesTable& truth_table) {
  const auto& ds = data.dataset;
  if (truth_table.steps() != data.table.steps() || truth_table.nodes() != data.table.nodes() ||
      truth_table.features() != data.table.features()) {
    throw DimensionError("truth table does not match the data grid");
  }
  Predictions pr;
  pr.output_steps = ds.output_steps;
  pr.nodes = data.table.nodes();
  pr.features = output_features;
  for (std::size_t id : ds.indices(split)) pr.window_starts.push_back(ds.windows[id].start);
  const std::size_t cells = pr.window_starts.size() * pr.output_steps * pr.nodes * pr.features;
  pr.predicted.assign(cells, 0.0);
  pr.truth.assign(cells, 0.0);
  pr.mask.assign(cells, 0);
  for (std::size_t w = 0; w < pr.window_starts.size(); ++w)
    for (std::size_t q = 0; q < pr.output_steps; ++q) {
      const std::size_t t = pr.window_starts[w] + ds.input_steps + q;
      for (std::size_t n = 0; n < pr.nodes; ++n)
        for (std::size_t f = 0; f < pr.features; ++f) {
          pr.truth[pr.cell(w, q, n, f)] = truth_table.value(t, n, f);
          pr.mask[pr.cell(w, q, n, f)] = truth_table.observed(t, n, f) ? 1 : 0;
        }
    }
  return pr;
}

Predictions ha_baseline(const PreparedData& data, Split split, std::size_t output_features,
                        const SeriesTable* truth_table) {
  const auto& table = data.table;
  Predictions pr = empty_predictions(data, split, output_features, truth_table ? *truth_table : table);
  const std::size_t N = table.nodes(), F = output_features;
  const std::size_t rows = 7 * table.slots_per_day();
  std::vector<double> slot_sum(rows * N * F, 0.0), node_sum(N * F, 0.0);
  std::vector<std::size_t> slot_count(rows * N * F, 0), node_count(N * F, 0);
  for (std::size_t t = 0; t < data.dataset.train_end; ++t) {
    const std::size_t r = table.temporal_row(t);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < F; ++f) {
        if (!table.observed(t, n, f)) continue;
        slot_sum[(r * N + n) * F + f] += table.value(t, n, f);
        ++slot_count[(r * N + n) * F + f];
        node_sum[n * F + f] += table.value(t, n, f);
        ++node_count[n * F + f];
      }
  }
  for (std::size_t w = 0; w < pr.window_starts.size(); ++w)
    for (std::size_t q = 0; q < pr.output_steps; ++q) {
      const std::size_t t = pr.window_starts[w] + data.dataset.input_steps + q;
      const std::size_t r = table.temporal_row(t);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f) {
          const std::size_t k = (r * N + n) * F + f;
          double v;
          if (slot_count[k] > 0) {
            v = slot_sum[k] / static_cast<double>(slot_count[k]);
          } else if (node_count[n * F + f] > 0) {
            v = node_sum[n * F + f] / static_cast<double>(node_count[n * F + f]);
          } else {
            v = data.normalizer.mean[f];
          }
          pr.predicted[pr.cell(w, q, n, f)] = v;
        }
    }
  return pr;
}

Predictions predict(const Model& model, const PreparedData& data, Split split, const SeriesTable* truth_table,
                    std::size_t batch_size) {
  const std::size_t F = model.config().output_features;
  Predictions pr = empty_predictions(data, split, F, truth_table ? *truth_table : data.table);
  const auto ids = data.dataset.indices(split);
  const std::size_t N = pr.nodes;
  for (std::size_t begin = 0; begin < ids.size(); begin += batch_size) {
    const std::size_t end = std::min(ids.size(), begin + batch_size);
    std::vector<std::size_t> chunk(ids.begin() + static_cast<std::ptrdiff_t>(begin),
                                   ids.begin() + static_cast<std::ptrdiff_t>(end));
    Batch batch = make_batch(data, chunk, F);
    batch.targets.clear();
    batch.masks.clear();
    const ForwardResult out = model.forward(batch);
    for (std::size_t q = 0; q < pr.output_steps; ++q) {
      const auto values = out.predictions[q].data();
      for (std::size_t b = 0; b < chunk.size(); ++b)
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t f = 0; f < F; ++f) {
            pr.predicted[pr.cell(begin + b, q, n, f)] = data.normalizer.inverse(values[(b * N + n) * F + f], f);
          }
    }
  }
  return pr;
}

double evaluate_loss(const Model& model, const PreparedData& data, Split split, std::size_t batch_size) {
  const std::size_t F = model.config().output_features;
  const auto ids = data.dataset.indices(split);
  double abs_sum = 0.0, count = 0.0;
  for (std::size_t begin = 0; begin < ids.size(); begin += batch_size) {
    const std::size_t end = std::min(ids.size(), begin + batch_size);
    std::vector<std::size_t> chunk(ids.begin() + static_cast<std::ptrdiff_t>(begin),
                                   ids.begin() + static_cast<std::ptrdiff_t>(end));
    const Batch batch = make_batch(data, chunk, F);
    const ForwardResult out = model.forward(batch);
    for (std::size_t q = 0; q < out.predictions.size(); ++q) {
      const auto p = out.predictions[q].data();
      const auto y = batch.targets[q].data();
      const auto m = batch.masks[q].data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        abs_sum += m[i] * std::abs(p[i] - y[i]);
        count += m[i];
      }
    }
  }
  if (count == 0.0) throw DataError("evaluate_loss: split has no observed target cells");
  return abs_sum / count;
}

// ---------------------------------------------------------------------------------------------

void write_history(const std::string& path, const std::vector<HistoryRow>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history '" + path + "'");
  out << "epoch,train_loss,val_loss,epsilon,lr\n";
  for (const auto& row : history) {
    out << row.epoch << ',' << format_double(row.train_loss) << ',' << format_double(row.val_loss) << ','
        << format_double(row.epsilon) << ',' << format_double(row.lr) << '\n';
  }
}

TrainState initial_state(const Model& model, const ModelConfig& config) {
  TrainState s;
  s.lr = config.lr;
  s.rng_state = Rng::derived(config.seed, 0x7472616eULL).serialize();
  s.current = model.params().flatten();
  s.best = s.current;
  return s;
}

namespace {

std::string parameter_norms(const ParameterSet& params) {
  std::ostringstream os;
  for (const auto& e : params.entries()) {
    double sq = 0.0;
    for (double v : e.tensor.data()) sq += v * v;
    os << "\n  " << e.name << " |w|=" << std::sqrt(sq);
  }
  return os.str();
}

}  // namespace

void train(Model& model, const PreparedData& data, TrainState& state, const TrainOptions& options) {
  const ModelConfig& c = model.config();
  ParameterSet& params = model.params();
  params.assign(state.current);
  Rng rng;
  rng.deserialize(state.rng_state);

  const auto train_ids = data.dataset.indices(Split::Train);
  if (train_ids.empty()) throw DatasetTooSmallError("no training windows");
  const bool has_val = data.dataset.count(Split::Val) > 0;

  while (state.epoch < c.max_epochs && !state.stopped) {
    const double epoch_epsilon = sampling_probability(state.iteration, c.sampling_tau);
    std::vector<std::size_t> order = train_ids;
    rng.shuffle(std::span<std::size_t>(order));
    const AdamConfig adam{state.lr, c.beta1, c.beta2, c.adam_eps};

    double loss_sum = 0.0, weight_sum = 0.0;
    for (std::size_t begin = 0, batch_no = 0; begin < order.size(); begin += c.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), begin + c.batch_size);
      std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      const Batch batch = make_batch(data, chunk, c.output_features);
      double observed = 0.0;
      for (const Tensor& m : batch.masks)
        for (double v : m.data()) observed += v;
      if (observed == 0.0) continue;

      params.zero_grad();
      Tape tape;
      TapeGuard guard(tape);
      ForwardOptions fo;
      fo.training = true;
      fo.epsilon = sampling_probability(state.iteration, c.sampling_tau);
      fo.rng = &rng;
      const ForwardResult out = model.forward(batch, fo);
      const Tensor loss = masked_mae(out.predictions, batch.targets, batch.masks);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(state.epoch + 1) + ", batch " +
                           std::to_string(batch_no) + "; parameter norms:" + parameter_norms(params));
      }
      tape.backward(loss);
      try {
        adam_step(params, state.adam, adam);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(state.epoch + 1) + ", batch " +
                           std::to_string(batch_no) + "; parameter norms:" + parameter_norms(params));
      }
      ++state.iteration;
      loss_sum += value * observed;
      weight_sum += observed;
    }
    const double train_loss = weight_sum > 0.0 ? loss_sum / weight_sum : 0.0;
    const double val_loss = has_val ? evaluate_loss(model, data, Split::Val) : train_loss;
    if (!std::isfinite(val_loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(state.epoch + 1) +
                         "; parameter norms:" + parameter_norms(params));
    }

    ++state.epoch;
    state.history.push_back({state.epoch, train_loss, val_loss, epoch_epsilon, state.lr});
    if (val_loss < state.best_val) {
      state.best_val = val_loss;
      state.best = params.flatten();
      state.epochs_since_best = 0;
    } else {
      ++state.epochs_since_best;
      if (c.patience > 0 && state.epochs_since_best % c.patience == 0) state.lr *= 0.5;
      if (c.stall > 0 && state.epochs_since_best >= c.stall) state.stopped = true;
    }
    if (options.on_epoch) options.on_epoch(state.history.back());
  }
  state.rng_state = rng.serialize();
  state.current = params.flatten();
  params.assign(state.best);
}

}  // namespace msgc
