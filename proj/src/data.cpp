#include "msgc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>

#include "msgc/csv.hpp"
#include "msgc/embedding.hpp"
#include "msgc/error.hpp"
#include "msgc/rng.hpp"

namespace msgc {

namespace {

constexpr std::int64_t kDay = 86400;

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

Timestamp parse_timestamp(const std::string& text) {
  std::string s(csv::trim(text));
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.pop_back();
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char sep = 0;
  int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &sec);
  if (n < 6 || (sep != 'T' && sep != ' ') || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || sec < 0 || sec > 60) {
    throw IngestionError("invalid ISO-8601 timestamp '" + text + "'");
  }
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * kDay + h * 3600 + mi * 60 + sec;
}

std::string format_timestamp(Timestamp ts) {
  const std::int64_t days = floor_div(ts, kDay);
  std::int64_t rem = ts - days * kDay;
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld", static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600), static_cast<long long>((rem % 3600) / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

// ---------------------------------------------------------------------------------------------
// SeriesTable

SeriesTable::SeriesTable(std::vector<std::string> node_ids, Timestamp start, std::int64_t spacing_seconds,
                         std::size_t steps, std::size_t features)
    : node_ids_(std::move(node_ids)),
      start_(start),
      spacing_(spacing_seconds),
      steps_(steps),
      features_(features),
      values_(steps * node_ids_.size() * features, 0.0),
      mask_(steps * node_ids_.size() * features, 0) {
  if (spacing_seconds <= 0) throw DataError("series spacing must be positive");
  if (features == 0) throw DataError("series needs at least one feature");
}

std::size_t SeriesTable::slots_per_day() const {
  if (kDay % spacing_ != 0) {
    throw DataError("spacing of " + std::to_string(spacing_) + " s does not divide a day");
  }
  return static_cast<std::size_t>(kDay / spacing_);
}

std::size_t SeriesTable::day_of_week(std::size_t t) const {
  const std::int64_t days = floor_div(timestamp(t), kDay);
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  return static_cast<std::size_t>(((days % 7) + 7 + 3) % 7);
}

std::size_t SeriesTable::slot_of_day(std::size_t t) const {
  const std::int64_t ts = timestamp(t);
  const std::int64_t within = ts - floor_div(ts, kDay) * kDay;
  return static_cast<std::size_t>(within / spacing_);
}

std::size_t SeriesTable::temporal_row(std::size_t t) const {
  return temporal_index(day_of_week(t), slot_of_day(t), slots_per_day());
}

SeriesTable SeriesTable::slice_steps(std::size_t begin, std::size_t end) const {
  if (begin > end || end > steps_) throw IndexError("slice_steps out of range");
  SeriesTable out(node_ids_, timestamp(begin), spacing_, end - begin, features_);
  const std::size_t stride = nodes() * features_;
  std::copy(values_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
            values_.begin() + static_cast<std::ptrdiff_t>(end * stride), out.values_.begin());
  std::copy(mask_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
            mask_.begin() + static_cast<std::ptrdiff_t>(end * stride), out.mask_.begin());
  return out;
}

// ---------------------------------------------------------------------------------------------
// Ingest / export

SeriesTable ingest(const std::string& readings_path, const std::vector<std::string>& node_ids) {
  std::map<std::string, std::size_t> node_index;
  for (std::size_t i = 0; i < node_ids.size(); ++i) node_index[node_ids[i]] = i;

  csv::Reader reader(readings_path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() < 3 || f[0] != "timestamp" || f[1] != "node_id") {
    throw IngestionError(readings_path + ": expected header 'timestamp,node_id,feature_0,...'");
  }
  const std::size_t features = f.size() - 2;
  struct Row {
    Timestamp ts;
    std::size_t node;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  while (reader.next(f)) {
    const std::string where = readings_path + ":" + std::to_string(reader.line_number());
    if (f.size() != features + 2) throw IngestionError(where + ": expected " + std::to_string(features + 2) + " fields");
    auto it = node_index.find(f[1]);
    if (it == node_index.end()) throw IngestionError(where + ": unknown node '" + f[1] + "'");
    Row row{parse_timestamp(f[0]), it->second, {}};
    for (std::size_t k = 0; k < features; ++k) {
      row.values.push_back(f[k + 2].empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : csv::parse_double(f[k + 2], where));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IngestionError(readings_path + ": no readings");

  std::vector<Timestamp> stamps;
  for (const Row& r : rows) stamps.push_back(r.ts);
  std::sort(stamps.begin(), stamps.end());
  stamps.erase(std::unique(stamps.begin(), stamps.end()), stamps.end());
  std::int64_t spacing = 0;
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    const std::int64_t gap = stamps[i] - stamps[i - 1];
    if (spacing == 0 || gap < spacing) spacing = gap;
  }
  if (spacing == 0) spacing = 300;
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    if ((stamps[i] - stamps[i - 1]) % spacing != 0) {
      throw IngestionError(readings_path + ": irregular spacing between " + format_timestamp(stamps[i - 1]) +
                           " and " + format_timestamp(stamps[i]) + " (grid " + std::to_string(spacing) + " s)");
    }
  }
  const std::size_t steps = static_cast<std::size_t>((stamps.back() - stamps.front()) / spacing) + 1;
  SeriesTable table(node_ids, stamps.front(), spacing, steps, features);
  std::vector<std::uint8_t> seen(steps * node_ids.size(), 0);
  for (const Row& r : rows) {
    const std::size_t t = static_cast<std::size_t>((r.ts - stamps.front()) / spacing);
    auto& flag = seen[t * node_ids.size() + r.node];
    if (flag) {
      throw IngestionError(readings_path + ": duplicate reading for node '" + node_ids[r.node] + "' at " +
                           format_timestamp(r.ts));
    }
    flag = 1;
    for (std::size_t k = 0; k < features; ++k) {
      if (std::isfinite(r.values[k])) {
        table.value(t, r.node, k) = r.values[k];
        table.set_observed(t, r.node, k, true);
      }
    }
  }
  return table;
}

void export_readings(const std::string& path, const SeriesTable& table) {
  auto out = csv::open_output(path);
  out << "timestamp,node_id";
  for (std::size_t k = 0; k < table.features(); ++k) out << ",feature_" << k;
  out << '\n';
  for (std::size_t t = 0; t < table.steps(); ++t) {
    const std::string ts = format_timestamp(table.timestamp(t));
    for (std::size_t n = 0; n < table.nodes(); ++n) {
      bool any = false;
      for (std::size_t k = 0; k < table.features(); ++k) any = any || table.observed(t, n, k);
      if (!any) continue;
      out << ts << ',' << table.node_ids()[n];
      for (std::size_t k = 0; k < table.features(); ++k) {
        out << ',';
        if (table.observed(t, n, k)) out << format_double(table.value(t, n, k));
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------------------------
// Windows

const char* split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "?";
}

std::vector<std::size_t> WindowedDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < windows.size(); ++i)
    if (windows[i].split == split) out.push_back(i);
  return out;
}

WindowedDataset windowize(const SeriesTable& table, std::size_t P, std::size_t Q, std::size_t stride,
                          SplitFractions fractions) {
  if (P == 0 || Q == 0 || stride == 0) throw ContractError("windowize: P, Q and stride must be positive");
  const std::size_t total = table.steps();
  if (total < P + Q) {
    throw DatasetTooSmallError("dataset has " + std::to_string(total) + " steps, need at least P+Q=" +
                               std::to_string(P + Q));
  }
  WindowedDataset ds;
  ds.input_steps = P;
  ds.output_steps = Q;
  ds.total_steps = total;
  ds.train_end = static_cast<std::size_t>(std::floor(fractions.train * static_cast<double>(total)));
  ds.val_end = static_cast<std::size_t>(std::floor(fractions.val * static_cast<double>(total)));
  for (std::size_t s = 0; s + P + Q <= total; s += stride) {
    const std::size_t last = s + P + Q;  // exclusive
    if (last <= ds.train_end) {
      ds.windows.push_back({s, Split::Train});
    } else if (s >= ds.train_end && last <= ds.val_end) {
      ds.windows.push_back({s, Split::Val});
    } else if (s >= ds.val_end) {
      ds.windows.push_back({s, Split::Test});
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------------------------
// Robustness transforms

SeriesTable inject_faults(const SeriesTable& table, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw UsageError("fault ratio must lie in [0,1]");
  SeriesTable out = table;
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < table.mask().size(); ++i)
    if (table.mask()[i]) cells.push_back(i);
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(cells.size())));
  if (count == 0) return out;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(cells));
  for (std::size_t k = 0; k < count; ++k) out.values()[cells[k]] = 0.0;
  return out;
}

SeriesTable subsample(const SeriesTable& table, double proportion, std::uint64_t seed, std::size_t P, std::size_t Q,
                      bool contiguous_prefix) {
  if (!(proportion > 0.0 && proportion <= 1.0)) throw UsageError("sampling proportion must lie in (0,1]");
  const std::size_t per_day = table.slots_per_day();
  const std::size_t days = (table.steps() + per_day - 1) / per_day;
  std::size_t keep = static_cast<std::size_t>(std::llround(proportion * static_cast<double>(days)));
  keep = std::clamp<std::size_t>(keep, 1, days);
  std::size_t first_day = 0;
  if (!contiguous_prefix && keep < days) {
    Rng rng(seed);
    first_day = rng.index(days - keep + 1);
  }
  const std::size_t begin = first_day * per_day;
  const std::size_t end = std::min(table.steps(), (first_day + keep) * per_day);
  if (end - begin < P + Q) {
    throw DatasetTooSmallError("subsample keeps " + std::to_string(end - begin) + " steps, need P+Q=" +
                               std::to_string(P + Q));
  }
  return table.slice_steps(begin, end);
}

// ---------------------------------------------------------------------------------------------
// Synthetic generator

SynthResult synthesize(const SynthOptions& o) {
  if (o.n_nodes < 2) throw ContractError("synthesize: need at least 2 nodes");
  if (o.delta_minutes == 0 || 1440 % o.delta_minutes != 0) {
    throw ContractError("synthesize: delta must divide a day");
  }
  Rng rng(o.seed);
  const std::size_t n = o.n_nodes;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));

  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform(0.0, o.area_km);
    y[i] = rng.uniform(0.0, o.area_km);
  }
  const double inf = std::numeric_limits<double>::infinity();
  Matrix dist(n, n, inf);
  for (std::size_t i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double km = std::hypot(x[i] - x[j], y[i] - y[j]);
      if (i != j && km <= o.link_radius_km) dist(i, j) = km * 1000.0;
    }
  }
  // Keep every node connected: link an isolated node to its nearest neighbour.
  for (std::size_t i = 0; i < n; ++i) {
    bool linked = false;
    for (std::size_t j = 0; j < n; ++j) linked = linked || (i != j && std::isfinite(dist(i, j)));
    if (linked) continue;
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && std::hypot(x[i] - x[j], y[i] - y[j]) < std::hypot(x[i] - x[best], y[i] - y[best])) best = j;
    const double m = std::hypot(x[i] - x[best], y[i] - y[best]) * 1000.0;
    dist(i, best) = dist(best, i) = m;
  }

  GraphBuildOptions gopt;
  gopt.mean_speed_kmh = o.travel_speed_kmh;
  SynthResult result;
  result.graph = make_graph(ids, dist, gopt);

  const double delta = static_cast<double>(o.delta_minutes);
  result.lags.assign(n, std::vector<std::size_t>(n, 0));
  std::vector<std::vector<std::size_t>> sources(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !std::isfinite(result.graph.travel_time(i, j))) continue;
      const auto lag = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(result.graph.travel_time(i, j) / delta)));
      result.lags[i][j] = lag;
      sources[j].push_back(i);
    }

  const std::size_t per_day = 1440 / o.delta_minutes;
  const std::size_t steps = o.days * per_day;
  // 2024-01-01 is a Monday.
  const Timestamp start = days_from_civil(2024, 1, 1) * kDay;
  SeriesTable table(ids, start, static_cast<std::int64_t>(o.delta_minutes) * 60, steps, 1);

  std::vector<double> phase(n);
  for (double& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> disturbance(steps * n, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      // Persistence ar_coeff is split between the node's own last value and the mean of its
      // neighbours' values one travel time ago, so the recursion stays stable.
      const double own = t > 0 ? disturbance[(t - 1) * n + j] : 0.0;
      double echo = own;
      if (!sources[j].empty()) {
        echo = 0.0;
        for (std::size_t i : sources[j]) {
          const std::size_t lag = result.lags[i][j];
          if (t >= lag) echo += disturbance[(t - lag) * n + i];
        }
        echo /= static_cast<double>(sources[j].size());
      }
      disturbance[t * n + j] =
          o.ar_coeff * ((1.0 - o.diffusion) * own + o.diffusion * echo) + o.innovation_std * rng.normal();
    }
  }
  for (std::size_t t = 0; t < steps; ++t) {
    const double day_frac = static_cast<double>(table.slot_of_day(t)) / static_cast<double>(per_day);
    const bool weekend = table.day_of_week(t) >= 5;
    for (std::size_t j = 0; j < n; ++j) {
      double v = o.base_speed + o.daily_amplitude * std::sin(2.0 * std::numbers::pi * day_frac + phase[j]) +
                 (weekend ? o.weekend_offset : 0.0) + disturbance[t * n + j] + o.noise_std * rng.normal();
      table.value(t, j, 0) = std::max(1.0, v);
      table.set_observed(t, j, 0, true);
    }
  }
  result.table = std::move(table);
  return result;
}

}  // namespace msgc
