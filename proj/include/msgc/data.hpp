#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msgc/graph.hpp"

namespace msgc {

/// Seconds since 1970-01-01T00:00:00 UTC.
using Timestamp = std::int64_t;

Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(Timestamp ts);

/// Dense sensor readings on a uniform time grid: values[t][node][feature] with an
/// observed-mask of the same layout.
class SeriesTable {
 public:
  SeriesTable() = default;
  SeriesTable(std::vector<std::string> node_ids, Timestamp start, std::int64_t spacing_seconds, std::size_t steps,
              std::size_t features);

  std::size_t steps() const { return steps_; }
  std::size_t nodes() const { return node_ids_.size(); }
  std::size_t features() const { return features_; }
  const std::vector<std::string>& node_ids() const { return node_ids_; }

  Timestamp start() const { return start_; }
  std::int64_t spacing_seconds() const { return spacing_; }
  double delta_minutes() const { return static_cast<double>(spacing_) / 60.0; }
  Timestamp timestamp(std::size_t t) const { return start_ + static_cast<Timestamp>(t) * spacing_; }

  /// Slots per day; throws DataError when the spacing does not divide a day.
  std::size_t slots_per_day() const;
  /// 0 = Monday.
  std::size_t day_of_week(std::size_t t) const;
  std::size_t slot_of_day(std::size_t t) const;
  /// Row of the weekly temporal embedding for step t.
  std::size_t temporal_row(std::size_t t) const;

  double& value(std::size_t t, std::size_t n, std::size_t f) { return values_[index(t, n, f)]; }
  double value(std::size_t t, std::size_t n, std::size_t f) const { return values_[index(t, n, f)]; }
  bool observed(std::size_t t, std::size_t n, std::size_t f) const { return mask_[index(t, n, f)] != 0; }
  void set_observed(std::size_t t, std::size_t n, std::size_t f, bool on) { mask_[index(t, n, f)] = on ? 1 : 0; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }

  /// Steps [begin, end) as a new table.
  SeriesTable slice_steps(std::size_t begin, std::size_t end) const;

  bool operator==(const SeriesTable&) const = default;

 private:
  std::size_t index(std::size_t t, std::size_t n, std::size_t f) const { return (t * nodes() + n) * features_ + f; }

  std::vector<std::string> node_ids_;
  Timestamp start_ = 0;
  std::int64_t spacing_ = 300;
  std::size_t steps_ = 0;
  std::size_t features_ = 1;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// Reads `timestamp,node_id,feature_0[,feature_1,...]`. Missing (timestamp, node) rows and
/// empty/nan fields become unobserved cells. The grid spacing is the smallest gap between
/// distinct timestamps; every gap must be a multiple of it.
SeriesTable ingest(const std::string& readings_path, const std::vector<std::string>& node_ids);

/// Writes every row with at least one observed feature, in the ingest format.
void export_readings(const std::string& path, const SeriesTable& table);

enum class Split { Train, Val, Test };
const char* split_name(Split s);

struct Window {
  std::size_t start;  // first input step
  Split split;
};

/// Sliding windows over a table: inputs are steps [start, start+P), targets
/// [start+P, start+P+Q). Windows are assigned to the chronological split that contains all
/// of their steps; windows crossing a boundary are dropped.
struct WindowedDataset {
  std::size_t input_steps = 0;   // P
  std::size_t output_steps = 0;  // Q
  std::size_t train_end = 0;     // first step not in the training split
  std::size_t val_end = 0;       // first step of the test split
  std::size_t total_steps = 0;
  std::vector<Window> windows;

  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const { return indices(split).size(); }
};

struct SplitFractions {
  double train = 0.7;
  double val = 0.8;  // cumulative boundary
};

WindowedDataset windowize(const SeriesTable& table, std::size_t P, std::size_t Q, std::size_t stride = 1,
                          SplitFractions fractions = {});

/// Count of usable windows before splitting.
inline std::size_t usable_windows(std::size_t total, std::size_t P, std::size_t Q) {
  return total >= P + Q ? total - P - Q + 1 : 0;
}

/// Sets round(ratio * observed) uniformly chosen observed value cells to 0; the mask is kept.
SeriesTable inject_faults(const SeriesTable& table, double ratio, std::uint64_t seed);

/// Keeps round(proportion * days) whole days. Contiguous mode keeps the leading days; the
/// alternative draws a seeded contiguous block of days at a random offset.
SeriesTable subsample(const SeriesTable& table, double proportion, std::uint64_t seed, std::size_t P,
                      std::size_t Q, bool contiguous_prefix = true);

struct SynthOptions {
  std::size_t n_nodes = 8;
  std::size_t days = 28;
  std::size_t delta_minutes = 5;
  std::uint64_t seed = 0;
  double area_km = 15.0;         // nodes are placed uniformly in a square of this side
  double link_radius_km = 7.0;   // pairs closer than this are road-connected
  double travel_speed_kmh = 30.0;
  double base_speed = 60.0;
  double daily_amplitude = 8.0;
  double weekend_offset = 4.0;
  double ar_coeff = 0.9;         // total persistence of the disturbance, < 1
  double diffusion = 0.5;        // share of the persistence drawn from lagged neighbours
  double innovation_std = 3.0;
  double noise_std = 0.5;        // observation noise
};

struct SynthResult {
  SeriesTable table;
  TrafficGraph graph;
  /// Integer lag (steps) per directed road link; 0 where unlinked.
  std::vector<std::vector<std::size_t>> lags;
};

/// Random geometric road graph with speeds = daily sinusoid + disturbance + noise. The
/// disturbance of node j follows
///   d_j(t) = ar * ((1 - diffusion) d_j(t-1) + diffusion * mean_i d_i(t - lag_ij)) + innovation,
/// with lag_ij = max(1, round(M_ij / delta)) over j's road neighbours i.
SynthResult synthesize(const SynthOptions& options);

}  // namespace msgc
