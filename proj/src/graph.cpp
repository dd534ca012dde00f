#include "msgc/graph.hpp"

#include <cmath>
#include <limits>

#include "msgc/csv.hpp"
#include "msgc/error.hpp"

namespace msgc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected square matrix, got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

}  // namespace

std::size_t TrafficGraph::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < node_ids.size(); ++i)
    if (node_ids[i] == id) return i;
  throw IngestionError("unknown node '" + id + "'");
}

Matrix build_adjacency(const Matrix& distances, double threshold) {
  require_square(distances, "build_adjacency");
  const std::size_t n = distances.rows();
  if (n < 2) throw DegenerateGraphError("build_adjacency: need at least 2 nodes");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = distances(i, j);
      if (i == j || !std::isfinite(d)) continue;
      if (d < 0.0) throw DataError("build_adjacency: negative distance");
      total += d;
      ++count;
    }
  if (count == 0) throw DegenerateGraphError("build_adjacency: every pairwise distance is infinite");
  const double mu = total / static_cast<double>(count);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = distances(i, j);
      if (i != j && std::isfinite(d)) var += (d - mu) * (d - mu);
    }
  const double sigma = std::sqrt(var / static_cast<double>(count));

  Matrix adj(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = distances(i, j);
      if (i == j || !std::isfinite(d)) continue;
      double w;
      if (d == 0.0) {
        w = 1.0;
      } else if (sigma == 0.0) {
        w = 0.0;
      } else {
        const double r = d / sigma;
        w = std::exp(-r * r);
      }
      adj(i, j) = w >= threshold ? w : 0.0;
    }
  return adj;
}

Matrix normalized_matrix(const Matrix& adjacency) {
  require_square(adjacency, "normalized_matrix");
  const std::size_t n = adjacency.rows();
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (double v : adjacency.row(i)) deg += v;
    if (deg > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Matrix out = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) -= inv_sqrt[i] * adjacency(i, j) * inv_sqrt[j];
  return out;
}

Matrix travel_time_from_speed(const Matrix& distances, double mean_speed_kmh) {
  require_square(distances, "travel_time_from_speed");
  if (!(mean_speed_kmh > 0.0) || !std::isfinite(mean_speed_kmh)) {
    throw DataError("travel time: mean speed must be positive, got " + std::to_string(mean_speed_kmh));
  }
  const double metres_per_minute = mean_speed_kmh * 1000.0 / 60.0;
  const std::size_t n = distances.rows();
  Matrix out(n, n, kInf);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        out(i, j) = 0.0;
      } else if (std::isfinite(distances(i, j))) {
        out(i, j) = distances(i, j) / metres_per_minute;
      }
    }
  return out;
}

void apply_travel_time_file(const std::string& path, const std::vector<std::string>& node_ids,
                            Matrix& travel_time) {
  TrafficGraph lookup{node_ids, {}, {}, {}};
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() < 3 || f[0] != "from" || f[1] != "to" || f[2] != "minutes") {
    throw IngestionError(path + ": expected header 'from,to,minutes'");
  }
  while (reader.next(f)) {
    if (f.size() != 3) throw IngestionError(path + ":" + std::to_string(reader.line_number()) + ": expected 3 fields");
    const std::size_t i = lookup.index_of(f[0]);
    const std::size_t j = lookup.index_of(f[1]);
    const double minutes = csv::parse_double(f[2], path);
    if (minutes < 0.0) throw IngestionError(path + ": negative travel time");
    if (i != j) travel_time(i, j) = minutes;
  }
}

std::vector<std::string> read_node_list(const std::string& path) {
  csv::Reader reader(path);
  std::vector<std::string> ids;
  std::string line;
  while (reader.next_line(line)) ids.emplace_back(csv::trim(line));
  if (ids.empty()) throw IngestionError(path + ": empty node list");
  return ids;
}

void write_node_list(const std::string& path, const std::vector<std::string>& ids) {
  auto out = csv::open_output(path);
  for (const auto& id : ids) out << id << '\n';
}

Matrix read_distance_file(const std::string& path, const std::vector<std::string>& node_ids, bool undirected) {
  TrafficGraph lookup{node_ids, {}, {}, {}};
  const std::size_t n = node_ids.size();
  Matrix dist(n, n, kInf);
  Matrix given(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) dist(i, i) = 0.0;
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() < 3 || f[0] != "from" || f[1] != "to" || f[2] != "distance_m") {
    throw IngestionError(path + ": expected header 'from,to,distance_m'");
  }
  struct Row {
    std::size_t i, j;
    double d;
  };
  std::vector<Row> rows;
  while (reader.next(f)) {
    if (f.size() != 3) throw IngestionError(path + ":" + std::to_string(reader.line_number()) + ": expected 3 fields");
    Row r{lookup.index_of(f[0]), lookup.index_of(f[1]), csv::parse_double(f[2], path)};
    if (r.d < 0.0) throw IngestionError(path + ": negative distance");
    rows.push_back(r);
    given(r.i, r.j) = 1.0;
  }
  for (const Row& r : rows) dist(r.i, r.j) = r.d;
  if (undirected) {
    for (const Row& r : rows)
      if (given(r.j, r.i) == 0.0) dist(r.j, r.i) = r.d;
  }
  return dist;
}

void write_distance_file(const std::string& path, const std::vector<std::string>& node_ids, const Matrix& distances) {
  auto out = csv::open_output(path);
  out << "from,to,distance_m\n";
  for (std::size_t i = 0; i < distances.rows(); ++i)
    for (std::size_t j = 0; j < distances.cols(); ++j)
      if (i != j && std::isfinite(distances(i, j)))
        out << node_ids[i] << ',' << node_ids[j] << ',' << format_double(distances(i, j)) << '\n';
}

void write_travel_time_file(const std::string& path, const std::vector<std::string>& node_ids,
                            const Matrix& travel_time) {
  auto out = csv::open_output(path);
  out << "from,to,minutes\n";
  for (std::size_t i = 0; i < travel_time.rows(); ++i)
    for (std::size_t j = 0; j < travel_time.cols(); ++j)
      if (i != j && std::isfinite(travel_time(i, j)))
        out << node_ids[i] << ',' << node_ids[j] << ',' << format_double(travel_time(i, j)) << '\n';
}

TrafficGraph make_graph(std::vector<std::string> node_ids, Matrix distances, const GraphBuildOptions& options) {
  if (distances.rows() != node_ids.size()) {
    throw DimensionError("graph: " + std::to_string(node_ids.size()) + " ids for " +
                         std::to_string(distances.rows()) + " distance rows");
  }
  TrafficGraph g;
  g.node_ids = std::move(node_ids);
  g.adjacency = build_adjacency(distances, options.threshold);
  g.travel_time = travel_time_from_speed(distances, options.mean_speed_kmh);
  g.distances = std::move(distances);
  if (!options.travel_time_file.empty()) apply_travel_time_file(options.travel_time_file, g.node_ids, g.travel_time);
  return g;
}

TrafficGraph load_graph(const std::string& nodes_path, const std::string& distances_path,
                        const GraphBuildOptions& options) {
  auto ids = read_node_list(nodes_path);
  auto dist = read_distance_file(distances_path, ids, options.undirected);
  return make_graph(std::move(ids), std::move(dist), options);
}

}  // namespace msgc
