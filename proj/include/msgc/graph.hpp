#pragma once

#include <string>
#include <vector>

#include "msgc/matrix.hpp"

namespace msgc {

/// Sensor network: ids, pairwise road distances (metres, +inf when unknown), thresholded
/// kernel adjacency and travel times (minutes, +inf when unreachable).
struct TrafficGraph {
  std::vector<std::string> node_ids;
  Matrix distances;
  Matrix adjacency;
  Matrix travel_time;

  std::size_t size() const { return node_ids.size(); }
  /// Position of `id` in node_ids; throws IngestionError when absent.
  std::size_t index_of(const std::string& id) const;
};

/// Gaussian kernel adjacency: A_ij = exp(-d_ij^2 / sigma^2) when that is >= threshold,
/// else 0, with sigma the population standard deviation of all finite off-diagonal
/// distances. A zero distance always yields weight 1. Diagonal is 0.
Matrix build_adjacency(const Matrix& distances, double threshold = 0.1);

/// I - D^{-1/2} A D^{-1/2}, D = diag(row sums); zero-degree nodes use D^{-1/2} = 0.
Matrix normalized_matrix(const Matrix& adjacency);

/// Travel minutes from distances at a constant speed (km/h); unknown distance -> +inf.
Matrix travel_time_from_speed(const Matrix& distances, double mean_speed_kmh);

/// Reads `from,to,minutes` rows and overrides the corresponding entries of `travel_time`.
void apply_travel_time_file(const std::string& path, const std::vector<std::string>& node_ids,
                            Matrix& travel_time);

/// One id per line.
std::vector<std::string> read_node_list(const std::string& path);
void write_node_list(const std::string& path, const std::vector<std::string>& ids);

/// Reads `from,to,distance_m` rows into an N x N matrix (+inf where absent, 0 on the
/// diagonal). With `undirected`, a row (i,j) also fills (j,i) unless that pair is given.
Matrix read_distance_file(const std::string& path, const std::vector<std::string>& node_ids,
                          bool undirected = true);
/// Writes every finite off-diagonal entry.
void write_distance_file(const std::string& path, const std::vector<std::string>& node_ids,
                         const Matrix& distances);
void write_travel_time_file(const std::string& path, const std::vector<std::string>& node_ids,
                            const Matrix& travel_time);

struct GraphBuildOptions {
  double threshold = 0.1;
  double mean_speed_kmh = 60.0;
  bool undirected = true;
  std::string travel_time_file;  // optional override
};

/// Assembles a TrafficGraph from the node list and distance file.
TrafficGraph load_graph(const std::string& nodes_path, const std::string& distances_path,
                        const GraphBuildOptions& options);

/// Builds adjacency and travel times for an in-memory distance matrix.
TrafficGraph make_graph(std::vector<std::string> node_ids, Matrix distances, const GraphBuildOptions& options);

}  // namespace msgc
