#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msgc/config.hpp"
#include "msgc/network.hpp"
#include "msgc/training.hpp"

namespace msgc {

/// Self-describing model file: configuration, node ids, normalizer, frozen buffers,
/// named parameters with shapes, and optionally the state needed to resume training.
struct Checkpoint {
  struct Parameter {
    std::string name;
    Shape shape;
    std::vector<double> values;
    bool operator==(const Parameter&) const = default;
  };

  ModelConfig config;
  std::vector<std::string> node_ids;
  Normalizer normalizer;
  FixedInputs fixed;
  std::vector<Parameter> parameters;
  std::optional<TrainState> training;

  /// Model with these parameters; checks that names and shapes match the configuration.
  Model make_model() const;
};

Checkpoint make_checkpoint(const Model& model, const std::vector<std::string>& node_ids,
                           const Normalizer& normalizer, const TrainState* state = nullptr);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace msgc
