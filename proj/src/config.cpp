#include "msgc/config.hpp"

#include <fstream>

#include "msgc/error.hpp"

namespace msgc {

using nlohmann::json;

namespace {

#define MSGC_CONFIG_FIELDS(X)                                                                              \
  X(input_steps) X(output_steps) X(input_features) X(output_features) X(fusion_dim) X(spatial_emb_dim)     \
  X(temporal_emb_dim) X(key_dim) X(semantic_dim) X(adjacent_dim) X(reach_dim) X(encoder_dim) X(decoder_dim) \
  X(attention_dim) X(heads) X(gcn_layers) X(rnn_layers) X(use_temporal_emb) X(use_spatial_emb)             \
  X(use_adjacent) X(use_semantic) X(use_reachability) X(use_temporal_attention) X(linear_head)             \
  X(normalize_attention_matrices) X(adjacency_threshold) X(mean_speed_kmh) X(stride) X(train_fraction)     \
  X(val_fraction) X(subsample_prefix) X(seed) X(lr) X(beta1) X(beta2) X(adam_eps) X(batch_size)            \
  X(max_epochs) X(patience) X(stall) X(sampling_tau)

#define MSGC_EMBEDDING_FIELDS(X) \
  X(walks_per_node) X(walk_length) X(window) X(negatives) X(epochs) X(lr) X(p) X(q) X(wrap_week)

}  // namespace

void to_json(json& j, const ModelConfig& c) {
  j = json::object();
#define X(name) j[#name] = c.name;
  MSGC_CONFIG_FIELDS(X)
#undef X
  json e = json::object();
#define X(name) e[#name] = c.embedding.name;
  MSGC_EMBEDDING_FIELDS(X)
#undef X
  j["embedding"] = e;
}

void from_json(const json& j, ModelConfig& c) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    try {
      bool known = false;
#define X(name)                        \
  if (key == #name) {                  \
    it.value().get_to(c.name);         \
    known = true;                      \
  }
      MSGC_CONFIG_FIELDS(X)
#undef X
      if (key == "embedding") {
        if (!it.value().is_object()) throw UsageError("config 'embedding' must be an object");
        for (auto e = it.value().begin(); e != it.value().end(); ++e) {
          bool known_e = false;
#define X(name)                              \
  if (e.key() == #name) {                    \
    e.value().get_to(c.embedding.name);      \
    known_e = true;                          \
  }
          MSGC_EMBEDDING_FIELDS(X)
#undef X
          if (!known_e) throw UsageError("unknown config key 'embedding." + e.key() + "'");
        }
        known = true;
      }
      if (!known) throw UsageError("unknown config key '" + key + "'");
    } catch (const json::exception& ex) {
      throw UsageError("config key '" + key + "': " + ex.what());
    }
  }
}

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> errors;
  auto positive = [&](std::size_t v, const char* name) {
    if (v == 0) errors.push_back(std::string(name) + " must be >= 1");
  };
  positive(input_steps, "input_steps");
  positive(output_steps, "output_steps");
  positive(input_features, "input_features");
  positive(output_features, "output_features");
  positive(fusion_dim, "fusion_dim");
  positive(spatial_emb_dim, "spatial_emb_dim");
  positive(temporal_emb_dim, "temporal_emb_dim");
  positive(semantic_dim, "semantic_dim");
  positive(adjacent_dim, "adjacent_dim");
  positive(reach_dim, "reach_dim");
  positive(encoder_dim, "encoder_dim");
  positive(decoder_dim, "decoder_dim");
  positive(heads, "heads");
  positive(gcn_layers, "gcn_layers");
  positive(rnn_layers, "rnn_layers");
  positive(stride, "stride");
  positive(batch_size, "batch_size");
  positive(embedding.walk_length > 1 ? 1 : 0, "embedding.walk_length - 1");
  if (output_features > input_features) errors.push_back("output_features must not exceed input_features");
  if (!(lr >= 0.0)) errors.push_back("lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) errors.push_back("beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) errors.push_back("beta2 must lie in [0,1)");
  if (!(adam_eps > 0.0)) errors.push_back("adam_eps must be > 0");
  if (!(sampling_tau > 0.0)) errors.push_back("sampling_tau must be > 0");
  if (!(adjacency_threshold >= 0.0)) errors.push_back("adjacency_threshold must be >= 0");
  if (!(mean_speed_kmh >= 0.0)) errors.push_back("mean_speed_kmh must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < val_fraction && val_fraction < 1.0)) {
    errors.push_back("need 0 < train_fraction < val_fraction < 1");
  }
  if (!(embedding.p > 0.0 && embedding.q > 0.0)) errors.push_back("embedding.p and embedding.q must be > 0");
  if (!(embedding.lr > 0.0)) errors.push_back("embedding.lr must be > 0");
  return errors;
}

void ModelConfig::require_valid() const {
  const auto errors = validate();
  if (errors.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  - " + e;
  throw UsageError(msg);
}

void ModelConfig::ablate(const std::string& branch) {
  if (branch == "semantic") {
    use_semantic = false;
  } else if (branch == "adjacent") {
    use_adjacent = false;
  } else if (branch == "reachability") {
    use_reachability = false;
  } else if (branch == "temporal_attention") {
    use_temporal_attention = false;
  } else if (branch == "temporal_embedding") {
    use_temporal_emb = false;
  } else if (branch == "spatial_embedding") {
    use_spatial_emb = false;
  } else {
    throw UsageError("unknown ablation '" + branch +
                     "' (expected semantic, adjacent, reachability, temporal_attention, temporal_embedding, "
                     "spatial_embedding)");
  }
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw UsageError("config '" + path + "': " + ex.what());
  }
  ModelConfig c;
  from_json(j, c);
  return c;
}

void save_config(const std::string& path, const ModelConfig& config) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write config '" + path + "'");
  out << json(config).dump(2) << '\n';
}

void apply_overrides(ModelConfig& config, const std::vector<std::string>& overrides) {
  json j = config;
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("override '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      if (!j.contains(key)) throw UsageError("unknown config key '" + key + "'");
      j[key] = value;
    } else {
      const std::string head = key.substr(0, dot), tail = key.substr(dot + 1);
      if (!j.contains(head) || !j[head].is_object() || !j[head].contains(tail)) {
        throw UsageError("unknown config key '" + key + "'");
      }
      j[head][tail] = value;
    }
  }
  ModelConfig updated;
  from_json(j, updated);
  config = updated;
}

}  // namespace msgc
