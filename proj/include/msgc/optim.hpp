#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "msgc/rng.hpp"
#include "msgc/tensor.hpp"

namespace msgc {

/// Ordered, named collection of trainable tensors.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  /// Weight matrix [out, in] drawn from U(-a, a), a = sqrt(6 / (in + out)).
  Tensor add_weight(const std::string& name, std::size_t out, std::size_t in, Rng& rng);
  /// Zero-initialised parameter.
  Tensor add_zeros(const std::string& name, Shape shape);
  Tensor add(const std::string& name, Tensor value);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;
  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;

  void zero_grad();
  /// Flattened parameter values, in registration order.
  std::vector<double> flatten() const;
  void assign(const std::vector<double>& values);

 private:
  std::vector<Entry> entries_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers plus the step counter of a bias-corrected Adam optimizer.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One Adam update over every parameter that has a gradient. Parameters without a
/// gradient buffer are treated as having zero gradient. Throws NumericError naming the
/// parameter when a gradient is non-finite; nothing is modified in that case.
void adam_step(const ParameterSet& params, AdamState& state, const AdamConfig& config);

}  // namespace msgc
