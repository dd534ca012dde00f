#include "msgc/optim.hpp"

#include <cmath>

#include "msgc/error.hpp"

namespace msgc {

Tensor ParameterSet::add_weight(const std::string& name, std::size_t out, std::size_t in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> values(out * in);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return add(name, Tensor::parameter({out, in}, std::move(values)));
}

Tensor ParameterSet::add_zeros(const std::string& name, Shape shape) {
  const std::size_t n = shape_numel(shape);
  return add(name, Tensor::parameter(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  value.set_requires_grad(true);
  entries_.push_back({name, value});
  return value;
}

std::size_t ParameterSet::total_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ContractError("unknown parameter '" + name + "'");
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> out;
  out.reserve(total_values());
  for (const auto& e : entries_) out.insert(out.end(), e.tensor.data().begin(), e.tensor.data().end());
  return out;
}

void ParameterSet::assign(const std::vector<double>& values) {
  if (values.size() != total_values()) {
    throw DimensionError("parameter assign: " + std::to_string(values.size()) + " values for " +
                         std::to_string(total_values()));
  }
  std::size_t offset = 0;
  for (auto& e : entries_) {
    auto dst = e.tensor.mutable_data();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
    offset += dst.size();
  }
}

void adam_step(const ParameterSet& params, AdamState& state, const AdamConfig& config) {
  const auto& entries = params.entries();
  for (const auto& e : entries) {
    for (double g : e.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + e.name + "'");
    }
  }
  if (state.m.size() != entries.size()) {
    state.m.assign(entries.size(), {});
    state.v.assign(entries.size(), {});
    for (std::size_t i = 0; i < entries.size(); ++i) {
      state.m[i].assign(entries[i].tensor.numel(), 0.0);
      state.v[i].assign(entries[i].tensor.numel(), 0.0);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor p = entries[i].tensor;
    auto values = p.mutable_data();
    const auto grad = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      values[j] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace msgc
