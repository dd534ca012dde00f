#pragma once

// Dense double-precision tensors with a dynamic reverse-mode tape.
//
// Operations record themselves on the tape installed by a TapeGuard when at least one
// operand requires a gradient. Without an active tape every op is a plain forward
// computation (inference mode).
//
// Broadcasting is deliberately narrow: scalar-with-tensor (scale, add_scalar), a row-vector
// bias over the last axis (add_bias), a per-row weight over the last axis (scale_rows), and
// the batch axis of matmul. Everything else must have equal shapes.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace msgc {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient flows into this tensor
  bool requires_grad = false;
  std::uint64_t id = 0;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Shared handle to a tensor node. Copies alias the same storage, like parameters in
/// other autodiff frameworks; use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  /// Leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); }

  std::uint64_t node_id() const { return impl_->id; }

  /// Same values, no gradient tracking.
  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  static Tensor from_impl(std::shared_ptr<detail::TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Ordered record of primitive operations for one forward pass.
class Tape {
 public:
  using Backward = std::function<void(std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::string_view op, std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
              std::shared_ptr<detail::TensorImpl> output, Backward backward);

  /// Seeds d(loss)=1 and runs every recorded adjoint once, in reverse recording order.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }
  /// Text listing of the recorded operations, one per line.
  std::string dump() const;

  /// Tape installed on this thread, or nullptr.
  static Tape* current();

 private:
  struct Entry {
    std::string_view op;
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    Backward backward;
  };
  std::vector<Entry> entries_;
  friend class TapeGuard;
};

/// Installs a tape as the recording target for the current thread for its lifetime.
class TapeGuard {
 public:
  explicit TapeGuard(Tape& tape);
  ~TapeGuard();
  TapeGuard(const TapeGuard&) = delete;
  TapeGuard& operator=(const TapeGuard&) = delete;

 private:
  Tape* previous_;
};

// Linear algebra. Accepted operand ranks: [m,k]x[k,n], [B,m,k]x[B,k,n], [m,k]x[B,k,n]
// (left operand shared across the batch) and [B,m,k]x[k,n] (right operand shared).
Tensor matmul(const Tensor& a, const Tensor& b);
/// a times the transpose of the last two axes of b; b is [n,k] or [B,n,k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// Swaps the last two axes.
Tensor transpose(const Tensor& a);

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor abs(const Tensor& a);

/// x[..., f] + bias[f].
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x[..., f] * w[..., 0]: one weight per row of the last axis.
Tensor scale_rows(const Tensor& x, const Tensor& w);

/// Softmax over the last axis, stabilised by subtracting the row maximum.
Tensor softmax_rows(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

/// Sum of all entries as a rank-0 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace msgc
