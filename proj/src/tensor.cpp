#include "msgc/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "msgc/error.hpp"

namespace msgc {

namespace {

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

std::atomic<std::uint64_t> next_id{1};
thread_local Tape* active_tape = nullptr;

ImplPtr make_impl(Shape shape, std::vector<double> data) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->id = next_id.fetch_add(1, std::memory_order_relaxed);
  return impl;
}

Tensor wrap(ImplPtr impl) { return Tensor::from_impl(std::move(impl)); }

/// Records `op` when a tape is active and some input needs a gradient; returns the output.
Tensor emit(std::string_view op, Shape shape, std::vector<double> data, std::vector<ImplPtr> inputs,
            Tape::Backward backward) {
  auto out = make_impl(std::move(shape), std::move(data));
  Tape* tape = Tape::current();
  if (tape) {
    const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const ImplPtr& p) { return p->requires_grad; });
    if (needs) {
      out->requires_grad = true;
      tape->record(op, std::move(inputs), out, std::move(backward));
    }
  }
  return wrap(out);
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// C[m,n] (+)= op(A) * op(B), row-major, fixed loop order for reproducibility.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c) {
  // Operands are transposed into scratch buffers so that a single i-p-j kernel, whose inner
  // loop is a contiguous axpy, handles every case.
  thread_local std::vector<double> at, bt;
  if (trans_a) {
    at.resize(m * k);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) at[i * k + p] = a[p * m + i];
    a = at.data();
  }
  if (trans_b) {
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    b = bt.data();
  }
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct MatmulPlan {
  std::size_t batch = 1, m = 0, k = 0, n = 0;
  bool a_batched = false, b_batched = false;
  Shape out_shape;
};

MatmulPlan plan_matmul(std::string_view op, const Tensor& a, const Tensor& b, bool trans_b) {
  auto fail = [&] {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  };
  if (a.rank() < 2 || a.rank() > 3 || b.rank() < 2 || b.rank() > 3) fail();
  MatmulPlan plan;
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const std::size_t bk = trans_b ? bs[bs.size() - 1] : bs[bs.size() - 2];
  plan.n = trans_b ? bs[bs.size() - 2] : bs[bs.size() - 1];
  plan.k = as.back();
  if (plan.k != bk) fail();
  if (a.rank() == 3 && b.rank() == 2) {
    // Shared right operand: fold the batch into the row axis.
    plan.m = as[0] * as[1];
    plan.out_shape = {as[0], as[1], plan.n};
    return plan;
  }
  plan.m = as[as.size() - 2];
  if (a.rank() == 2 && b.rank() == 2) {
    plan.out_shape = {plan.m, plan.n};
    return plan;
  }
  plan.a_batched = a.rank() == 3;
  plan.b_batched = true;
  plan.batch = bs[0];
  if (plan.a_batched && as[0] != bs[0]) fail();
  plan.out_shape = {plan.batch, plan.m, plan.n};
  return plan;
}

Tensor matmul_impl(std::string_view op, const Tensor& a, const Tensor& b, bool trans_b) {
  const MatmulPlan plan = plan_matmul(op, a, b, trans_b);
  const std::size_t a_stride = plan.a_batched ? plan.m * plan.k : 0;
  const std::size_t b_stride = plan.b_batched ? plan.k * plan.n : 0;
  const std::size_t c_stride = plan.m * plan.n;
  std::vector<double> out(plan.batch * c_stride, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t s = 0; s < plan.batch; ++s) {
    gemm(false, trans_b, plan.m, plan.n, plan.k, ad + s * a_stride, bd + s * b_stride, out.data() + s * c_stride);
  }
  ImplPtr ai = a.impl(), bi = b.impl();
  return emit(op, plan.out_shape, std::move(out), {ai, bi},
              [ai, bi, plan, trans_b, a_stride, b_stride, c_stride](std::span<const double> g) {
                for (std::size_t s = 0; s < plan.batch; ++s) {
                  const double* gs = g.data() + s * c_stride;
                  if (ai->requires_grad) {
                    double* ga = ai->ensure_grad().data() + s * a_stride;
                    // dA = dC * op(B)^T
                    gemm(false, !trans_b, plan.m, plan.k, plan.n, gs, bi->data.data() + s * b_stride, ga);
                  }
                  if (bi->requires_grad) {
                    double* gb = bi->ensure_grad().data() + s * b_stride;
                    if (trans_b) {
                      gemm(true, false, plan.n, plan.k, plan.m, gs, ai->data.data() + s * a_stride, gb);
                    } else {
                      gemm(true, false, plan.k, plan.n, plan.m, ai->data.data() + s * a_stride, gs, gb);
                    }
                  }
                }
              });
}

}  // namespace

std::vector<double>& detail::TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) {
  const std::size_t n = shape_numel(shape);
  impl_ = make_impl(std::move(shape), std::vector<double>(n, fill));
}

Tensor::Tensor(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not hold " + std::to_string(data.size()) +
                         " values");
  }
  impl_ = make_impl(std::move(shape), std::move(data));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  t.set_requires_grad(true);
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw IndexError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data); }

Tensor Tensor::clone() const {
  Tensor t(shape(), impl_->data);
  t.set_requires_grad(requires_grad());
  return t;
}

// ---------------------------------------------------------------------------------------------
// Tape

Tape* Tape::current() { return active_tape; }

TapeGuard::TapeGuard(Tape& tape) : previous_(active_tape) { active_tape = &tape; }
TapeGuard::~TapeGuard() { active_tape = previous_; }

void Tape::record(std::string_view op, std::vector<ImplPtr> inputs, ImplPtr output, Backward backward) {
  entries_.push_back(Entry{op, std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined tensor")));
  }
  if (!loss.requires_grad()) throw ContractError("backward: loss was not recorded on a tape");
  const auto& root = loss.impl();
  const bool on_tape = std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.output == root; });
  if (!on_tape) throw ContractError("backward: loss was not recorded on this tape");
  root->ensure_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not upstream of the loss
    for (const auto& in : it->inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    it->backward(it->output->grad);
  }
}

std::string Tape::dump() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    os << i << ' ' << e.op << " (";
    for (std::size_t j = 0; j < e.inputs.size(); ++j) {
      os << (j ? ", " : "") << '#' << e.inputs[j]->id << shape_str(e.inputs[j]->shape);
    }
    os << ") -> #" << e.output->id << shape_str(e.output->shape) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_impl("matmul", a, b, false); }
Tensor matmul_nt(const Tensor& a, const Tensor& b) { return matmul_impl("matmul_nt", a, b, true); }

Tensor transpose(const Tensor& a) {
  if (a.rank() < 2) throw DimensionError("transpose: rank " + std::to_string(a.rank()) + " tensor");
  Shape shape = a.shape();
  const std::size_t r = shape[shape.size() - 2], c = shape.back();
  const std::size_t batch = a.numel() / (r * c);
  std::swap(shape[shape.size() - 2], shape.back());
  std::vector<double> out(a.numel());
  const auto in = a.data();
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[s * r * c + j * r + i] = in[s * r * c + i * c + j];
  ImplPtr ai = a.impl();
  return emit("transpose", shape, std::move(out), {ai}, [ai, r, c, batch](std::span<const double> g) {
    auto& ga = ai->grad;
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[s * r * c + i * c + j] += g[s * r * c + j * r + i];
  });
}

// ---------------------------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return emit("add", a.shape(), std::move(out), {ai, bi}, [ai, bi](std::span<const double> g) {
    if (ai->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
    if (bi->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return emit("sub", a.shape(), std::move(out), {ai, bi}, [ai, bi](std::span<const double> g) {
    if (ai->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
    if (bi->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  ImplPtr ai = a.impl(), bi = b.impl();
  return emit("mul", a.shape(), std::move(out), {ai, bi}, [ai, bi](std::span<const double> g) {
    if (ai->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * bi->data[i];
    if (bi->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i] += g[i] * ai->data[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  ImplPtr ai = a.impl();
  return emit("scale", a.shape(), std::move(out), {ai}, [ai, factor](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * factor;
  });
}

Tensor add_scalar(const Tensor& a, double value) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + value;
  ImplPtr ai = a.impl();
  return emit("add_scalar", a.shape(), std::move(out), {ai}, [ai](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  ImplPtr ai = a.impl();
  return emit("relu", a.shape(), std::move(out), {ai}, [ai](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (ai->data[i] > 0.0) ai->grad[i] += g[i];
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a[i]);
  ImplPtr ai = a.impl();
  auto values = std::make_shared<std::vector<double>>(out);
  return emit("tanh", a.shape(), std::move(out), {ai}, [ai, values](std::span<const double> g) {
    const auto& y = *values;
    for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a[i];
    // Branch keeps exp() from overflowing for large |x|.
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  ImplPtr ai = a.impl();
  auto values = std::make_shared<std::vector<double>>(out);
  return emit("sigmoid", a.shape(), std::move(out), {ai}, [ai, values](std::span<const double> g) {
    const auto& y = *values;
    for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a[i]);
  ImplPtr ai = a.impl();
  auto values = std::make_shared<std::vector<double>>(out);
  return emit("exp", a.shape(), std::move(out), {ai}, [ai, values](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i] * (*values)[i];
  });
}

Tensor abs(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a[i]);
  ImplPtr ai = a.impl();
  return emit("abs", a.shape(), std::move(out), {ai}, [ai](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = ai->data[i];
      ai->grad[i] += x > 0.0 ? g[i] : (x < 0.0 ? -g[i] : 0.0);
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() == 0 || bias.rank() != 1 || bias.dim(0) != x.shape().back()) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  }
  const std::size_t f = bias.numel();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + bias[i % f];
  ImplPtr xi = x.impl(), bi = bias.impl();
  return emit("add_bias", x.shape(), std::move(out), {xi, bi}, [xi, bi, f](std::span<const double> g) {
    if (xi->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i];
    if (bi->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) bi->grad[i % f] += g[i];
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  if (x.rank() == 0 || w.rank() != x.rank() || w.shape().back() != 1 || w.numel() * x.shape().back() != x.numel()) {
    throw DimensionError("scale_rows: weights " + shape_str(w.shape()) + " do not match " + shape_str(x.shape()));
  }
  const std::size_t f = x.shape().back();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * w[i / f];
  ImplPtr xi = x.impl(), wi = w.impl();
  return emit("scale_rows", x.shape(), std::move(out), {xi, wi}, [xi, wi, f](std::span<const double> g) {
    if (xi->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i] * wi->data[i / f];
    if (wi->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) wi->grad[i / f] += g[i] * xi->data[i];
  });
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() == 0) throw DimensionError("softmax_rows: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = n == 0 ? 0 : x.numel() / n;
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data() + r * n;
    double* yr = out.data() + r * n;
    double mx = xr[0];
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(xr[j])) throw NumericError("softmax_rows: non-finite input in row " + std::to_string(r));
      mx = std::max(mx, xr[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < n; ++j) yr[j] /= total;
  }
  ImplPtr xi = x.impl();
  auto values = std::make_shared<std::vector<double>>(out);
  return emit("softmax_rows", x.shape(), std::move(out), {xi}, [xi, values, n, rows](std::span<const double> g) {
    const auto& y = *values;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) xi->grad[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no tensors");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw DimensionError("concat: axis " + std::to_string(axis) + " for " + shape_str(ref));
  Shape shape = ref;
  shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == ref[d];
    if (!ok) throw DimensionError("concat: extent mismatch " + shape_str(ref) + " vs " + shape_str(s));
    shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= ref[d];
  for (std::size_t d = axis + 1; d < ref.size(); ++d) inner *= ref[d];
  const std::size_t out_chunk = shape[axis] * inner;
  std::vector<double> out(shape_numel(shape));
  std::vector<ImplPtr> inputs;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t chunk = p.shape()[axis] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.data().data() + o * chunk, chunk, out.data() + o * out_chunk + offset);
    }
    inputs.push_back(p.impl());
    offsets.push_back(offset);
    offset += chunk;
  }
  auto captured = inputs;
  return emit("concat", shape, std::move(out), std::move(inputs),
              [captured, offsets, outer, inner, axis, out_chunk](std::span<const double> g) {
                for (std::size_t i = 0; i < captured.size(); ++i) {
                  const auto& in = captured[i];
                  if (!in->requires_grad) continue;
                  const std::size_t chunk = in->shape[axis] * inner;
                  for (std::size_t o = 0; o < outer; ++o) {
                    const double* src = g.data() + o * out_chunk + offsets[i];
                    double* dst = in->grad.data() + o * chunk;
                    for (std::size_t j = 0; j < chunk; ++j) dst[j] += src[j];
                  }
                }
              });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.rank() || begin > end || end > x.shape()[axis]) {
    throw DimensionError("slice: [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const std::size_t in_chunk = shape[axis] * inner;
  shape[axis] = end - begin;
  const std::size_t out_chunk = shape[axis] * inner;
  std::vector<double> out(outer * out_chunk);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.data().data() + o * in_chunk + begin * inner, out_chunk, out.data() + o * out_chunk);
  }
  ImplPtr xi = x.impl();
  const std::size_t start = begin * inner;
  return emit("slice", shape, std::move(out), {xi}, [xi, outer, in_chunk, out_chunk, start](std::span<const double> g) {
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < out_chunk; ++j) xi->grad[o * in_chunk + start + j] += g[o * out_chunk + j];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  ImplPtr xi = x.impl();
  return emit("reshape", std::move(shape), std::move(out), {xi}, [xi](std::span<const double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) xi->grad[i] += g[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  ImplPtr xi = x.impl();
  return emit("sum", Shape{}, std::vector<double>{total}, {xi}, [xi](std::span<const double> g) {
    for (double& v : xi->grad) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ContractError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace msgc
