// Copyright 2026 The ACA-NMT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal reverse-mode automatic differentiation over dense row-major
// tensors of rank 1 or 2.
//
// A rank-1 tensor of length n behaves as a single row [1, n] inside every
// kernel; outputs keep the rank of their leading input. All reductions run
// in ascending index order starting from zero so results are reproducible
// bit for bit against plain nested loops.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace acanmt {

using Shape = std::vector<std::size_t>;

enum class Op : std::uint8_t {
  kLeaf,
  kMatMul,       // A[m,k] * B[k,n]  (B may be a vector [k])
  kMatMulT,      // X[m,k] * W[n,k]^T  (X may be a vector [k])
  kAdd,          // same shape, or [m,n] + bias[n]
  kMul,          // Hadamard product
  kConcat,       // along the last axis
  kSigmoid,
  kTanh,
  kSoftmax,      // row-wise over the last axis
  kLogSoftmax,   // row-wise over the last axis
  kEmbedding,    // (E[V,d], ids[L]) -> [L,d]
  kNllLoss,      // (logits[B,V], targets[B], weights[B]) -> [1]
  kBatchMatVec,  // (q[B,d], K[B,n*d]) -> [B,n]
  kBatchVecMat,  // (a[B,n], H[B,n*d]) -> [B,d]
  kSum,          // -> [1]
};

inline constexpr std::uint8_t kOpCount = 15;

constexpr std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kMatMulT: return "matmul_t";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kConcat: return "concat";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kSoftmax: return "softmax";
    case Op::kLogSoftmax: return "log_softmax";
    case Op::kEmbedding: return "embedding";
    case Op::kNllLoss: return "nll_loss";
    case Op::kBatchMatVec: return "batch_matvec";
    case Op::kBatchVecMat: return "batch_vecmat";
    case Op::kSum: return "sum";
  }
  return "unknown";
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// Graph recording is on by default; inference code turns it off with
// NoGradGuard so intermediate nodes are freed as soon as they go out of scope.
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

inline bool grad_enabled() { return grad_enabled_flag(); }

class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_enabled_flag()) { grad_enabled_flag() = false; }
  ~NoGradGuard() { grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

namespace detail {

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on first accumulation
  Op op = Op::kLeaf;
  std::vector<std::shared_ptr<Node>> inputs;
  bool requires_grad = false;
  bool grad_pending = false;  // leaf holds gradients from an earlier backward

  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }

  std::vector<T>& ensure_grad() {
    if (grad.empty() && !value.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

}  // namespace detail

template <class T>
class Tensor;

template <class T>
Tensor<T> apply(Op op, std::span<const Tensor<T>> inputs);

template <class T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<T> values) {
    return leaf(std::move(shape), std::move(values), false);
  }
  static Tensor parameter(Shape shape, std::vector<T> values) {
    return leaf(std::move(shape), std::move(values), true);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> v(shape_numel(shape), T(0));
    return leaf(std::move(shape), std::move(v), requires_grad);
  }
  static Tensor full(Shape shape, T fill) {
    std::vector<T> v(shape_numel(shape), fill);
    return leaf(std::move(shape), std::move(v), false);
  }
  // Integer ids carried as a rank-1 constant (embedding rows, loss targets).
  static Tensor ids(std::span<const int> ids) {
    std::vector<T> v(ids.begin(), ids.end());
    return leaf(Shape{ids.size()}, std::move(v), false);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rows() const { return node_->rows(); }
  std::size_t cols() const { return node_->cols(); }
  Op op() const { return node_->op; }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const T> values() const { return node_->value; }
  // Writable access is meant for leaves (initialisation, optimiser updates,
  // finite-difference probes); mutating an interior node invalidates backward.
  std::span<T> mutable_values() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return !node_->grad.empty(); }

  T item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  T at(std::size_t i) const { return node_->value.at(i); }
  T at(std::size_t r, std::size_t c) const { return node_->value.at(r * cols() + c); }

  void zero_grad() {
    node_->grad.clear();
    node_->grad_pending = false;
  }

  // Copy of the values with no graph history.
  Tensor detach() const { return constant(shape(), node_->value); }

  const void* id() const { return node_.get(); }
  const NodePtr& node() const { return node_; }

 private:
  template <class U>
  friend Tensor<U> apply(Op op, std::span<const Tensor<U>> inputs);
  template <class U>
  friend std::vector<Tensor<U>> backward(const Tensor<U>& loss);

  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor leaf(Shape shape, std::vector<T> values, bool requires_grad) {
    if (shape.empty() || shape.size() > 2) {
      throw ShapeError("tensor rank must be 1 or 2, got shape " + shape_str(shape));
    }
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("shape " + shape_str(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
    }
    auto n = std::make_shared<detail::Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  NodePtr node_;
};

namespace detail {

[[noreturn]] inline void shape_fail(Op op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + shape_str(a) +
                   " and " + shape_str(b));
}

template <class T>
T sigmoid_scalar(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Row-wise softmax with max subtraction.
template <class T>
void softmax_row(const T* x, T* y, std::size_t n) {
  T m = x[0];
  for (std::size_t j = 1; j < n; ++j) m = std::max(m, x[j]);
  T s = T(0);
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - m);
    s += y[j];
  }
  for (std::size_t j = 0; j < n; ++j) y[j] = y[j] / s;
}

template <class T>
void log_softmax_row(const T* x, T* y, std::size_t n) {
  T m = x[0];
  for (std::size_t j = 1; j < n; ++j) m = std::max(m, x[j]);
  T s = T(0);
  for (std::size_t j = 0; j < n; ++j) s += std::exp(x[j] - m);
  const T lse = std::log(s);
  for (std::size_t j = 0; j < n; ++j) y[j] = x[j] - m - lse;
}

inline std::size_t checked_id(double v, std::size_t limit, Op op) {
  if (!(v >= 0.0) || v != std::floor(v) || static_cast<std::size_t>(v) >= limit) {
    throw std::out_of_range(std::string(op_name(op)) + ": id " + std::to_string(v) +
                            " outside [0, " + std::to_string(limit) + ")");
  }
  return static_cast<std::size_t>(v);
}

// C[m,n] = A[m,k] * B[k,n]; C is zero-initialised by the caller. The k loop
// is the middle loop so every C[i,j] is summed in ascending k.
template <class T>
void gemm_nn(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* __restrict ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* __restrict bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <class T>
std::vector<T> transpose(const std::vector<T>& w, std::size_t r, std::size_t c) {
  std::vector<T> t(w.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = w[i * c + j];
  return t;
}

template <class T>
void forward(Node<T>& out) {
  auto& in = out.inputs;
  auto& y = out.value;
  switch (out.op) {
    case Op::kMatMul: {
      const Node<T>& a = *in[0];
      const Node<T>& b = *in[1];
      const std::size_t m = a.shape[0], k = a.shape[1];
      const std::size_t n = b.shape.size() == 2 ? b.shape[1] : 1;
      y.assign(m * n, T(0));
      gemm_nn(a.value.data(), b.value.data(), y.data(), m, k, n);
      break;
    }
    case Op::kMatMulT: {
      const Node<T>& x = *in[0];
      const Node<T>& w = *in[1];
      const std::size_t m = x.rows(), k = x.cols(), n = w.shape[0];
      const std::vector<T> wt = transpose(w.value, n, k);
      y.assign(m * n, T(0));
      gemm_nn(x.value.data(), wt.data(), y.data(), m, k, n);
      break;
    }
    case Op::kAdd: {
      const Node<T>& a = *in[0];
      const Node<T>& b = *in[1];
      y = a.value;
      if (a.shape == b.shape) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value[i];
      } else {
        const std::size_t n = b.value.size();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value[i % n];
      }
      break;
    }
    case Op::kMul: {
      const auto& a = in[0]->value;
      const auto& b = in[1]->value;
      y.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
      break;
    }
    case Op::kConcat: {
      const std::size_t rows = out.rows(), cols = out.cols();
      y.resize(rows * cols);
      std::size_t off = 0;
      for (const auto& p : in) {
        const std::size_t c = p->cols();
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(p->value.data() + r * c, c, y.data() + r * cols + off);
        off += c;
      }
      break;
    }
    case Op::kSigmoid: {
      const auto& x = in[0]->value;
      y.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
      break;
    }
    case Op::kTanh: {
      const auto& x = in[0]->value;
      y.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      break;
    }
    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      const Node<T>& x = *in[0];
      const std::size_t rows = x.rows(), n = x.cols();
      y.resize(x.value.size());
      for (std::size_t r = 0; r < rows; ++r) {
        if (out.op == Op::kSoftmax)
          softmax_row(x.value.data() + r * n, y.data() + r * n, n);
        else
          log_softmax_row(x.value.data() + r * n, y.data() + r * n, n);
      }
      break;
    }
    case Op::kEmbedding: {
      const Node<T>& e = *in[0];
      const Node<T>& ids = *in[1];
      const std::size_t d = e.shape[1];
      y.resize(ids.value.size() * d);
      for (std::size_t r = 0; r < ids.value.size(); ++r) {
        const std::size_t row = checked_id(static_cast<double>(ids.value[r]), e.shape[0], out.op);
        std::copy_n(e.value.data() + row * d, d, y.data() + r * d);
      }
      break;
    }
    case Op::kNllLoss: {
      const Node<T>& logits = *in[0];
      const auto& tgt = in[1]->value;
      const auto& w = in[2]->value;
      const std::size_t rows = logits.rows(), v = logits.cols();
      std::vector<T> ls(v);
      T total = T(0);
      for (std::size_t r = 0; r < rows; ++r) {
        if (w[r] == T(0)) continue;
        const std::size_t t = checked_id(static_cast<double>(tgt[r]), v, out.op);
        log_softmax_row(logits.value.data() + r * v, ls.data(), v);
        total += w[r] * -ls[t];
      }
      y.assign(1, total);
      break;
    }
    case Op::kBatchMatVec: {
      const Node<T>& q = *in[0];
      const Node<T>& k = *in[1];
      const std::size_t b = q.rows(), d = q.cols(), n = k.cols() / d;
      y.resize(b * n);
      for (std::size_t r = 0; r < b; ++r) {
        const T* qr = q.value.data() + r * d;
        for (std::size_t i = 0; i < n; ++i) {
          const T* ki = k.value.data() + r * n * d + i * d;
          T acc = T(0);
          for (std::size_t j = 0; j < d; ++j) acc += qr[j] * ki[j];
          y[r * n + i] = acc;
        }
      }
      break;
    }
    case Op::kBatchVecMat: {
      const Node<T>& a = *in[0];
      const Node<T>& h = *in[1];
      const std::size_t b = a.rows(), n = a.cols(), d = h.cols() / n;
      y.assign(b * d, T(0));
      for (std::size_t r = 0; r < b; ++r) {
        T* __restrict yr = y.data() + r * d;
        for (std::size_t i = 0; i < n; ++i) {
          const T ai = a.value[r * n + i];
          const T* __restrict hi = h.value.data() + r * n * d + i * d;
          for (std::size_t j = 0; j < d; ++j) yr[j] += ai * hi[j];
        }
      }
      break;
    }
    case Op::kSum: {
      T s = T(0);
      for (T v : in[0]->value) s += v;
      y.assign(1, s);
      break;
    }
    case Op::kLeaf:
      break;
  }
}

// Accumulates the gradient of `out` into its inputs.
template <class T>
void backward_node(Node<T>& out) {
  auto& in = out.inputs;
  const auto& g = out.grad;
  auto wants = [&](std::size_t i) { return in[i]->requires_grad; };
  switch (out.op) {
    case Op::kMatMul: {
      Node<T>& a = *in[0];
      Node<T>& b = *in[1];
      const std::size_t m = a.shape[0], k = a.shape[1];
      const std::size_t n = b.shape.size() == 2 ? b.shape[1] : 1;
      if (wants(0)) {
        auto& ga = a.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            T acc = T(0);
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b.value[p * n + j];
            ga[i * k + p] += acc;
          }
      }
      if (wants(1)) {
        auto& gb = b.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const T av = a.value[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
          }
      }
      break;
    }
    case Op::kMatMulT: {
      Node<T>& x = *in[0];
      Node<T>& w = *in[1];
      const std::size_t m = x.rows(), k = x.cols(), n = w.shape[0];
      if (wants(0)) {
        auto& gx = x.ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          T* __restrict gxi = gx.data() + i * k;
          for (std::size_t j = 0; j < n; ++j) {
            const T gij = g[i * n + j];
            if (gij == T(0)) continue;
            const T* __restrict wj = w.value.data() + j * k;
            for (std::size_t p = 0; p < k; ++p) gxi[p] += gij * wj[p];
          }
        }
      }
      if (wants(1)) {
        auto& gw = w.ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          const T* __restrict xi = x.value.data() + i * k;
          for (std::size_t j = 0; j < n; ++j) {
            const T gij = g[i * n + j];
            if (gij == T(0)) continue;
            T* __restrict gwj = gw.data() + j * k;
            for (std::size_t p = 0; p < k; ++p) gwj[p] += gij * xi[p];
          }
        }
      }
      break;
    }
    case Op::kAdd: {
      if (wants(0)) {
        auto& ga = in[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        auto& gb = in[1]->ensure_grad();
        const std::size_t n = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
      }
      break;
    }
    case Op::kMul: {
      const auto& a = in[0]->value;
      const auto& b = in[1]->value;
      if (wants(0)) {
        auto& ga = in[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(1)) {
        auto& gb = in[1]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      break;
    }
    case Op::kConcat: {
      const std::size_t rows = out.rows(), cols = out.cols();
      std::size_t off = 0;
      for (auto& p : in) {
        const std::size_t c = p->cols();
        if (p->requires_grad) {
          auto& gp = p->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) gp[r * c + j] += g[r * cols + off + j];
        }
        off += c;
      }
      break;
    }
    case Op::kSigmoid: {
      if (!wants(0)) break;
      auto& gx = in[0]->ensure_grad();
      const auto& y = out.value;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
      break;
    }
    case Op::kTanh: {
      if (!wants(0)) break;
      auto& gx = in[0]->ensure_grad();
      const auto& y = out.value;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (T(1) - y[i] * y[i]);
      break;
    }
    case Op::kSoftmax: {
      if (!wants(0)) break;
      auto& gx = in[0]->ensure_grad();
      const auto& y = out.value;
      const std::size_t rows = out.rows(), n = out.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        T dot = T(0);
        for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
        for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
      }
      break;
    }
    case Op::kLogSoftmax: {
      if (!wants(0)) break;
      auto& gx = in[0]->ensure_grad();
      const auto& y = out.value;
      const std::size_t rows = out.rows(), n = out.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        T gs = T(0);
        for (std::size_t j = 0; j < n; ++j) gs += g[r * n + j];
        for (std::size_t j = 0; j < n; ++j)
          gx[r * n + j] += g[r * n + j] - std::exp(y[r * n + j]) * gs;
      }
      break;
    }
    case Op::kEmbedding: {
      if (!wants(0)) break;
      Node<T>& e = *in[0];
      auto& ge = e.ensure_grad();
      const auto& ids = in[1]->value;
      const std::size_t d = e.shape[1];
      for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto row = static_cast<std::size_t>(ids[r]);
        for (std::size_t j = 0; j < d; ++j) ge[row * d + j] += g[r * d + j];
      }
      break;
    }
    case Op::kNllLoss: {
      if (!wants(0)) break;
      Node<T>& logits = *in[0];
      auto& gl = logits.ensure_grad();
      const auto& tgt = in[1]->value;
      const auto& w = in[2]->value;
      const std::size_t rows = logits.rows(), v = logits.cols();
      std::vector<T> p(v);
      for (std::size_t r = 0; r < rows; ++r) {
        if (w[r] == T(0)) continue;
        softmax_row(logits.value.data() + r * v, p.data(), v);
        const auto t = static_cast<std::size_t>(tgt[r]);
        const T scale = g[0] * w[r];
        for (std::size_t j = 0; j < v; ++j) gl[r * v + j] += scale * (p[j] - (j == t ? T(1) : T(0)));
      }
      break;
    }
    case Op::kBatchMatVec: {
      Node<T>& q = *in[0];
      Node<T>& k = *in[1];
      const std::size_t b = q.rows(), d = q.cols(), n = k.cols() / d;
      if (wants(0)) {
        auto& gq = q.ensure_grad();
        for (std::size_t r = 0; r < b; ++r)
          for (std::size_t i = 0; i < n; ++i) {
            const T gi = g[r * n + i];
            const T* ki = k.value.data() + r * n * d + i * d;
            for (std::size_t j = 0; j < d; ++j) gq[r * d + j] += gi * ki[j];
          }
      }
      if (wants(1)) {
        auto& gk = k.ensure_grad();
        for (std::size_t r = 0; r < b; ++r)
          for (std::size_t i = 0; i < n; ++i) {
            const T gi = g[r * n + i];
            const T* qr = q.value.data() + r * d;
            T* gki = gk.data() + r * n * d + i * d;
            for (std::size_t j = 0; j < d; ++j) gki[j] += gi * qr[j];
          }
      }
      break;
    }
    case Op::kBatchVecMat: {
      Node<T>& a = *in[0];
      Node<T>& h = *in[1];
      const std::size_t b = a.rows(), n = a.cols(), d = h.cols() / n;
      if (wants(0)) {
        auto& ga = a.ensure_grad();
        for (std::size_t r = 0; r < b; ++r)
          for (std::size_t i = 0; i < n; ++i) {
            const T* hi = h.value.data() + r * n * d + i * d;
            T acc = T(0);
            for (std::size_t j = 0; j < d; ++j) acc += g[r * d + j] * hi[j];
            ga[r * n + i] += acc;
          }
      }
      if (wants(1)) {
        auto& gh = h.ensure_grad();
        for (std::size_t r = 0; r < b; ++r)
          for (std::size_t i = 0; i < n; ++i) {
            const T ai = a.value[r * n + i];
            T* ghi = gh.data() + r * n * d + i * d;
            for (std::size_t j = 0; j < d; ++j) ghi[j] += ai * g[r * d + j];
          }
      }
      break;
    }
    case Op::kSum: {
      if (!wants(0)) break;
      auto& gx = in[0]->ensure_grad();
      for (auto& v : gx) v += g[0];
      break;
    }
    case Op::kLeaf:
      break;
  }
}

template <class T>
Shape infer_shape(Op op, const std::vector<std::shared_ptr<Node<T>>>& in) {
  auto need = [&](std::size_t n) {
    if (in.size() != n) {
      throw ShapeError(std::string(op_name(op)) + ": expected " + std::to_string(n) +
                       " inputs, got " + std::to_string(in.size()));
    }
  };
  switch (op) {
    case Op::kMatMul: {
      need(2);
      const Shape& a = in[0]->shape;
      const Shape& b = in[1]->shape;
      if (a.size() != 2 || a[1] != b[0]) shape_fail(op, a, b);
      return b.size() == 2 ? Shape{a[0], b[1]} : Shape{a[0]};
    }
    case Op::kMatMulT: {
      need(2);
      const Shape& x = in[0]->shape;
      const Shape& w = in[1]->shape;
      if (w.size() != 2 || x.back() != w[1]) shape_fail(op, x, w);
      return x.size() == 2 ? Shape{x[0], w[0]} : Shape{w[0]};
    }
    case Op::kAdd: {
      need(2);
      const Shape& a = in[0]->shape;
      const Shape& b = in[1]->shape;
      if (a == b) return a;
      if (a.size() == 2 && b.size() == 1 && a[1] == b[0]) return a;
      shape_fail(op, a, b);
    }
    case Op::kMul: {
      need(2);
      if (in[0]->shape != in[1]->shape) shape_fail(op, in[0]->shape, in[1]->shape);
      return in[0]->shape;
    }
    case Op::kConcat: {
      if (in.empty()) throw ShapeError("concat: no inputs");
      Shape s = in[0]->shape;
      s.back() = 0;
      for (const auto& p : in) {
        if (p->shape.size() != s.size() || (s.size() == 2 && p->shape[0] != s[0]))
          shape_fail(op, in[0]->shape, p->shape);
        s.back() += p->shape.back();
      }
      return s;
    }
    case Op::kSigmoid:
    case Op::kTanh:
      need(1);
      return in[0]->shape;
    case Op::kSoftmax:
    case Op::kLogSoftmax:
      need(1);
      if (in[0]->cols() == 0) throw ShapeError(std::string(op_name(op)) + ": empty row");
      return in[0]->shape;
    case Op::kEmbedding: {
      need(2);
      const Shape& e = in[0]->shape;
      const Shape& ids = in[1]->shape;
      if (e.size() != 2 || ids.size() != 1) shape_fail(op, e, ids);
      return Shape{ids[0], e[1]};
    }
    case Op::kNllLoss: {
      need(3);
      const Shape& l = in[0]->shape;
      const std::size_t rows = in[0]->rows();
      if (in[1]->shape != Shape{rows} || in[2]->shape != Shape{rows}) shape_fail(op, l, in[1]->shape);
      return Shape{1};
    }
    case Op::kBatchMatVec: {
      need(2);
      const Shape& q = in[0]->shape;
      const Shape& k = in[1]->shape;
      if (q.size() != 2 || k.size() != 2 || q[0] != k[0] || q[1] == 0 || k[1] % q[1] != 0)
        shape_fail(op, q, k);
      return Shape{q[0], k[1] / q[1]};
    }
    case Op::kBatchVecMat: {
      need(2);
      const Shape& a = in[0]->shape;
      const Shape& h = in[1]->shape;
      if (a.size() != 2 || h.size() != 2 || a[0] != h[0] || a[1] == 0 || h[1] % a[1] != 0)
        shape_fail(op, a, h);
      return Shape{a[0], h[1] / a[1]};
    }
    case Op::kSum:
      need(1);
      return Shape{1};
    case Op::kLeaf:
      break;
  }
  throw std::invalid_argument("apply: unknown op tag " + std::to_string(static_cast<int>(op)));
}

}  // namespace detail

// Builds a new node for `op`. Inputs are recorded only when grad mode is on
// and at least one input requires a gradient.
template <class T>
Tensor<T> apply(Op op, std::span<const Tensor<T>> inputs) {
  if (static_cast<std::uint8_t>(op) >= kOpCount || op == Op::kLeaf) {
    throw std::invalid_argument("apply: unknown op tag " + std::to_string(static_cast<int>(op)));
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->op = op;
  node->inputs.reserve(inputs.size());
  bool needs = false;
  for (const auto& t : inputs) {
    if (!t.defined()) throw std::invalid_argument(std::string(op_name(op)) + ": undefined input");
    node->inputs.push_back(t.node());
    needs = needs || t.requires_grad();
  }
  node->shape = detail::infer_shape(op, node->inputs);
  detail::forward(*node);
  node->requires_grad = needs && grad_enabled();
  if (!node->requires_grad) node->inputs.clear();
  return Tensor<T>(std::move(node));
}

template <class T>
Tensor<T> apply(Op op, std::initializer_list<Tensor<T>> inputs) {
  return apply<T>(op, std::span<const Tensor<T>>(inputs.begin(), inputs.size()));
}

template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) { return apply(Op::kMatMul, {a, b}); }
template <class T> Tensor<T> matmul_t(const Tensor<T>& x, const Tensor<T>& w) { return apply(Op::kMatMulT, {x, w}); }
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return apply(Op::kAdd, {a, b}); }
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return apply(Op::kMul, {a, b}); }
template <class T> Tensor<T> sigmoid(const Tensor<T>& x) { return apply(Op::kSigmoid, {x}); }
template <class T> Tensor<T> tanh(const Tensor<T>& x) { return apply(Op::kTanh, {x}); }
template <class T> Tensor<T> softmax(const Tensor<T>& x) { return apply(Op::kSoftmax, {x}); }
template <class T> Tensor<T> log_softmax(const Tensor<T>& x) { return apply(Op::kLogSoftmax, {x}); }
template <class T> Tensor<T> sum(const Tensor<T>& x) { return apply(Op::kSum, {x}); }
template <class T> Tensor<T> batch_matvec(const Tensor<T>& q, const Tensor<T>& k) { return apply(Op::kBatchMatVec, {q, k}); }
template <class T> Tensor<T> batch_vecmat(const Tensor<T>& a, const Tensor<T>& h) { return apply(Op::kBatchVecMat, {a, h}); }

template <class T>
Tensor<T> concat(std::span<const Tensor<T>> parts) {
  return apply(Op::kConcat, parts);
}
template <class T>
Tensor<T> concat(std::initializer_list<Tensor<T>> parts) {
  return apply(Op::kConcat, parts);
}

template <class T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const int> ids) {
  return apply(Op::kEmbedding, {table, Tensor<T>::ids(ids)});
}

// Weighted sum over rows of -log softmax(logits)[target]. Rows with weight 0
// are skipped entirely, which is how padding is excluded.
template <class T>
Tensor<T> nll_loss(const Tensor<T>& logits, std::span<const int> targets, std::span<const T> weights) {
  auto w = Tensor<T>::constant(Shape{weights.size()}, std::vector<T>(weights.begin(), weights.end()));
  return apply(Op::kNllLoss, {logits, Tensor<T>::ids(targets), w});
}

// Reverse pass from a scalar loss. Returns the leaves that received
// gradients. Leaves still holding gradients from an earlier pass are
// rejected; call zero_grad() on them first.
template <class T>
std::vector<Tensor<T>> backward(const Tensor<T>& loss) {
  using NodeT = detail::Node<T>;
  using Ptr = std::shared_ptr<NodeT>;
  if (!loss.defined() || loss.shape() != Shape{1}) {
    throw GraphError("backward: loss must have shape [1], got " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  std::vector<Ptr> order;
  std::vector<Ptr> leaves;
  if (loss.requires_grad()) {
    std::unordered_set<NodeT*> seen;
    std::vector<std::pair<Ptr, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->inputs.size()) {
        const Ptr& c = n->inputs[next++];
        if (c->requires_grad && seen.insert(c.get()).second) stack.emplace_back(c, 0);
        continue;
      }
      order.push_back(n);
      if (n->op == Op::kLeaf) leaves.push_back(n);
      stack.pop_back();
    }
  }
  for (const Ptr& l : leaves) {
    if (l->grad_pending) {
      throw GraphError("backward: a leaf still holds gradients from a previous pass; call zero_grad() first");
    }
  }
  if (order.empty()) return {};
  order.back()->grad.assign(1, T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT& n = **it;
    if (n.op == Op::kLeaf || n.grad.empty()) continue;
    detail::backward_node(n);
    n.grad.clear();
    n.grad.shrink_to_fit();
  }
  std::vector<Tensor<T>> out;
  out.reserve(leaves.size());
  for (Ptr& l : leaves) {
    l->grad_pending = true;
    l->ensure_grad();
    out.push_back(Tensor<T>(std::move(l)));
  }
  return out;
}

}  // namespace acanmt
