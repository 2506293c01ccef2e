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

// Neural building blocks shared by the encoder and the decoder.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "acanmt/tensor.hpp"

namespace acanmt {

using Rng = std::mt19937_64;

enum class Mode { kTrain, kEval };

// Dropout needs a generator only in training mode.
struct ForwardContext {
  Mode mode = Mode::kEval;
  Rng* rng = nullptr;
  double dropout = 0.0;

  bool training() const { return mode == Mode::kTrain; }
};

// Weights uniform on [-scale, scale], biases zero.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed, double scale = 0.08) : gen_(seed), scale_(scale) {}

  template <class T>
  Tensor<T> weight(std::size_t rows, std::size_t cols) {
    std::uniform_real_distribution<double> u(-scale_, scale_);
    std::vector<T> v(rows * cols);
    for (auto& x : v) x = static_cast<T>(u(gen_));
    return Tensor<T>::parameter({rows, cols}, std::move(v));
  }

  template <class T>
  Tensor<T> bias(std::size_t n) {
    return Tensor<T>::zeros({n}, /*requires_grad=*/true);
  }

 private:
  Rng gen_;
  double scale_;
};

// Affine map W x + b with W stored as [out, in].
template <class T>
struct Linear {
  Tensor<T> W;
  Tensor<T> b;

  std::size_t in_size() const { return W.shape()[1]; }
  std::size_t out_size() const { return W.shape()[0]; }

  static Linear make(std::size_t in, std::size_t out, Initializer& init) {
    return {init.weight<T>(out, in), init.bias<T>(out)};
  }
};

template <class T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b) {
  return add(matmul_t(x, W), b);
}

template <class T>
Tensor<T> affine(const Tensor<T>& x, const Linear<T>& l) {
  return affine(x, l.W, l.b);
}

// Gate order f, i, o, C~; every W is hidden x (input + hidden) and acts on
// the concatenation [x; h_prev].
template <class T>
struct LstmCellParams {
  Tensor<T> W_f, W_i, W_o, W_c;
  Tensor<T> b_f, b_i, b_o, b_c;

  std::size_t hidden_size() const { return W_f.shape()[0]; }
  std::size_t input_size() const { return W_f.shape()[1] - hidden_size(); }

  void validate() const {
    const Shape& w = W_f.shape();
    if (w.size() != 2 || w[0] == 0 || w[1] <= w[0]) {
      throw ShapeError("lstm: W_f must be hidden x (input + hidden), got " + shape_str(w));
    }
    for (const auto* t : {&W_i, &W_o, &W_c})
      if (t->shape() != w) throw ShapeError("lstm: gate weights disagree: " + shape_str(t->shape()));
    for (const auto* t : {&b_f, &b_i, &b_o, &b_c})
      if (t->shape() != Shape{w[0]}) throw ShapeError("lstm: bias shape " + shape_str(t->shape()));
  }

  static LstmCellParams make(std::size_t input, std::size_t hidden, Initializer& init) {
    LstmCellParams p;
    p.W_f = init.weight<T>(hidden, input + hidden);
    p.W_i = init.weight<T>(hidden, input + hidden);
    p.W_o = init.weight<T>(hidden, input + hidden);
    p.W_c = init.weight<T>(hidden, input + hidden);
    p.b_f = init.bias<T>(hidden);
    p.b_i = init.bias<T>(hidden);
    p.b_o = init.bias<T>(hidden);
    p.b_c = init.bias<T>(hidden);
    return p;
  }
};

template <class T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;

  static LstmState zeros(std::size_t batch, std::size_t hidden) {
    return {Tensor<T>::zeros({batch, hidden}), Tensor<T>::zeros({batch, hidden})};
  }
};

template <class T>
struct LstmGates {
  Tensor<T> f, i, o, candidate;
};

// One LSTM step. `gates`, when non-null, receives the gate activations.
template <class T>
LstmState<T> lstm_cell_step(const Tensor<T>& x, const LstmState<T>& prev, const LstmCellParams<T>& p,
                            LstmGates<T>* gates = nullptr) {
  if (x.cols() + prev.h.cols() != p.W_f.cols() || prev.h.shape() != prev.c.shape()) {
    throw ShapeError("lstm_cell_step: input " + shape_str(x.shape()) + " and state " +
                     shape_str(prev.h.shape()) + " do not match weights " + shape_str(p.W_f.shape()));
  }
  const Tensor<T> xh = concat({x, prev.h});
  Tensor<T> f = sigmoid(affine(xh, p.W_f, p.b_f));
  Tensor<T> i = sigmoid(affine(xh, p.W_i, p.b_i));
  Tensor<T> o = sigmoid(affine(xh, p.W_o, p.b_o));
  Tensor<T> cand = tanh(affine(xh, p.W_c, p.b_c));
  Tensor<T> c = add(mul(f, prev.c), mul(i, cand));
  Tensor<T> h = mul(o, tanh(c));
  if (gates) *gates = {f, i, o, cand};
  return {std::move(h), std::move(c)};
}

// Row lookup; returns [ids.size(), dim].
template <class T>
Tensor<T> embed(std::span<const int> ids, const Tensor<T>& table) {
  return embedding(table, ids);
}

// Inverted dropout. Eval mode and rate 0 return `x` itself.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng* rng) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::kEval || rate == 0.0) return x;
  if (rng == nullptr) throw std::invalid_argument("dropout: training mode needs a generator");
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.size());
  for (auto& m : mask) m = keep(*rng) ? scale : T(0);
  return mul(x, Tensor<T>::constant(x.shape(), std::move(mask)));
}

template <class T>
Tensor<T> dropout(const Tensor<T>& x, const ForwardContext& ctx) {
  return dropout(x, ctx.dropout, ctx.mode, ctx.rng);
}

// Copies the listed rows of a tensor's values into a new constant. Inference
// only: the result carries no gradient history.
template <class T>
Tensor<T> select_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  const std::size_t c = x.cols();
  std::vector<T> v(rows.size() * c);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows()) throw std::out_of_range("select_rows: row index out of range");
    std::copy_n(x.values().data() + rows[r] * c, c, v.data() + r * c);
  }
  return Tensor<T>::constant({rows.size(), c}, std::move(v));
}

}  // namespace acanmt
