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

// Adaptive control of attention.
//
// A memory vector m tracks the decoding history. Every step it is refreshed
// from the decoder output s and the attention context c:
//
//   r = sigmoid(G_r [s; c])                  remove gate
//   f = sigmoid(G_f [s; c])                  feed gate
//   m = r * m_prev + f * tanh(G_i [s; c])
//
// and then gates the context before prediction:
//
//   u     = sigmoid(G_u [m; s])              update gate, sized like c
//   c_hat = u * c
//   v_hat = tanh(G_o [s; c_hat])
//
// Every G_* is an affine map; the outer nonlinearity is the only squashing.

#pragma once

#include <cstddef>

#include "acanmt/nn.hpp"
#include "acanmt/tensor.hpp"

namespace acanmt {

template <class T>
struct AcaParams {
  Linear<T> remove;     // [s; c] -> hidden
  Linear<T> feed;       // [s; c] -> hidden
  Linear<T> candidate;  // [s; c] -> hidden
  Linear<T> update;     // [m; s] -> context
  Linear<T> output;     // [s; c_hat] -> hidden

  static AcaParams make(std::size_t hidden, std::size_t context, Initializer& init) {
    return {Linear<T>::make(hidden + context, hidden, init), Linear<T>::make(hidden + context, hidden, init),
            Linear<T>::make(hidden + context, hidden, init), Linear<T>::make(2 * hidden, context, init),
            Linear<T>::make(hidden + context, hidden, init)};
  }
};

template <class T>
struct AcaGates {
  Tensor<T> remove;
  Tensor<T> feed;
};

template <class T>
struct AcaOutput {
  Tensor<T> update;   // u
  Tensor<T> context;  // c_hat
  Tensor<T> output;   // v_hat
};

template <class T>
AcaGates<T> gates(const Tensor<T>& s, const Tensor<T>& c, const AcaParams<T>& p) {
  const Tensor<T> sc = concat({s, c});
  return {sigmoid(affine(sc, p.remove)), sigmoid(affine(sc, p.feed))};
}

template <class T>
Tensor<T> memory_update(const Tensor<T>& m_prev, const AcaGates<T>& g, const Tensor<T>& s, const Tensor<T>& c,
                        const AcaParams<T>& p) {
  const Tensor<T> candidate = tanh(affine(concat({s, c}), p.candidate));
  return add(mul(g.remove, m_prev), mul(g.feed, candidate));
}

template <class T>
AcaOutput<T> gated_output(const Tensor<T>& m, const Tensor<T>& s, const Tensor<T>& c, const AcaParams<T>& p) {
  Tensor<T> u = sigmoid(affine(concat({m, s}), p.update));
  Tensor<T> c_hat = mul(u, c);
  Tensor<T> v_hat = tanh(affine(concat({s, c_hat}), p.output));
  return {std::move(u), std::move(c_hat), std::move(v_hat)};
}

}  // namespace acanmt
