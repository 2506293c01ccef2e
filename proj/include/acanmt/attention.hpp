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

// Global attention with a bilinear score e_i = s^T W_a h_i.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "acanmt/nn.hpp"
#include "acanmt/tensor.hpp"

namespace acanmt {

inline constexpr double kMaskedScore = -1e9;

template <class T>
struct AttentionParams {
  Tensor<T> W_a;  // [decoder hidden, context size]

  static AttentionParams make(std::size_t dec_hidden, std::size_t context, Initializer& init) {
    return {init.weight<T>(dec_hidden, context)};
  }
};

// Source side prepared once per batch: encoder outputs and their projections
// W_a h_i laid out position-major within each row.
template <class T>
struct AttentionMemory {
  Tensor<T> values;     // [batch, n * context]
  Tensor<T> keys;       // [batch, n * dec_hidden]
  Tensor<T> mask_bias;  // [batch, n]; undefined when every position is valid
  std::size_t positions = 0;
  std::size_t batch = 0;
};

template <class T>
struct AttentionResult {
  Tensor<T> alpha;    // [batch, n]
  Tensor<T> context;  // [batch, context]
};

inline std::vector<std::uint8_t> prefix_mask(std::span<const std::size_t> lengths, std::size_t n) {
  std::vector<std::uint8_t> m(lengths.size() * n, 0);
  for (std::size_t r = 0; r < lengths.size(); ++r)
    for (std::size_t i = 0; i < n && i < lengths[r]; ++i) m[r * n + i] = 1;
  return m;
}

// `valid` is [batch, n] with 1 marking attendable positions; empty means all.
template <class T>
AttentionMemory<T> prepare_attention(std::span<const Tensor<T>> H, std::span<const std::uint8_t> valid,
                                     const AttentionParams<T>& p) {
  if (H.empty()) throw std::invalid_argument("attention: no source positions");
  const std::size_t n = H.size(), b = H[0].rows();
  if (H[0].cols() != p.W_a.cols())
    throw ShapeError("attention: context size " + std::to_string(H[0].cols()) + " does not match W_a " +
                     shape_str(p.W_a.shape()));
  AttentionMemory<T> mem;
  mem.positions = n;
  mem.batch = b;
  std::vector<Tensor<T>> keys;
  keys.reserve(n);
  for (const auto& h : H) keys.push_back(matmul_t(h, p.W_a));
  mem.values = concat(H);
  mem.keys = concat(std::span<const Tensor<T>>(keys));

  if (!valid.empty()) {
    if (valid.size() != b * n) throw std::invalid_argument("attention: mask shape mismatch");
    bool any_masked = false;
    std::vector<T> bias(b * n, T(0));
    for (std::size_t r = 0; r < b; ++r) {
      bool any_valid = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (valid[r * n + i]) {
          any_valid = true;
        } else {
          bias[r * n + i] = static_cast<T>(kMaskedScore);
          any_masked = true;
        }
      }
      if (!any_valid) throw std::invalid_argument("attention: every position of a row is masked");
    }
    if (any_masked) mem.mask_bias = Tensor<T>::constant({b, n}, std::move(bias));
  }
  return mem;
}

template <class T>
AttentionResult<T> attend(const Tensor<T>& s, const AttentionMemory<T>& mem) {
  if (s.rank() != 2 || s.rows() != mem.batch || s.cols() * mem.positions != mem.keys.cols())
    throw ShapeError("attend: query " + shape_str(s.shape()) + " does not match keys " +
                     shape_str(mem.keys.shape()));
  Tensor<T> scores = batch_matvec(s, mem.keys);
  if (mem.mask_bias.defined()) scores = add(scores, mem.mask_bias);
  Tensor<T> alpha = softmax(scores);
  Tensor<T> context = batch_vecmat(alpha, mem.values);
  return {std::move(alpha), std::move(context)};
}

template <class T>
AttentionResult<T> attend(const Tensor<T>& s, std::span<const Tensor<T>> H, std::span<const std::uint8_t> valid,
                          const AttentionParams<T>& p) {
  return attend(s, prepare_attention(H, valid, p));
}

// Copies row 0 of a single-sentence memory into `rows` identical rows
// (beam search). Inference only.
template <class T>
AttentionMemory<T> repeat_memory(const AttentionMemory<T>& mem, std::size_t rows) {
  std::vector<std::size_t> idx(rows, 0);
  AttentionMemory<T> out;
  out.positions = mem.positions;
  out.batch = rows;
  out.values = select_rows(mem.values, std::span<const std::size_t>(idx));
  out.keys = select_rows(mem.keys, std::span<const std::size_t>(idx));
  if (mem.mask_bias.defined()) out.mask_bias = select_rows(mem.mask_bias, std::span<const std::size_t>(idx));
  return out;
}

}  // namespace acanmt
