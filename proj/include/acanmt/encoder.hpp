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

// Multi-layer bidirectional LSTM encoder and the bridge that turns its final
// forward state into the decoder's initial state.

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "acanmt/nn.hpp"
#include "acanmt/tensor.hpp"

namespace acanmt {

// Row-major [batch, width] token ids; positions at or beyond a row's length
// hold <pad> and are ignored.
struct SourceBatch {
  std::size_t batch = 0;
  std::size_t width = 0;
  std::vector<int> ids;
  std::vector<std::size_t> lengths;

  static SourceBatch single(std::span<const int> tokens) {
    return {1, tokens.size(), std::vector<int>(tokens.begin(), tokens.end()), {tokens.size()}};
  }

  bool has_padding() const {
    for (std::size_t l : lengths)
      if (l != width) return true;
    return false;
  }
};

template <class T>
struct EncoderParams {
  Tensor<T> embedding;                     // [src_vocab, embed]
  std::vector<LstmCellParams<T>> forward;  // one per layer
  std::vector<LstmCellParams<T>> backward;

  std::size_t layers() const { return forward.size(); }
  std::size_t hidden_size() const { return forward.front().hidden_size(); }

  static EncoderParams make(std::size_t vocab, std::size_t embed, std::size_t hidden, std::size_t layers,
                            Initializer& init) {
    if (layers == 0) throw std::invalid_argument("encoder: at least one layer required");
    EncoderParams p;
    p.embedding = init.weight<T>(vocab, embed);
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = l == 0 ? embed : 2 * hidden;
      p.forward.push_back(LstmCellParams<T>::make(in, hidden, init));
      p.backward.push_back(LstmCellParams<T>::make(in, hidden, init));
    }
    return p;
  }
};

template <class T>
struct EncoderOutput {
  std::vector<Tensor<T>> H;  // per position [batch, 2 * hidden] = [forward; backward]
  // final_states[0] is the forward direction, [1] the backward one; each
  // holds one state per layer, bottom first.
  std::vector<std::vector<LstmState<T>>> final_states;
  std::vector<std::size_t> lengths;
  std::size_t src_len = 0;

  std::size_t batch() const { return lengths.size(); }
};

namespace detail {

// Keeps the previous state on rows whose position is padding.
template <class T>
LstmState<T> masked_state(const LstmState<T>& next, const LstmState<T>& prev, const SourceBatch& src,
                          std::size_t pos) {
  const std::size_t b = src.batch, h = next.h.cols();
  std::vector<T> keep(b * h), drop(b * h);
  for (std::size_t r = 0; r < b; ++r) {
    const T v = pos < src.lengths[r] ? T(1) : T(0);
    std::fill_n(keep.begin() + r * h, h, v);
    std::fill_n(drop.begin() + r * h, h, T(1) - v);
  }
  auto mk = Tensor<T>::constant({b, h}, std::move(keep));
  auto md = Tensor<T>::constant({b, h}, std::move(drop));
  return {add(mul(mk, next.h), mul(md, prev.h)), add(mul(mk, next.c), mul(md, prev.c))};
}

template <class T>
std::pair<std::vector<Tensor<T>>, LstmState<T>> run_direction(const std::vector<Tensor<T>>& inputs,
                                                               const LstmCellParams<T>& cell,
                                                               const SourceBatch& src, bool reverse) {
  const std::size_t n = inputs.size();
  const bool padded = src.has_padding();
  std::vector<Tensor<T>> out(n);
  auto state = LstmState<T>::zeros(src.batch, cell.hidden_size());
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t pos = reverse ? n - 1 - k : k;
    auto next = lstm_cell_step(inputs[pos], state, cell);
    state = padded ? masked_state(next, state, src, pos) : std::move(next);
    out[pos] = state.h;
  }
  return {std::move(out), std::move(state)};
}

}  // namespace detail

// Forward direction reads positions 0..n-1, backward n-1..0. Layer l > 0
// consumes the concatenated outputs of layer l - 1. Dropout (training only)
// applies to the embeddings and to every layer's concatenated output.
template <class T>
EncoderOutput<T> encode(const SourceBatch& src, const EncoderParams<T>& p, const ForwardContext& ctx = {}) {
  if (src.width == 0 || src.batch == 0) throw std::invalid_argument("encode: empty source");
  if (src.ids.size() != src.batch * src.width || src.lengths.size() != src.batch)
    throw std::invalid_argument("encode: malformed source batch");
  for (std::size_t l : src.lengths)
    if (l == 0 || l > src.width) throw std::invalid_argument("encode: row length outside [1, width]");

  std::vector<Tensor<T>> layer_in(src.width);
  std::vector<int> column(src.batch);
  for (std::size_t t = 0; t < src.width; ++t) {
    for (std::size_t r = 0; r < src.batch; ++r) column[r] = src.ids[r * src.width + t];
    layer_in[t] = dropout(embedding(p.embedding, std::span<const int>(column)), ctx);
  }

  EncoderOutput<T> out;
  out.final_states.resize(2);
  out.lengths = src.lengths;
  out.src_len = src.width;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    auto [fwd, fwd_last] = detail::run_direction(layer_in, p.forward[l], src, false);
    auto [bwd, bwd_last] = detail::run_direction(layer_in, p.backward[l], src, true);
    out.final_states[0].push_back(std::move(fwd_last));
    out.final_states[1].push_back(std::move(bwd_last));
    for (std::size_t t = 0; t < src.width; ++t) layer_in[t] = dropout(concat({fwd[t], bwd[t]}), ctx);
  }
  out.H = std::move(layer_in);
  return out;
}

template <class T>
EncoderOutput<T> encode(std::span<const int> src_ids, const EncoderParams<T>& p, const ForwardContext& ctx = {}) {
  if (src_ids.empty()) throw std::invalid_argument("encode: empty source");
  return encode(SourceBatch::single(src_ids), p, ctx);
}

template <class T>
struct BridgeParams {
  Linear<T> h;  // encoder hidden -> decoder hidden
  Linear<T> c;

  static BridgeParams make(std::size_t enc_hidden, std::size_t dec_hidden, Initializer& init) {
    return {Linear<T>::make(enc_hidden, dec_hidden, init), Linear<T>::make(enc_hidden, dec_hidden, init)};
  }
};

template <class T>
struct BridgedState {
  std::vector<LstmState<T>> layers;  // identical initial state for every decoder layer
  Tensor<T> memory;                  // m0, the same tensor as the decoder's initial h
};

// tanh(affine(.)) over the top-layer forward final state (h and C).
template <class T>
BridgedState<T> bridge(const EncoderOutput<T>& enc, const BridgeParams<T>& p, std::size_t decoder_layers) {
  const LstmState<T>& top = enc.final_states.at(0).back();
  LstmState<T> init{tanh(affine(top.h, p.h)), tanh(affine(top.c, p.c))};
  BridgedState<T> out;
  out.layers.assign(decoder_layers, init);
  out.memory = init.h;
  return out;
}

}  // namespace acanmt
