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

// Attention-based sequence-to-sequence model with optional adaptive control
// of attention on the output path.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "acanmt/aca.hpp"
#include "acanmt/attention.hpp"
#include "acanmt/data.hpp"
#include "acanmt/encoder.hpp"
#include "acanmt/nn.hpp"
#include "acanmt/tensor.hpp"

namespace acanmt {

struct ModelConfig {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t embed_dim = 512;
  std::size_t hidden_dim = 512;
  std::size_t enc_layers = 3;
  std::size_t dec_layers = 2;
  double dropout = 0.2;
  bool use_aca = true;
  std::size_t max_decode_len = 0;  // 0 selects 2 * source length + 10
  double init_scale = 0.08;

  void validate() const {
    if (src_vocab == 0 || tgt_vocab == 0) throw std::invalid_argument("model config: vocab sizes must be positive");
    if (embed_dim == 0 || hidden_dim == 0) throw std::invalid_argument("model config: dimensions must be positive");
    if (enc_layers == 0 || dec_layers == 0) throw std::invalid_argument("model config: layer counts must be positive");
    if (!(dropout >= 0.0) || dropout >= 1.0) throw std::invalid_argument("model config: dropout must lie in [0, 1)");
  }

  std::size_t decode_limit(std::size_t src_len) const {
    return max_decode_len > 0 ? max_decode_len : 2 * src_len + 10;
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "src_vocab=" << src_vocab << '\n'
       << "tgt_vocab=" << tgt_vocab << '\n'
       << "embed_dim=" << embed_dim << '\n'
       << "hidden_dim=" << hidden_dim << '\n'
       << "enc_layers=" << enc_layers << '\n'
       << "dec_layers=" << dec_layers << '\n'
       << "dropout=" << dropout << '\n'
       << "use_aca=" << (use_aca ? "true" : "false") << '\n'
       << "max_decode_len=" << max_decode_len << '\n'
       << "init_scale=" << init_scale << '\n';
    return os.str();
  }

  // Sets one field from its textual key; returns false for unknown keys.
  bool set(std::string_view key, const std::string& value) {
    auto as_size = [&](std::size_t& dst) {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(value, &pos);
      if (pos != value.size() || value.front() == '-') throw std::invalid_argument("bad integer '" + value + "'");
      dst = static_cast<std::size_t>(v);
    };
    auto as_double = [&](double& dst) {
      std::size_t pos = 0;
      dst = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("bad number '" + value + "'");
    };
    if (key == "src_vocab") as_size(src_vocab);
    else if (key == "tgt_vocab") as_size(tgt_vocab);
    else if (key == "embed_dim") as_size(embed_dim);
    else if (key == "hidden_dim") as_size(hidden_dim);
    else if (key == "enc_layers") as_size(enc_layers);
    else if (key == "dec_layers") as_size(dec_layers);
    else if (key == "dropout") as_double(dropout);
    else if (key == "max_decode_len") as_size(max_decode_len);
    else if (key == "init_scale") as_double(init_scale);
    else if (key == "use_aca") {
      if (value == "true" || value == "1") use_aca = true;
      else if (value == "false" || value == "0") use_aca = false;
      else throw std::invalid_argument("use_aca expects true|false, got '" + value + "'");
    } else {
      return false;
    }
    return true;
  }

  static ModelConfig from_text(std::string_view text) {
    ModelConfig c;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("model config: malformed line '" + line + "'");
      if (!c.set(line.substr(0, eq), line.substr(eq + 1)))
        throw std::invalid_argument("model config: unknown key '" + line.substr(0, eq) + "'");
    }
    c.validate();
    return c;
  }

  bool operator==(const ModelConfig&) const = default;
};

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <class T>
struct DecoderState {
  std::vector<LstmState<T>> layers;  // bottom first; s_t is layers.back().h
  Tensor<T> memory;                  // ACA memory m_t; carried untouched without ACA
};

template <class T>
struct EncodedSource {
  EncoderOutput<T> encoder;
  AttentionMemory<T> memory;

  std::size_t src_len() const { return encoder.src_len; }
};

template <class T>
struct StepOutput {
  Tensor<T> log_probs;  // [batch, tgt_vocab]
  Tensor<T> logits;
  DecoderState<T> state;
  Tensor<T> query;     // s_t as fed to attention
  Tensor<T> alpha;
  Tensor<T> context;   // c_t
  Tensor<T> features;  // v_t, or v_hat_t with ACA
};

template <class T>
class Seq2Seq {
 public:
  Seq2Seq(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Initializer init(seed, cfg_.init_scale);
    const std::size_t h = cfg_.hidden_dim, e = cfg_.embed_dim, ctx = 2 * h;
    encoder = EncoderParams<T>::make(cfg_.src_vocab, e, h, cfg_.enc_layers, init);
    bridge = BridgeParams<T>::make(h, h, init);
    tgt_embedding = init.weight<T>(cfg_.tgt_vocab, e);
    for (std::size_t l = 0; l < cfg_.dec_layers; ++l)
      decoder.push_back(LstmCellParams<T>::make(l == 0 ? e : h, h, init));
    attention = AttentionParams<T>::make(h, ctx, init);
    combine = Linear<T>::make(ctx + h, h, init);
    output = Linear<T>::make(h, cfg_.tgt_vocab, init);
    if (cfg_.use_aca) aca = AcaParams<T>::make(h, ctx, init);
    register_all();
  }

  Seq2Seq(const Seq2Seq&) = delete;
  Seq2Seq& operator=(const Seq2Seq&) = delete;
  Seq2Seq(Seq2Seq&&) noexcept = default;
  Seq2Seq& operator=(Seq2Seq&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }

  std::vector<NamedTensor<T>>& named_parameters() { return named_; }
  const std::vector<NamedTensor<T>>& named_parameters() const { return named_; }

  std::vector<Tensor<T>> parameters() const {
    std::vector<Tensor<T>> out;
    for (const auto& n : named_) out.push_back(n.tensor);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : named_) n += p.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& n : named_) n.tensor.zero_grad();
  }

  // Deep copy of the parameter values (handles are never shared).
  Seq2Seq clone() const {
    Seq2Seq m(cfg_, 0);
    m.copy_values_from(*this);
    return m;
  }

  void copy_values_from(const Seq2Seq& other) {
    if (other.named_.size() != named_.size()) throw std::invalid_argument("copy_values_from: layout differs");
    for (std::size_t i = 0; i < named_.size(); ++i) {
      auto src = other.named_[i].tensor.values();
      auto dst = named_[i].tensor.mutable_values();
      if (src.size() != dst.size()) throw std::invalid_argument("copy_values_from: shape differs");
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }

  EncodedSource<T> encode(const SourceBatch& src, const ForwardContext& ctx = {}) const {
    EncodedSource<T> out;
    out.encoder = acanmt::encode(src, encoder, ctx);
    std::vector<std::uint8_t> valid;
    if (src.has_padding()) valid = prefix_mask(src.lengths, src.width);
    out.memory = prepare_attention(std::span<const Tensor<T>>(out.encoder.H), valid, attention);
    return out;
  }

  EncodedSource<T> encode(std::span<const int> src_ids, const ForwardContext& ctx = {}) const {
    if (src_ids.empty()) throw std::invalid_argument("encode: empty source");
    return encode(SourceBatch::single(src_ids), ctx);
  }

  DecoderState<T> initial_state(const EncodedSource<T>& src) const {
    auto b = acanmt::bridge(src.encoder, bridge, cfg_.dec_layers);
    return {std::move(b.layers), std::move(b.memory)};
  }

  // One decoding step for every row of the batch.
  StepOutput<T> decoder_step(std::span<const int> prev_tokens, const DecoderState<T>& state,
                             const EncodedSource<T>& src, const ForwardContext& ctx = {}) const {
    return decoder_step(prev_tokens, state, src.memory, ctx);
  }

  StepOutput<T> decoder_step(std::span<const int> prev_tokens, const DecoderState<T>& state,
                             const AttentionMemory<T>& memory, const ForwardContext& ctx = {}) const {
    if (state.layers.size() != cfg_.dec_layers)
      throw std::invalid_argument("decoder_step: state has " + std::to_string(state.layers.size()) +
                                  " layers, model has " + std::to_string(cfg_.dec_layers));
    for (int id : prev_tokens)
      if (id < 0 || static_cast<std::size_t>(id) >= cfg_.tgt_vocab)
        throw std::out_of_range("decoder_step: token id " + std::to_string(id) + " outside target vocabulary");
    StepOutput<T> out;
    Tensor<T> x = dropout(embedding(tgt_embedding, prev_tokens), ctx);
    out.state.layers.reserve(decoder.size());
    for (std::size_t l = 0; l < decoder.size(); ++l) {
      auto next = lstm_cell_step(x, state.layers[l], decoder[l]);
      x = dropout(next.h, ctx);
      out.state.layers.push_back(std::move(next));
    }
    out.query = x;
    auto att = attend(out.query, memory);
    out.alpha = att.alpha;
    out.context = att.context;
    if (aca) {
      const auto g = gates(out.query, out.context, *aca);
      out.state.memory = memory_update(state.memory, g, out.query, out.context, *aca);
      out.features = gated_output(out.state.memory, out.query, out.context, *aca).output;
    } else {
      out.state.memory = state.memory;
      out.features = tanh(affine(concat({out.context, out.query}), combine));
    }
    out.logits = affine(out.features, output);
    out.log_probs = log_softmax(out.logits);
    return out;
  }

  // Teacher-forced negative log-likelihood, averaged over the non-pad target
  // tokens of the batch (</s> included, <s> excluded).
  Tensor<T> nll_loss(const Batch& batch, const ForwardContext& ctx = {}) const {
    if (batch.size() == 0) throw std::invalid_argument("nll_loss: empty batch");
    std::size_t tokens = 0;
    for (std::size_t l : batch.tgt_lengths) tokens += l - 1;
    auto src = encode(batch.source, ctx);
    auto state = initial_state(src);
    const std::size_t b = batch.size(), w = batch.tgt_width;
    const T inv = T(1) / static_cast<T>(tokens);
    std::vector<int> prev(b), gold(b);
    std::vector<T> weight(b);
    Tensor<T> total;
    for (std::size_t t = 0; t + 1 < w; ++t) {
      bool any = false;
      for (std::size_t r = 0; r < b; ++r) {
        prev[r] = batch.tgt[r * w + t];
        gold[r] = batch.tgt[r * w + t + 1];
        const bool live = t + 1 < batch.tgt_lengths[r];
        weight[r] = live ? inv : T(0);
        any = any || live;
      }
      if (!any) break;
      auto step = decoder_step(prev, state, src, ctx);
      auto l = acanmt::nll_loss(step.logits, std::span<const int>(gold), std::span<const T>(weight));
      total = total.defined() ? add(total, l) : l;
      state = std::move(step.state);
    }
    return total;
  }

  ForwardContext train_context(Rng* rng) const { return {Mode::kTrain, rng, cfg_.dropout}; }

  EncoderParams<T> encoder;
  BridgeParams<T> bridge;
  Tensor<T> tgt_embedding;
  std::vector<LstmCellParams<T>> decoder;
  AttentionParams<T> attention;
  Linear<T> combine;  // W_v over [c; s] (baseline output path)
  Linear<T> output;   // W_o, vocabulary projection
  std::optional<AcaParams<T>> aca;

 private:
  void add_param(std::string name, const Tensor<T>& t) { named_.push_back({std::move(name), t}); }

  void add_lstm(const std::string& prefix, const LstmCellParams<T>& p) {
    add_param(prefix + ".W_f", p.W_f);
    add_param(prefix + ".W_i", p.W_i);
    add_param(prefix + ".W_o", p.W_o);
    add_param(prefix + ".W_c", p.W_c);
    add_param(prefix + ".b_f", p.b_f);
    add_param(prefix + ".b_i", p.b_i);
    add_param(prefix + ".b_o", p.b_o);
    add_param(prefix + ".b_c", p.b_c);
  }

  void add_linear(const std::string& prefix, const Linear<T>& l) {
    add_param(prefix + ".W", l.W);
    add_param(prefix + ".b", l.b);
  }

  void register_all() {
    named_.clear();
    add_param("enc.embedding", encoder.embedding);
    for (std::size_t l = 0; l < encoder.layers(); ++l) {
      add_lstm("enc.l" + std::to_string(l) + ".fwd", encoder.forward[l]);
      add_lstm("enc.l" + std::to_string(l) + ".bwd", encoder.backward[l]);
    }
    add_linear("bridge.h", bridge.h);
    add_linear("bridge.c", bridge.c);
    add_param("dec.embedding", tgt_embedding);
    for (std::size_t l = 0; l < decoder.size(); ++l) add_lstm("dec.l" + std::to_string(l), decoder[l]);
    add_param("attention.W_a", attention.W_a);
    add_linear("combine", combine);
    add_linear("output", output);
    if (aca) {
      add_linear("aca.remove", aca->remove);
      add_linear("aca.feed", aca->feed);
      add_linear("aca.candidate", aca->candidate);
      add_linear("aca.update", aca->update);
      add_linear("aca.output", aca->output);
    }
  }

  ModelConfig cfg_;
  std::vector<NamedTensor<T>> named_;
};

}  // namespace acanmt
