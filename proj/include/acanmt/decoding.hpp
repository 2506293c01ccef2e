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

// Greedy and beam-search decoding over any incremental scorer.
//
// A step model exposes one batched transition: given a state holding one row
// per live hypothesis and the previous token of each row, it returns the
// next-token log-probabilities of every row and the advanced state.

#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "acanmt/data.hpp"
#include "acanmt/model.hpp"

namespace acanmt {

template <class State>
struct StepResult {
  std::vector<double> log_probs;  // rows x vocab, row-major
  State state;
};

template <class M>
concept StepModel = requires(const M& m, const typename M::State& s, std::span<const int> tokens,
                             std::span<const std::size_t> rows) {
  { m.vocab_size() } -> std::convertible_to<std::size_t>;
  { m.bos() } -> std::convertible_to<int>;
  { m.eos() } -> std::convertible_to<int>;
  { m.start() } -> std::same_as<typename M::State>;
  { m.advance(s, tokens) } -> std::same_as<StepResult<typename M::State>>;
  { m.reorder(s, rows) } -> std::same_as<typename M::State>;
};

struct DecodeResult {
  std::vector<int> tokens;    // generated ids, </s> excluded
  double log_likelihood = 0;  // cumulative, </s> included when finished
  std::size_t length = 0;     // scored tokens, </s> included when finished
  bool finished = false;

  double normalized() const { return length == 0 ? 0.0 : log_likelihood / static_cast<double>(length); }
};

// Lowest id wins ties.
inline int argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t v = 1; v < row.size(); ++v)
    if (row[v] > row[best]) best = v;
  return static_cast<int>(best);
}

template <StepModel M>
DecodeResult greedy(const M& model, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("greedy: max_len must be at least 1");
  DecodeResult out;
  auto state = model.start();
  int prev = model.bos();
  const std::size_t V = model.vocab_size();
  for (std::size_t t = 0; t < max_len; ++t) {
    auto step = model.advance(state, std::span<const int>(&prev, 1));
    const std::span<const double> row(step.log_probs.data(), V);
    const int tok = argmax_row(row);
    out.log_likelihood += row[static_cast<std::size_t>(tok)];
    ++out.length;
    if (tok == model.eos()) {
      out.finished = true;
      break;
    }
    out.tokens.push_back(tok);
    state = std::move(step.state);
    prev = tok;
  }
  return out;
}

namespace detail {

struct Hyp {
  std::vector<int> tokens;  // </s> included when finished
  double score = 0.0;
};

struct Candidate {
  double score;
  std::size_t row;
  int token;
};

// Orders by score, descending; equal scores prefer the smaller sequence.
inline bool candidate_before(const Candidate& a, const Candidate& b, const std::vector<Hyp>& active) {
  if (a.score != b.score) return a.score > b.score;
  const auto& pa = active[a.row].tokens;
  const auto& pb = active[b.row].tokens;
  if (pa != pb) return pa < pb;
  return a.token < b.token;
}

// True when no live hypothesis can still beat the best finished one. Future
// tokens only lower a cumulative score s <= 0, and s / max_len is the best
// normalised value any extension can reach.
inline bool settled(const std::vector<Hyp>& finished, const std::vector<Hyp>& live, std::size_t max_len) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& h : finished) best = std::max(best, h.score / static_cast<double>(h.tokens.size()));
  for (const auto& h : live)
    if (h.score / static_cast<double>(max_len) >= best) return false;
  return true;
}

}  // namespace detail

// Beam search with length-normalised final ranking. Candidates from all live
// hypotheses compete for `beam` slots ranked by cumulative log-likelihood; a
// </s> candidate inside the top `beam` is set aside as finished and the live
// beam is refilled from the best non-final candidates. Search stops at
// max_len, where unfinished hypotheses join the final ranking. It stops
// earlier when every one of the top `beam` candidates ends the sentence
// (so width 1 is exactly greedy), or once `beam` hypotheses have finished and
// no live one can still overtake them.
template <StepModel M>
DecodeResult beam_search(const M& model, std::size_t beam, std::size_t max_len) {
  if (beam == 0) throw std::invalid_argument("beam_search: beam must be at least 1");
  if (max_len == 0) throw std::invalid_argument("beam_search: max_len must be at least 1");
  const std::size_t V = model.vocab_size();
  const int eos = model.eos();
  std::vector<detail::Hyp> active(1), finished;
  auto state = model.start();
  std::vector<int> prev;
  std::vector<detail::Candidate> cand;
  for (std::size_t t = 0; t < max_len; ++t) {
    prev.clear();
    for (const auto& h : active) prev.push_back(h.tokens.empty() ? model.bos() : h.tokens.back());
    auto step = model.advance(state, prev);

    cand.clear();
    for (std::size_t r = 0; r < active.size(); ++r)
      for (std::size_t v = 0; v < V; ++v)
        cand.push_back({active[r].score + step.log_probs[r * V + v], r, static_cast<int>(v)});
    const std::size_t keep = std::min(cand.size(), 2 * beam + 1);
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      [&](const auto& a, const auto& b) { return detail::candidate_before(a, b, active); });

    std::vector<detail::Hyp> next;
    std::size_t top_final = 0;
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < keep && (k < beam || next.size() < beam); ++k) {
      const auto& c = cand[k];
      detail::Hyp h{active[c.row].tokens, c.score};
      h.tokens.push_back(c.token);
      if (c.token == eos) {
        if (k < beam) {
          finished.push_back(std::move(h));
          ++top_final;
        }
      } else if (next.size() < beam) {
        next.push_back(std::move(h));
        rows.push_back(c.row);
      }
    }
    const bool last = t + 1 == max_len;
    const bool done = top_final == beam || (finished.size() >= beam && detail::settled(finished, next, max_len));
    if (next.empty() || (!last && done)) {
      active.clear();
      break;
    }
    state = model.reorder(step.state, rows);
    active = std::move(next);
  }

  std::vector<detail::Hyp> pool = std::move(finished);
  for (auto& h : active) pool.push_back(std::move(h));
  auto norm = [](const detail::Hyp& h) { return h.score / static_cast<double>(h.tokens.size()); };
  const auto best = std::min_element(pool.begin(), pool.end(), [&](const auto& a, const auto& b) {
    const double na = norm(a), nb = norm(b);
    if (na != nb) return na > nb;
    return a.tokens < b.tokens;
  });
  DecodeResult out;
  out.log_likelihood = best->score;
  out.length = best->tokens.size();
  out.finished = !best->tokens.empty() && best->tokens.back() == eos;
  out.tokens = best->tokens;
  if (out.finished) out.tokens.pop_back();
  return out;
}

// Step model over a trained network for one source sentence. All tensors are
// built with gradient tracking disabled.
template <class T>
class ModelStepper {
 public:
  struct State {
    DecoderState<T> decoder;
    AttentionMemory<T> memory;
  };

  ModelStepper(const Seq2Seq<T>& model, std::span<const int> src) : model_(model) {
    NoGradGuard guard;
    auto enc = model_.encode(src);
    initial_ = model_.initial_state(enc);
    memory_ = std::move(enc.memory);
  }

  std::size_t vocab_size() const { return model_.config().tgt_vocab; }
  int bos() const { return kBos; }
  int eos() const { return kEos; }

  State start() const { return {initial_, memory_}; }

  StepResult<State> advance(const State& s, std::span<const int> tokens) const {
    NoGradGuard guard;
    auto out = model_.decoder_step(tokens, s.decoder, s.memory);
    auto lp = out.log_probs.values();
    return {std::vector<double>(lp.begin(), lp.end()), State{std::move(out.state), s.memory}};
  }

  State reorder(const State& s, std::span<const std::size_t> rows) const {
    NoGradGuard guard;
    State r;
    for (const auto& l : s.decoder.layers) r.decoder.layers.push_back({select_rows(l.h, rows), select_rows(l.c, rows)});
    r.decoder.memory = select_rows(s.decoder.memory, rows);
    r.memory = s.memory.batch == rows.size() ? s.memory : repeat_memory(memory_, rows.size());
    return r;
  }

 private:
  const Seq2Seq<T>& model_;
  DecoderState<T> initial_;
  AttentionMemory<T> memory_;
};

template <class T>
DecodeResult translate_ids(const Seq2Seq<T>& model, std::span<const int> src, std::size_t beam, std::size_t max_len) {
  const ModelStepper<T> stepper(model, src);
  return beam <= 1 ? greedy(stepper, max_len) : beam_search(stepper, beam, max_len);
}

// Greedy decoding of many sentences at once. Rows finish independently; the
// result for each row matches single-sentence greedy decoding.
template <class T>
std::vector<std::vector<int>> greedy_batch(const Seq2Seq<T>& model, std::span<const std::vector<int>> sources,
                                           std::size_t max_len_override = 0) {
  NoGradGuard guard;
  std::vector<std::vector<int>> out(sources.size());
  if (sources.empty()) return out;
  SourceBatch src;
  src.batch = sources.size();
  for (const auto& s : sources) {
    if (s.empty()) throw std::invalid_argument("greedy_batch: empty source sentence");
    src.width = std::max(src.width, s.size());
    src.lengths.push_back(s.size());
  }
  src.ids.assign(src.batch * src.width, kPad);
  for (std::size_t r = 0; r < src.batch; ++r) std::copy(sources[r].begin(), sources[r].end(), src.ids.begin() + r * src.width);

  const auto enc = model.encode(src);
  auto state = model.initial_state(enc);
  std::vector<std::size_t> limit(src.batch);
  std::size_t steps = 0;
  for (std::size_t r = 0; r < src.batch; ++r) {
    limit[r] = max_len_override > 0 ? max_len_override : model.config().decode_limit(src.lengths[r]);
    steps = std::max(steps, limit[r]);
  }
  const std::size_t V = model.config().tgt_vocab;
  std::vector<int> prev(src.batch, kBos);
  std::vector<bool> done(src.batch, false);
  for (std::size_t t = 0; t < steps; ++t) {
    auto step = model.decoder_step(prev, state, enc);
    auto lp = step.log_probs.values();
    bool all = true;
    for (std::size_t r = 0; r < src.batch; ++r) {
      if (done[r]) continue;
      std::vector<double> row(lp.begin() + static_cast<std::ptrdiff_t>(r * V),
                              lp.begin() + static_cast<std::ptrdiff_t>((r + 1) * V));
      const int tok = argmax_row(row);
      if (tok == kEos) {
        done[r] = true;
      } else {
        out[r].push_back(tok);
        prev[r] = tok;
        if (t + 1 == limit[r]) done[r] = true;
      }
      all = all && done[r];
    }
    if (all) break;
    state = std::move(step.state);
  }
  return out;
}

}  // namespace acanmt
