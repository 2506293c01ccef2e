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

// Corpora, vocabularies, padded batches and synthetic parallel tasks.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "acanmt/encoder.hpp"
#include "acanmt/io.hpp"

namespace acanmt {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr std::size_t kReservedTokens = 4;

inline std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == '\n')) ++i;
    std::size_t j = i;
    while (j < line.size() && !(line[j] == ' ' || line[j] == '\t' || line[j] == '\r' || line[j] == '\n')) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

class Vocab {
 public:
  Vocab() : tokens_{"<pad>", "<s>", "</s>", "<unk>"} {
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
  }

  // Keeps the (max_size - 4) most frequent whitespace tokens; ties go to the
  // token seen first.
  static Vocab build(std::span<const std::string> lines, std::size_t max_size) {
    if (max_size <= kReservedTokens) throw std::invalid_argument("build_vocab: max_size must exceed 4");
    if (lines.empty()) throw std::invalid_argument("build_vocab: empty corpus");
    Vocab v;
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<std::pair<std::string, std::size_t>> counts;  // first-occurrence order
    for (const auto& line : lines) {
      for (auto& tok : split_tokens(line)) {
        if (v.index_.count(tok)) continue;
        auto [it, fresh] = slot.try_emplace(tok, counts.size());
        if (fresh) counts.emplace_back(tok, 0);
        ++counts[it->second].second;
      }
    }
    std::stable_sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    const std::size_t keep = std::min(counts.size(), max_size - kReservedTokens);
    for (std::size_t i = 0; i < keep; ++i) v.add(counts[i].first);
    return v;
  }

  static Vocab load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocab file " + path.string());
    std::vector<std::string> toks;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      toks.push_back(line);
    }
    Vocab v;
    if (toks.size() < kReservedTokens || !std::equal(v.tokens_.begin(), v.tokens_.end(), toks.begin()))
      throw std::runtime_error("vocab file " + path.string() + " must start with <pad> <s> </s> <unk>");
    for (std::size_t i = kReservedTokens; i < toks.size(); ++i) {
      if (v.index_.count(toks[i])) throw std::runtime_error("vocab file " + path.string() + " repeats " + toks[i]);
      v.add(toks[i]);
    }
    return v;
  }

  void save(const std::filesystem::path& path) const {
    std::string text;
    for (const auto& t : tokens_) text += t + '\n';
    write_file_atomic(path, text);
  }

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    return it == index_.end() ? kUnk : it->second;
  }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  std::vector<int> encode(std::string_view line) const {
    std::vector<int> ids;
    for (const auto& t : split_tokens(line)) ids.push_back(id(t));
    return ids;
  }

  // Drops <pad>, <s> and </s>; <unk> is kept as a token.
  std::string decode(std::span<const int> ids) const {
    std::vector<std::string> toks;
    for (int i : ids)
      if (i != kPad && i != kBos && i != kEos) toks.push_back(token(i));
    return join_tokens(toks);
  }

 private:
  void add(const std::string& tok) {
    index_[tok] = static_cast<int>(tokens_.size());
    tokens_.push_back(tok);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct ParallelCorpus {
  std::vector<std::string> src;
  std::vector<std::string> tgt;

  std::size_t size() const { return src.size(); }
};

// Token ids of one sentence pair; the target is not yet wrapped.
struct EncodedPair {
  std::vector<int> src;
  std::vector<int> tgt;
};

inline std::vector<EncodedPair> encode_pairs(const ParallelCorpus& c, const Vocab& vs, const Vocab& vt) {
  if (c.src.size() != c.tgt.size()) throw std::invalid_argument("corpus sides differ in length");
  std::vector<EncodedPair> out;
  out.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back({vs.encode(c.src[i]), vt.encode(c.tgt[i])});
  return out;
}

// Padded batch. Targets are wrapped as <s> y_1 .. y_T </s>, so tgt_lengths
// counts both markers.
struct Batch {
  SourceBatch source;
  std::size_t tgt_width = 0;
  std::vector<int> tgt;
  std::vector<std::size_t> tgt_lengths;
  std::vector<std::size_t> indices;  // positions of the pairs in the input list

  std::size_t size() const { return source.batch; }
};

inline Batch make_batch(std::span<const EncodedPair> pairs, std::span<const std::size_t> which) {
  Batch b;
  const std::size_t n = which.size();
  b.source.batch = n;
  std::size_t sw = 0, tw = 0;
  for (std::size_t i : which) {
    sw = std::max(sw, pairs[i].src.size());
    tw = std::max(tw, pairs[i].tgt.size() + 2);
  }
  b.source.width = sw;
  b.source.ids.assign(n * sw, kPad);
  b.tgt_width = tw;
  b.tgt.assign(n * tw, kPad);
  for (std::size_t r = 0; r < n; ++r) {
    const EncodedPair& p = pairs[which[r]];
    std::copy(p.src.begin(), p.src.end(), b.source.ids.begin() + r * sw);
    b.source.lengths.push_back(p.src.size());
    int* row = b.tgt.data() + r * tw;
    row[0] = kBos;
    std::copy(p.tgt.begin(), p.tgt.end(), row + 1);
    row[p.tgt.size() + 1] = kEos;
    b.tgt_lengths.push_back(p.tgt.size() + 2);
    b.indices.push_back(which[r]);
  }
  return b;
}

// Consecutive chunks of `batch_size` pairs in the given order.
inline std::vector<Batch> make_batches(std::span<const EncodedPair> pairs, std::span<const std::size_t> order,
                                       std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  std::vector<Batch> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - i);
    out.push_back(make_batch(pairs, order.subspan(i, n)));
  }
  return out;
}

inline std::vector<Batch> encode_batch(const ParallelCorpus& pairs, const Vocab& vs, const Vocab& vt,
                                       std::size_t batch_size = 64) {
  if (pairs.size() == 0) throw std::invalid_argument("encode_batch: no pairs");
  const auto enc = encode_pairs(pairs, vs, vt);
  std::vector<std::size_t> order(enc.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return make_batches(enc, order, batch_size);
}

// ---------------------------------------------------------------------------
// Synthetic tasks

enum class Task { kCopy, kReverse, kRepeatTrap };

inline Task parse_task(std::string_view name) {
  if (name == "copy") return Task::kCopy;
  if (name == "reverse") return Task::kReverse;
  if (name == "repeat-trap") return Task::kRepeatTrap;
  throw std::invalid_argument("unknown task '" + std::string(name) + "' (copy|reverse|repeat-trap)");
}

// Collapses runs of identical adjacent tokens.
inline std::vector<std::string> collapse_runs(std::span<const std::string> toks) {
  std::vector<std::string> out;
  for (const auto& t : toks)
    if (out.empty() || out.back() != t) out.push_back(t);
  return out;
}

// Tokens are the decimal strings 0..vocab_size-1. Lengths are source lengths.
// repeat-trap sources are runs of 1-3 copies of tokens that differ from their
// neighbours; the target keeps one token per run.
inline ParallelCorpus gen_synthetic(Task task, std::size_t count, std::size_t vocab_size, std::size_t min_len,
                                   std::size_t max_len, std::uint64_t seed) {
  if (vocab_size < 5) throw std::invalid_argument("gen_synthetic: vocab_size must be at least 5");
  if (min_len == 0 || min_len > max_len) throw std::invalid_argument("gen_synthetic: invalid length range");
  Rng gen(seed);
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> tok(0, vocab_size - 1);
  std::uniform_int_distribution<std::size_t> run(1, 3);
  ParallelCorpus c;
  c.src.reserve(count);
  c.tgt.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t n = len(gen);
    std::vector<std::string> src;
    if (task == Task::kRepeatTrap) {
      std::size_t prev = vocab_size;
      while (src.size() < n) {
        std::size_t t = tok(gen);
        while (t == prev) t = tok(gen);
        prev = t;
        const std::size_t reps = std::min(run(gen), n - src.size());
        for (std::size_t r = 0; r < reps; ++r) src.push_back(std::to_string(t));
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) src.push_back(std::to_string(tok(gen)));
    }
    std::vector<std::string> tgt;
    switch (task) {
      case Task::kCopy: tgt = src; break;
      case Task::kReverse: tgt.assign(src.rbegin(), src.rend()); break;
      case Task::kRepeatTrap: tgt = collapse_runs(src); break;
    }
    c.src.push_back(join_tokens(src));
    c.tgt.push_back(join_tokens(tgt));
  }
  return c;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

enum class Split { kTrain, kValid, kTest };

// 90/5/5 by hash of the source line, so identical sources share a split.
inline Split split_of(std::string_view src_line) {
  const std::uint64_t bucket = fnv1a64(src_line) % 100;
  if (bucket < 90) return Split::kTrain;
  if (bucket < 95) return Split::kValid;
  return Split::kTest;
}

struct CorpusSplits {
  ParallelCorpus train, valid, test;
};

inline CorpusSplits split_corpus(const ParallelCorpus& c) {
  CorpusSplits s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    ParallelCorpus* dst = nullptr;
    switch (split_of(c.src[i])) {
      case Split::kTrain: dst = &s.train; break;
      case Split::kValid: dst = &s.valid; break;
      case Split::kTest: dst = &s.test; break;
    }
    dst->src.push_back(c.src[i]);
    dst->tgt.push_back(c.tgt[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Files

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::string lines_text(std::span<const std::string> lines) {
  std::string text;
  for (const auto& l : lines) text += l + '\n';
  return text;
}

inline ParallelCorpus read_corpus(const std::filesystem::path& src, const std::filesystem::path& tgt) {
  ParallelCorpus c{read_lines(src), read_lines(tgt)};
  if (c.src.size() != c.tgt.size())
    throw std::runtime_error(src.string() + " and " + tgt.string() + " differ in line count (" +
                             std::to_string(c.src.size()) + " vs " + std::to_string(c.tgt.size()) + ")");
  return c;
}

// Writes `<dir>/<name>.src` and `<dir>/<name>.tgt`.
inline void write_corpus(const std::filesystem::path& dir, const std::string& name, const ParallelCorpus& c) {
  write_file_atomic(dir / (name + ".src"), lines_text(c.src));
  write_file_atomic(dir / (name + ".tgt"), lines_text(c.tgt));
}

}  // namespace acanmt
