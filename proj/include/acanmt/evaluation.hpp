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

// Corpus BLEU with multi-bleu semantics, n-gram duplicate rates and
// length-bucketed BLEU.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "acanmt/data.hpp"

namespace acanmt {

inline constexpr std::size_t kBleuOrder = 4;

struct BleuReport {
  double score = 0.0;  // percent
  std::array<double, kBleuOrder> precision{};
  std::array<std::size_t, kBleuOrder> matches{};
  std::array<std::size_t, kBleuOrder> totals{};
  double brevity_penalty = 1.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

inline std::string ascii_lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

namespace detail {

using Ngram = std::vector<std::string>;

inline std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[Ngram(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

inline std::vector<std::string> lower_tokens(const std::string& line) { return split_tokens(ascii_lower(line)); }

}  // namespace detail

// Every hypothesis has one or more references. The effective reference
// length per sentence is the one closest to the hypothesis length, the
// shorter on ties.
inline BleuReport corpus_bleu(std::span<const std::string> hyps, std::span<const std::vector<std::string>> refs) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses but " +
                                std::to_string(refs.size()) + " references");
  BleuReport rep;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    if (refs[s].empty()) throw std::invalid_argument("corpus_bleu: sentence " + std::to_string(s) + " has no reference");
    const auto hyp = detail::lower_tokens(hyps[s]);
    std::vector<std::vector<std::string>> rtoks;
    for (const auto& r : refs[s]) rtoks.push_back(detail::lower_tokens(r));

    rep.hyp_length += hyp.size();
    std::size_t best_len = rtoks[0].size();
    for (const auto& r : rtoks) {
      const auto d = [&](std::size_t l) { return l > hyp.size() ? l - hyp.size() : hyp.size() - l; };
      if (d(r.size()) < d(best_len) || (d(r.size()) == d(best_len) && r.size() < best_len)) best_len = r.size();
    }
    rep.ref_length += best_len;

    for (std::size_t n = 1; n <= kBleuOrder; ++n) {
      const auto hc = detail::ngram_counts(hyp, n);
      std::map<detail::Ngram, std::size_t> max_ref;
      for (const auto& r : rtoks)
        for (const auto& [g, c] : detail::ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : hc) {
        const auto it = max_ref.find(g);
        if (it != max_ref.end()) rep.matches[n - 1] += std::min(c, it->second);
      }
      if (hyp.size() >= n) rep.totals[n - 1] += hyp.size() - n + 1;
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    rep.precision[n] =
        rep.totals[n] == 0 ? 0.0 : static_cast<double>(rep.matches[n]) / static_cast<double>(rep.totals[n]);
    if (rep.matches[n] == 0) zero = true;
    else log_sum += std::log(rep.precision[n]);
  }
  if (rep.hyp_length == 0) {
    rep.brevity_penalty = 0.0;
  } else if (rep.hyp_length < rep.ref_length) {
    rep.brevity_penalty =
        std::exp(1.0 - static_cast<double>(rep.ref_length) / static_cast<double>(rep.hyp_length));
  }
  rep.score = zero ? 0.0 : 100.0 * rep.brevity_penalty * std::exp(log_sum / static_cast<double>(kBleuOrder));
  return rep;
}

inline BleuReport corpus_bleu(std::span<const std::string> hyps, std::span<const std::string> refs) {
  std::vector<std::vector<std::string>> wrapped;
  wrapped.reserve(refs.size());
  for (const auto& r : refs) wrapped.push_back({r});
  return corpus_bleu(hyps, std::span<const std::vector<std::string>>(wrapped));
}

// Fraction of repeated n-gram tokens in one sentence; 0 when it has fewer
// than n tokens.
inline double sentence_duplicate_rate(const std::vector<std::string>& toks, std::size_t n) {
  if (n == 0) throw std::invalid_argument("duplicate_rate: n must be at least 1");
  if (toks.size() < n) return 0.0;
  const std::size_t total = toks.size() - n + 1;
  std::set<detail::Ngram> distinct;
  for (std::size_t i = 0; i < total; ++i) distinct.insert(detail::Ngram(toks.begin() + i, toks.begin() + i + n));
  return static_cast<double>(total - distinct.size()) / static_cast<double>(total);
}

inline double duplicate_rate(std::span<const std::string> sentences, std::size_t n) {
  if (n == 0) throw std::invalid_argument("duplicate_rate: n must be at least 1");
  if (sentences.empty()) throw std::invalid_argument("duplicate_rate: empty corpus");
  double sum = 0.0;
  for (const auto& s : sentences) sum += sentence_duplicate_rate(split_tokens(s), n);
  return sum / static_cast<double>(sentences.size());
}

inline const std::vector<std::size_t>& default_length_thresholds() {
  static const std::vector<std::size_t> t{0, 10, 20, 30, 40, 50, 60};
  return t;
}

struct BucketBleu {
  std::size_t threshold = 0;
  std::optional<BleuReport> report;  // empty when no reference is long enough
};

inline std::vector<BucketBleu> bucketed_bleu(std::span<const std::string> hyps, std::span<const std::string> refs,
                                             std::span<const std::size_t> thresholds) {
  if (hyps.size() != refs.size()) throw std::invalid_argument("bucketed_bleu: line count mismatch");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw std::invalid_argument("bucketed_bleu: thresholds must be ascending");
  std::vector<std::size_t> ref_len(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) ref_len[i] = split_tokens(refs[i]).size();
  std::vector<BucketBleu> out;
  for (std::size_t L : thresholds) {
    std::vector<std::string> h, r;
    for (std::size_t i = 0; i < refs.size(); ++i)
      if (ref_len[i] >= L) {
        h.push_back(hyps[i]);
        r.push_back(refs[i]);
      }
    BucketBleu b{L, std::nullopt};
    if (!h.empty()) b.report = corpus_bleu(std::span<const std::string>(h), std::span<const std::string>(r));
    out.push_back(std::move(b));
  }
  return out;
}

struct EvaluationReport {
  BleuReport bleu;
  std::array<double, kBleuOrder> duplicates{};  // n = 1..4, over hypotheses
  std::vector<BucketBleu> buckets;
};

inline EvaluationReport evaluate_corpus(std::span<const std::string> hyps, std::span<const std::string> refs,
                                        std::span<const std::size_t> thresholds) {
  EvaluationReport r;
  r.bleu = corpus_bleu(hyps, refs);
  for (std::size_t n = 1; n <= kBleuOrder; ++n) r.duplicates[n - 1] = duplicate_rate(hyps, n);
  r.buckets = bucketed_bleu(hyps, refs, thresholds);
  return r;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

inline std::string report_text(const EvaluationReport& r) {
  std::ostringstream os;
  const auto& b = r.bleu;
  os << "BLEU       " << detail::fixed(b.score, 2) << '\n';
  os << "precision ";
  for (double p : b.precision) os << ' ' << detail::fixed(100.0 * p, 2);
  os << '\n';
  os << "BP         " << detail::fixed(b.brevity_penalty, 4) << "  (hyp " << b.hyp_length << ", ref "
     << b.ref_length << ")\n";
  os << "duplicates";
  for (std::size_t n = 0; n < kBleuOrder; ++n) os << "  " << n + 1 << "-gram " << detail::fixed(100.0 * r.duplicates[n], 2) << '%';
  os << '\n';
  os << "length>=  BLEU\n";
  for (const auto& k : r.buckets) {
    std::string t = std::to_string(k.threshold);
    t.resize(std::max<std::size_t>(t.size(), 9), ' ');
    os << t << ' ' << (k.report ? detail::fixed(k.report->score, 2) : std::string("-")) << '\n';
  }
  return os.str();
}

inline std::string report_kv(const EvaluationReport& r) {
  std::ostringstream os;
  const auto& b = r.bleu;
  os << "bleu=" << detail::fixed(b.score, 4) << '\n';
  for (std::size_t n = 0; n < kBleuOrder; ++n) os << 'p' << n + 1 << '=' << detail::fixed(b.precision[n], 6) << '\n';
  os << "bp=" << detail::fixed(b.brevity_penalty, 6) << '\n';
  os << "hyp_len=" << b.hyp_length << '\n';
  os << "ref_len=" << b.ref_length << '\n';
  for (std::size_t n = 0; n < kBleuOrder; ++n) os << "dup" << n + 1 << '=' << detail::fixed(r.duplicates[n], 6) << '\n';
  for (const auto& k : r.buckets)
    if (k.report) os << "bleu_len" << k.threshold << '=' << detail::fixed(k.report->score, 4) << '\n';
  return os.str();
}

}  // namespace acanmt
