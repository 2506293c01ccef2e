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

#include "acanmt/evaluation.hpp"

#include <cctype>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "bleu_fixtures.hpp"
#include "gtest/gtest.h"

namespace acanmt {
namespace {

using Lines = std::vector<std::string>;

BleuReport Bleu(const Lines& hyps, const Lines& refs) {
  return corpus_bleu(std::span<const std::string>(hyps), std::span<const std::string>(refs));
}

double Dup(const Lines& sents, std::size_t n) { return duplicate_rate(std::span<const std::string>(sents), n); }

TEST(BleuTest, FrozenFixturesReproduce) {
  const auto set = testing::load_bleu_fixtures();
  ASSERT_EQ(set.pairs.size(), 20u);
  Lines hyps, refs;
  for (const auto& f : set.pairs) {
    EXPECT_NEAR(Bleu({f.hyp}, {f.ref}).score, f.expected, 1e-9) << f.hyp << " | " << f.ref;
    hyps.push_back(f.hyp);
    refs.push_back(f.ref);
  }
  EXPECT_NEAR(Bleu(hyps, refs).score, set.corpus, 1e-9);
}

TEST(BleuTest, SingleSubstitutionExample) {
  const auto r = Bleu({"a b c d e"}, {"a b c d f"});
  EXPECT_DOUBLE_EQ(r.precision[0], 4.0 / 5.0);
  EXPECT_DOUBLE_EQ(r.precision[1], 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(r.precision[2], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.precision[3], 1.0 / 2.0);
  EXPECT_EQ(r.brevity_penalty, 1.0);
  EXPECT_NEAR(r.score, 100.0 * std::pow(0.2, 0.25), 1e-12);
  EXPECT_NEAR(r.score, 66.87, 5e-3);
}

TEST(BleuTest, ClippedUnigramExample) {
  const auto r = Bleu({"the the the the the the the"}, {"the cat is on the mat"});
  EXPECT_EQ(r.matches[0], 2u);
  EXPECT_EQ(r.totals[0], 7u);
  EXPECT_DOUBLE_EQ(r.precision[0], 2.0 / 7.0);
  EXPECT_EQ(r.matches[1], 0u);
  EXPECT_EQ(r.score, 0.0);
}

TEST(BleuTest, IdentityScoresHundred) {
  const Lines s{"a b c d", "the cat sat on the mat", "x y z w v"};
  const auto r = Bleu(s, s);
  EXPECT_DOUBLE_EQ(r.score, 100.0);
  EXPECT_EQ(r.brevity_penalty, 1.0);
}

TEST(BleuTest, CaseInsensitive) {
  const auto set = testing::load_bleu_fixtures();
  Lines hyps, upper, refs;
  for (const auto& f : set.pairs) {
    hyps.push_back(f.hyp);
    std::string u = f.hyp;
    for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    upper.push_back(u);
    refs.push_back(f.ref);
  }
  EXPECT_EQ(Bleu(hyps, refs).score, Bleu(upper, refs).score);
}

TEST(BleuTest, BrevityPenaltyForShortOutput) {
  const auto r = Bleu({"a b c d"}, {"a b c d e f"});
  EXPECT_NEAR(r.brevity_penalty, std::exp(1.0 - 6.0 / 4.0), 1e-15);
  EXPECT_NEAR(r.score, 100.0 * std::exp(1.0 - 1.5), 1e-12);
  EXPECT_EQ(r.hyp_length, 4u);
  EXPECT_EQ(r.ref_length, 6u);
}

TEST(BleuTest, EmptyHypothesisScoresZero) {
  const auto r = Bleu({""}, {"a b c"});
  EXPECT_EQ(r.score, 0.0);
  EXPECT_EQ(r.hyp_length, 0u);
}

TEST(BleuTest, ClosestReferenceLengthWins) {
  const Lines hyps{"a b c d e"};
  const std::vector<Lines> refs{{"a b c", "a b c d e f x", "a b c d e f"}};
  const auto r = corpus_bleu(std::span<const std::string>(hyps), std::span<const Lines>(refs));
  EXPECT_EQ(r.ref_length, 6u);
  const std::vector<Lines> tie{{"a b c d", "a b c d e f"}};
  EXPECT_EQ(corpus_bleu(std::span<const std::string>(hyps), std::span<const Lines>(tie)).ref_length, 4u);
}

TEST(BleuTest, LineCountMismatchThrows) { EXPECT_THROW(Bleu({"a", "b"}, {"a"}), std::invalid_argument); }

TEST(BleuTest, ScoreStaysInRange) {
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<int> tok(0, 5), len(0, 12);
  for (int trial = 0; trial < 200; ++trial) {
    Lines h, r;
    for (int s = 0; s < 4; ++s) {
      std::string a, b;
      for (int k = len(gen); k > 0; --k) a += std::string(1, static_cast<char>('a' + tok(gen))) + " ";
      for (int k = 1 + len(gen); k > 0; --k) b += std::string(1, static_cast<char>('a' + tok(gen))) + " ";
      h.push_back(a);
      r.push_back(b);
    }
    const auto rep = Bleu(h, r);
    EXPECT_GE(rep.score, 0.0);
    EXPECT_LE(rep.score, 100.0 + 1e-9);
    if (rep.hyp_length > 0) {
      EXPECT_GT(rep.brevity_penalty, 0.0);
    }
    EXPECT_LE(rep.brevity_penalty, 1.0);
  }
}

TEST(DuplicateTest, DefinitionalCases) {
  EXPECT_EQ(Dup({"a b c"}, 1), 0.0);
  EXPECT_DOUBLE_EQ(Dup({"a b a b"}, 2), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(Dup({"a a", "b c"}, 1), 0.25);
}

TEST(DuplicateTest, ShortSentencesContributeZero) {
  EXPECT_EQ(Dup({"a a a"}, 4), 0.0);
  EXPECT_DOUBLE_EQ(Dup({"a a a", "x x x x"}, 4), 0.0);
  EXPECT_DOUBLE_EQ(Dup({"", "a a"}, 1), 0.25);
}

TEST(DuplicateTest, SingleTokenRepeated) {
  for (std::size_t k = 1; k <= 20; ++k) {
    std::string s;
    for (std::size_t i = 0; i < k; ++i) s += "w ";
    EXPECT_DOUBLE_EQ(Dup({s}, 1), static_cast<double>(k - 1) / static_cast<double>(k));
  }
}

TEST(DuplicateTest, AppendingACopiedHalfIncreasesRate) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t half = 2 + static_cast<std::size_t>(trial % 7);
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < half; ++i) toks.push_back("t" + std::to_string(gen() % 6));
    std::string once, twice;
    for (const auto& t : toks) once += t + " ";
    twice = once + once;
    for (std::size_t n = 1; n <= half; ++n) EXPECT_GT(Dup({twice}, n), Dup({once}, n)) << once << " n=" << n;
  }
}

TEST(DuplicateTest, ErrorsOnEmptyCorpusOrZeroOrder) {
  EXPECT_THROW(Dup({}, 1), std::invalid_argument);
  EXPECT_THROW(Dup({"a"}, 0), std::invalid_argument);
}

TEST(BucketTest, AbsentWhenNoReferenceIsLongEnough) {
  const std::vector<std::size_t> th{10};
  const Lines h{"a b c d e"}, r{"a b c d e"};
  const auto b = bucketed_bleu(std::span<const std::string>(h), std::span<const std::string>(r), th);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_FALSE(b[0].report.has_value());
}

TEST(BucketTest, ThresholdsSelectByReferenceLength) {
  const Lines h{"a b c d x", "p q r s t u v w x y z a b c d"};
  const Lines r{"a b c d e", "p q r s t u v w x y z a b c e"};
  const auto& th = default_length_thresholds();
  const auto b = bucketed_bleu(std::span<const std::string>(h), std::span<const std::string>(r), th);
  ASSERT_EQ(b.size(), 7u);
  EXPECT_EQ(b[0].report->score, Bleu(h, r).score);
  EXPECT_EQ(b[1].report->score, Bleu({h[1]}, {r[1]}).score);
  for (std::size_t i = 2; i < b.size(); ++i) EXPECT_FALSE(b[i].report.has_value());
  const std::vector<std::size_t> bad{10, 0};
  EXPECT_THROW(bucketed_bleu(std::span<const std::string>(h), std::span<const std::string>(r), bad),
               std::invalid_argument);
}

TEST(ReportTest, KeyValueOutputListsEveryMetric) {
  const Lines h{"a b c d e f g h i j k", "x y"}, r{"a b c d e f g h i j k", "x y"};
  const auto rep = evaluate_corpus(std::span<const std::string>(h), std::span<const std::string>(r),
                                   default_length_thresholds());
  const std::string kv = report_kv(rep);
  for (const char* key : {"bleu=100.0000\n", "p1=1.000000\n", "p4=1.000000\n", "bp=1.000000\n", "hyp_len=13\n",
                          "ref_len=13\n", "dup1=0.000000\n", "dup4=0.000000\n", "bleu_len0=100.0000\n",
                          "bleu_len10=100.0000\n"})
    EXPECT_NE(kv.find(key), std::string::npos) << key;
  EXPECT_EQ(kv.find("bleu_len20"), std::string::npos);
  const std::string text = report_text(rep);
  EXPECT_NE(text.find("BLEU       100.00"), std::string::npos);
}

}  // namespace
}  // namespace acanmt
