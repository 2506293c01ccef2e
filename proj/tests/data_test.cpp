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

#include "acanmt/data.hpp"

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "gtest/gtest.h"

namespace acanmt {
namespace {

namespace fs = std::filesystem;

TEST(VocabTest, KeepsMostFrequent) {
  const std::vector<std::string> lines{"a a b"};
  auto v = Vocab::build(lines, 5);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id("a"), 4);
  EXPECT_EQ(v.id("b"), kUnk);
}

TEST(VocabTest, ReservedIds) {
  const std::vector<std::string> lines{"x"};
  auto v = Vocab::build(lines, 10);
  EXPECT_EQ(v.token(kPad), "<pad>");
  EXPECT_EQ(v.token(kBos), "<s>");
  EXPECT_EQ(v.token(kEos), "</s>");
  EXPECT_EQ(v.token(kUnk), "<unk>");
}

TEST(VocabTest, UniqueTokensKeepFirstOccurrenceOrder) {
  const std::vector<std::string> lines{"d c", "b a e"};
  auto v = Vocab::build(lines, 1000);
  ASSERT_EQ(v.size(), 9u);
  const std::vector<std::string> want{"d", "c", "b", "a", "e"};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(v.token(static_cast<int>(i + 4)), want[i]);
}

TEST(VocabTest, FrequencyTiesBrokenByFirstOccurrence) {
  const std::vector<std::string> lines{"q p p q r s s"};
  auto v = Vocab::build(lines, 6);
  EXPECT_EQ(v.token(4), "q");
  EXPECT_EQ(v.token(5), "p");
  EXPECT_EQ(v.id("s"), kUnk);
}

TEST(VocabTest, UnknownMapsToUnk) {
  const std::vector<std::string> lines{"a b"};
  auto v = Vocab::build(lines, 10);
  EXPECT_EQ(v.id("zzz"), kUnk);
  EXPECT_EQ(v.encode("a zzz b"), (std::vector<int>{4, kUnk, 5}));
}

TEST(VocabTest, Errors) {
  const std::vector<std::string> lines{"a"};
  EXPECT_THROW(Vocab::build(lines, 4), std::invalid_argument);
  EXPECT_THROW(Vocab::build(std::vector<std::string>{}, 10), std::invalid_argument);
}

TEST(VocabTest, DeterministicAndRoundTripsThroughFile) {
  const std::vector<std::string> lines{"the cat sat", "on the mat", "the end"};
  auto a = Vocab::build(lines, 100), b = Vocab::build(lines, 100);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.token(static_cast<int>(i)), b.token(static_cast<int>(i)));
  const auto path = fs::temp_directory_path() / "acanmt_vocab_test.txt";
  a.save(path);
  auto c = Vocab::load(path);
  ASSERT_EQ(c.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(c.token(static_cast<int>(i)), a.token(static_cast<int>(i)));
  fs::remove(path);
}

TEST(VocabTest, DecodeSkipsSpecialsAndRoundTrips) {
  const std::vector<std::string> lines{"x y z"};
  auto v = Vocab::build(lines, 10);
  auto ids = v.encode("z x y");
  ids.insert(ids.begin(), kBos);
  ids.push_back(kEos);
  ids.push_back(kPad);
  EXPECT_EQ(v.decode(ids), "z x y");
}

TEST(BatchTest, SinglePairMakesOneBatch) {
  ParallelCorpus c{{"a b"}, {"c"}};
  auto vs = Vocab::build(c.src, 10), vt = Vocab::build(c.tgt, 10);
  auto batches = encode_batch(c, vs, vt, 64);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].size(), 1u);
  EXPECT_EQ(batches[0].tgt, (std::vector<int>{kBos, 4, kEos}));
}

TEST(BatchTest, PadsToBatchMaximum) {
  ParallelCorpus c{{"a b c", "a b c d e"}, {"x", "y y"}};
  auto vs = Vocab::build(c.src, 10), vt = Vocab::build(c.tgt, 10);
  auto b = encode_batch(c, vs, vt, 64).at(0);
  EXPECT_EQ(b.source.width, 5u);
  EXPECT_EQ(b.source.lengths, (std::vector<std::size_t>{3, 5}));
  EXPECT_EQ(b.source.ids[3], kPad);
  EXPECT_EQ(b.source.ids[4], kPad);
  EXPECT_EQ(b.tgt_width, 4u);
  EXPECT_EQ(b.tgt_lengths, (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(b.tgt[3], kPad);
}

TEST(BatchTest, SplitsIntoBatchesAndStaysInVocabulary) {
  auto c = gen_synthetic(Task::kCopy, 150, 12, 1, 9, 3);
  auto vs = Vocab::build(std::span<const std::string>(c.src).subspan(0, 50), 8);
  auto vt = Vocab::build(c.tgt, 100);
  auto batches = encode_batch(c, vs, vt, 64);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[2].size(), 150u - 128u);
  for (const auto& b : batches) {
    for (int id : b.source.ids) EXPECT_LT(static_cast<std::size_t>(id), vs.size());
    for (int id : b.tgt) EXPECT_LT(static_cast<std::size_t>(id), vt.size());
    for (std::size_t r = 0; r < b.size(); ++r)
      for (std::size_t t = b.source.lengths[r]; t < b.source.width; ++t) EXPECT_EQ(b.source.ids[r * b.source.width + t], kPad);
  }
}

TEST(SyntheticTest, TaskRules) {
  auto copy = gen_synthetic(Task::kCopy, 50, 10, 3, 6, 1);
  auto rev = gen_synthetic(Task::kReverse, 50, 10, 3, 6, 1);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(copy.src[i], copy.tgt[i]);
    auto s = split_tokens(rev.src[i]), t = split_tokens(rev.tgt[i]);
    EXPECT_EQ(std::vector<std::string>(s.rbegin(), s.rend()), t);
    EXPECT_GE(s.size(), 3u);
    EXPECT_LE(s.size(), 6u);
  }
}

TEST(SyntheticTest, RepeatTrapCollapsesRuns) {
  const std::vector<std::string> toks{"a", "a", "b", "b"};
  EXPECT_EQ(collapse_runs(toks), (std::vector<std::string>{"a", "b"}));
  auto c = gen_synthetic(Task::kRepeatTrap, 200, 30, 8, 16, 5);
  bool stuttered = false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto s = split_tokens(c.src[i]), t = split_tokens(c.tgt[i]);
    EXPECT_EQ(collapse_runs(s), t);
    EXPECT_GE(s.size(), 8u);
    EXPECT_LE(s.size(), 16u);
    for (std::size_t k = 1; k < t.size(); ++k) EXPECT_NE(t[k], t[k - 1]);
    stuttered = stuttered || s.size() > t.size();
  }
  EXPECT_TRUE(stuttered);
}

TEST(SyntheticTest, SeedDeterministic) {
  auto a = gen_synthetic(Task::kRepeatTrap, 100, 20, 2, 9, 77);
  auto b = gen_synthetic(Task::kRepeatTrap, 100, 20, 2, 9, 77);
  auto c = gen_synthetic(Task::kRepeatTrap, 100, 20, 2, 9, 78);
  EXPECT_EQ(a.src, b.src);
  EXPECT_EQ(a.tgt, b.tgt);
  EXPECT_NE(a.src, c.src);
}

TEST(SyntheticTest, InvalidArguments) {
  EXPECT_THROW(gen_synthetic(Task::kCopy, 10, 4, 1, 3, 1), std::invalid_argument);
  EXPECT_THROW(gen_synthetic(Task::kCopy, 10, 10, 4, 3, 1), std::invalid_argument);
  EXPECT_THROW(parse_task("shuffle"), std::invalid_argument);
}

TEST(SplitTest, DisjointProportionalAndDeterministic) {
  auto c = gen_synthetic(Task::kCopy, 10000, 20, 5, 10, 9);
  auto s = split_corpus(c);
  EXPECT_EQ(s.train.size() + s.valid.size() + s.test.size(), c.size());
  std::set<std::string> tr(s.train.src.begin(), s.train.src.end());
  std::set<std::string> va(s.valid.src.begin(), s.valid.src.end());
  std::set<std::string> te(s.test.src.begin(), s.test.src.end());
  for (const auto& x : va) EXPECT_FALSE(tr.count(x));
  for (const auto& x : te) {
    EXPECT_FALSE(tr.count(x));
    EXPECT_FALSE(va.count(x));
  }
  EXPECT_NEAR(static_cast<double>(s.train.size()) / c.size(), 0.90, 0.02);
  EXPECT_NEAR(static_cast<double>(s.valid.size()) / c.size(), 0.05, 0.01);
  auto again = split_corpus(c);
  EXPECT_EQ(again.test.src, s.test.src);
}

TEST(SplitTest, HashIsFnv1a) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(CorpusFileTest, WriteReadRoundTrip) {
  const auto dir = fs::temp_directory_path() / "acanmt_corpus_test";
  fs::create_directories(dir);
  ParallelCorpus c{{"1 2", "3"}, {"2 1", "3"}};
  write_corpus(dir, "train", c);
  auto back = read_corpus(dir / "train.src", dir / "train.tgt");
  EXPECT_EQ(back.src, c.src);
  EXPECT_EQ(back.tgt, c.tgt);
  fs::remove_all(dir);
  EXPECT_THROW(read_lines(dir / "missing"), std::runtime_error);
}

}  // namespace
}  // namespace acanmt
