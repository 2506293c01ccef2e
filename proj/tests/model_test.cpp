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

#include "acanmt/model.hpp"

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "acanmt/gradcheck.hpp"
#include "gtest/gtest.h"
#include "reference_model.hpp"

namespace acanmt {
namespace {

ModelConfig Tiny(bool aca, std::size_t vocab = 9) {
  ModelConfig c;
  c.src_vocab = vocab;
  c.tgt_vocab = vocab;
  c.embed_dim = 4;
  c.hidden_dim = 3;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.dropout = 0.0;
  c.use_aca = aca;
  return c;
}

// Random values on every parameter, biases included.
void Randomize(Seq2Seq<double>& m, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& p : m.named_parameters())
    for (auto& v : p.tensor.mutable_values()) v = u(gen);
}

std::vector<double> Vals(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

Batch MakeBatch(const std::vector<EncodedPair>& pairs) {
  std::vector<std::size_t> idx(pairs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(pairs, idx);
}

TEST(ModelConfigTest, DefaultsAndRoundTrip) {
  ModelConfig d;
  EXPECT_EQ(d.embed_dim, 512u);
  EXPECT_EQ(d.hidden_dim, 512u);
  EXPECT_EQ(d.enc_layers, 3u);
  EXPECT_EQ(d.dec_layers, 2u);
  EXPECT_DOUBLE_EQ(d.dropout, 0.2);
  EXPECT_EQ(d.decode_limit(7), 24u);
  auto c = Tiny(true);
  c.dropout = 0.123456789;
  EXPECT_EQ(ModelConfig::from_text(c.to_text()), c);
  EXPECT_THROW(ModelConfig::from_text(c.to_text() + "colour=blue\n"), std::invalid_argument);
  EXPECT_THROW(ModelConfig::from_text("src_vocab=0\ntgt_vocab=5\n"), std::invalid_argument);
}

TEST(ModelTest, ZeroOutputProjectionGivesUniform) {
  Seq2Seq<double> m(Tiny(true, 11), 1);
  for (auto* t : {&m.output.W, &m.output.b})
    for (auto& v : t->mutable_values()) v = 0.0;
  const std::vector<int> src{4, 5};
  auto enc = m.encode(std::span<const int>(src));
  const std::vector<int> prev{kBos};
  auto out = m.decoder_step(prev, m.initial_state(enc), enc);
  for (double lp : out.log_probs.values()) EXPECT_NEAR(lp, -std::log(11.0), 1e-12);
}

TEST(ModelTest, LogProbsNormalise) {
  for (bool aca : {false, true}) {
    Seq2Seq<double> m(Tiny(aca), 2);
    Randomize(m, 3, 1.0);
    const std::vector<int> src{4, 5, 6, 7};
    auto enc = m.encode(std::span<const int>(src));
    auto state = m.initial_state(enc);
    for (int tok : {kBos, 4, 8, 5}) {
      auto out = m.decoder_step(std::vector<int>{tok}, state, enc);
      double s = 0.0;
      for (double lp : out.log_probs.values()) s += std::exp(lp);
      EXPECT_NEAR(s, 1.0, 1e-5);
      state = out.state;
    }
  }
}

TEST(ModelTest, MatchesStraightLineReference) {
  for (bool aca : {false, true}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Seq2Seq<double> m(Tiny(aca), seed);
      Randomize(m, seed * 7);
      const std::vector<int> src{4, 6, 5, 8, 7}, tgt{5, 5, 7};
      const auto ref = reference::run(m, src, tgt);
      auto enc = m.encode(std::span<const int>(src));
      auto state = m.initial_state(enc);
      std::vector<int> feed{kBos, 5, 5, 7};
      for (std::size_t t = 0; t < feed.size(); ++t) {
        auto out = m.decoder_step(std::vector<int>{feed[t]}, state, enc);
        EXPECT_EQ(Vals(out.query), ref[t].s);
        EXPECT_EQ(Vals(out.alpha), ref[t].alpha);
        EXPECT_EQ(Vals(out.context), ref[t].context);
        EXPECT_EQ(Vals(out.features), ref[t].features);
        EXPECT_EQ(Vals(out.log_probs), ref[t].log_probs) << "aca=" << aca << " seed=" << seed << " t=" << t;
        if (aca) {
          EXPECT_EQ(Vals(out.state.memory), ref[t].memory);
        }
        state = out.state;
      }
    }
  }
}

TEST(ModelTest, MemoryEvolvesOnlyWithAca) {
  const std::vector<int> src{4, 5, 6};
  for (bool aca : {false, true}) {
    Seq2Seq<double> m(Tiny(aca), 4);
    Randomize(m, 5);
    auto enc = m.encode(std::span<const int>(src));
    auto s0 = m.initial_state(enc);
    auto s1 = m.decoder_step(std::vector<int>{kBos}, s0, enc).state;
    auto s2 = m.decoder_step(std::vector<int>{4}, s1, enc).state;
    if (aca) {
      EXPECT_NE(Vals(s1.memory), Vals(s0.memory));
      EXPECT_NE(Vals(s2.memory), Vals(s1.memory));
    } else {
      EXPECT_EQ(s2.memory.id(), s0.memory.id());
    }
  }
}

TEST(ModelTest, DecoderStepRejectsBadInput) {
  Seq2Seq<double> m(Tiny(true), 1);
  const std::vector<int> src{4};
  auto enc = m.encode(std::span<const int>(src));
  auto st = m.initial_state(enc);
  EXPECT_THROW(m.decoder_step(std::vector<int>{9}, st, enc), std::out_of_range);
  EXPECT_THROW(m.decoder_step(std::vector<int>{-1}, st, enc), std::out_of_range);
  st.layers.pop_back();
  EXPECT_THROW(m.decoder_step(std::vector<int>{4}, st, enc), std::invalid_argument);
}

TEST(ModelTest, UniformModelLossIsLnV) {
  Seq2Seq<double> m(Tiny(false, 13), 1);
  for (auto* t : {&m.output.W, &m.output.b})
    for (auto& v : t->mutable_values()) v = 0.0;
  auto loss = m.nll_loss(MakeBatch({{{4, 5, 6}, {7, 8, 9, 10}}}));
  EXPECT_NEAR(loss.item(), std::log(13.0), 1e-12);
}

TEST(ModelTest, ConfidentCorrectModelHasNearZeroLoss) {
  // The output bias alone decides the token; every gold token is that one.
  Seq2Seq<double> m(Tiny(false, 6), 1);
  for (auto& v : m.output.W.mutable_values()) v = 0.0;
  auto b = m.output.b.mutable_values();
  for (std::size_t j = 0; j < b.size(); ++j) b[j] = -40.0;
  b[kEos] = 40.0;
  auto loss = m.nll_loss(MakeBatch({{{4, 5}, {}}}));
  EXPECT_LT(loss.item(), 1e-6);
}

TEST(ModelTest, LossEqualsHandRolledTokenAverage) {
  for (bool aca : {false, true}) {
    Seq2Seq<double> m(Tiny(aca), 6);
    Randomize(m, 8);
    const std::vector<EncodedPair> pairs{{{4, 5, 6}, {7, 8}}, {{6, 7}, {4, 5, 8}}};
    const double loss = m.nll_loss(MakeBatch(pairs)).item();
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& p : pairs) {
      auto enc = m.encode(std::span<const int>(p.src));
      auto state = m.initial_state(enc);
      std::vector<int> gold = p.tgt;
      gold.push_back(kEos);
      int prev = kBos;
      for (int g : gold) {
        auto out = m.decoder_step(std::vector<int>{prev}, state, enc);
        total -= out.log_probs.at(static_cast<std::size_t>(g));
        ++tokens;
        state = out.state;
        prev = g;
      }
    }
    EXPECT_NEAR(loss, total / static_cast<double>(tokens), 1e-12);
  }
}

TEST(ModelTest, LossIsPermutationInvariantOverBatchOrder) {
  Seq2Seq<double> m(Tiny(true), 9);
  Randomize(m, 10);
  std::vector<EncodedPair> pairs{{{4, 5, 6, 7}, {7, 8}}, {{6}, {4, 5, 8, 8}}, {{8, 4}, {5}}};
  const double a = m.nll_loss(MakeBatch(pairs)).item();
  std::swap(pairs[0], pairs[2]);
  const double b = m.nll_loss(MakeBatch(pairs)).item();
  EXPECT_NEAR(a, b, 1e-6);
}

TEST(ModelTest, EmptyBatchThrows) {
  Seq2Seq<double> m(Tiny(true), 1);
  EXPECT_THROW(m.nll_loss(Batch{}), std::invalid_argument);
}

TEST(ModelTest, OpenUpdateGateMatchesUngatedContext) {
  Seq2Seq<double> m(Tiny(true), 11);
  Randomize(m, 12);
  for (auto& v : m.aca->update.W.mutable_values()) v = 0.0;
  for (auto& v : m.aca->update.b.mutable_values()) v = 10.0;
  const std::vector<int> src{4, 5, 6};
  auto enc = m.encode(std::span<const int>(src));
  auto state = m.initial_state(enc);
  for (int tok : {kBos, 7, 8}) {
    auto out = m.decoder_step(std::vector<int>{tok}, state, enc);
    auto ungated = log_softmax(affine(tanh(affine(concat({out.query, out.context}), m.aca->output)), m.output));
    for (std::size_t j = 0; j < ungated.size(); ++j) EXPECT_NEAR(out.log_probs.values()[j], ungated.values()[j], 1e-3);
    state = out.state;
  }
}

TEST(ModelTest, GradientCheckCoversEveryParameter) {
  ModelConfig c = Tiny(true, 7);
  c.enc_layers = 3;
  Seq2Seq<double> m(c, 13);
  Randomize(m, 14);
  const auto batch = MakeBatch({{{4, 5, 6}, {6, 5, 4}}});
  auto params = m.parameters();
  auto res = finite_difference_check<double>([&] { return m.nll_loss(batch); }, std::span<Tensor<double>>(params), 1e-5);
  EXPECT_EQ(res.coordinates, m.parameter_count());
  EXPECT_LT(res.max_rel_error, 1e-4) << m.named_parameters()[res.worst_param].name << "[" << res.worst_index << "]";
}

TEST(ModelTest, PaddedBatchLossMatchesPerSentenceSum) {
  Seq2Seq<double> m(Tiny(true), 15);
  Randomize(m, 16);
  const std::vector<EncodedPair> pairs{{{4, 5, 6, 7, 8}, {7}}, {{6, 7}, {4, 5, 8, 8, 6}}};
  const double joint = m.nll_loss(MakeBatch(pairs)).item();
  const double a = m.nll_loss(MakeBatch({pairs[0]})).item();
  const double b = m.nll_loss(MakeBatch({pairs[1]})).item();
  EXPECT_NEAR(joint, (2.0 * a + 6.0 * b) / 8.0, 1e-12);
}

TEST(ModelTest, CloneIsDeepAndParameterNamesAreUnique) {
  Seq2Seq<double> m(Tiny(true), 17);
  auto c = m.clone();
  ASSERT_EQ(c.named_parameters().size(), m.named_parameters().size());
  std::set<std::string> names;
  for (std::size_t i = 0; i < m.named_parameters().size(); ++i) {
    const auto& a = m.named_parameters()[i];
    const auto& b = c.named_parameters()[i];
    EXPECT_TRUE(names.insert(a.name).second) << a.name;
    EXPECT_EQ(Vals(a.tensor), Vals(b.tensor));
    EXPECT_NE(a.tensor.id(), b.tensor.id());
  }
  c.named_parameters()[0].tensor.mutable_values()[0] += 1.0;
  EXPECT_NE(Vals(c.named_parameters()[0].tensor), Vals(m.named_parameters()[0].tensor));
}

TEST(ModelTest, BaselineHasNoAcaParameters) {
  Seq2Seq<double> base(Tiny(false), 1), aca(Tiny(true), 1);
  for (const auto& p : base.named_parameters()) EXPECT_NE(p.name.rfind("aca.", 0), 0u) << p.name;
  EXPECT_GT(aca.parameter_count(), base.parameter_count());
}

}  // namespace
}  // namespace acanmt
