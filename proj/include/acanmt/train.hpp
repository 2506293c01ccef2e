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

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "acanmt/checkpoint.hpp"
#include "acanmt/data.hpp"
#include "acanmt/decoding.hpp"
#include "acanmt/evaluation.hpp"
#include "acanmt/io.hpp"
#include "acanmt/model.hpp"
#include "acanmt/optim.hpp"

namespace acanmt {

struct TrainConfig {
  double lr = 0.001;
  std::size_t batch_size = 64;
  double clip_norm = 10.0;
  double dropout = 0.2;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::size_t validate_every = 0;  // steps; 0 validates at the end of every epoch
  std::size_t sort_window = 100;   // batches sorted together by source length

  void validate() const {
    if (!(lr >= 0.0)) throw std::invalid_argument("train config: lr must be non-negative");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("train config: clip_norm must be positive");
    if (batch_size == 0) throw std::invalid_argument("train config: batch_size must be positive");
    if (!(dropout >= 0.0) || dropout >= 1.0) throw std::invalid_argument("train config: dropout must lie in [0, 1)");
    if (sort_window == 0) throw std::invalid_argument("train config: sort_window must be positive");
  }
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidSet {
  std::vector<std::vector<int>> src;
  std::vector<std::string> refs;
};

inline ValidSet make_valid_set(const ParallelCorpus& c, const Vocab& vs) {
  ValidSet v;
  for (std::size_t i = 0; i < c.size(); ++i) {
    v.src.push_back(vs.encode(c.src[i]));
    v.refs.push_back(c.tgt[i]);
  }
  return v;
}

struct MetricRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double train_loss = 0.0;  // mean over batches since the previous row
  double valid_bleu = 0.0;
};

inline std::string metrics_tsv(std::span<const MetricRow> rows) {
  std::string out = "epoch\tstep\ttrain_loss\tvalid_bleu\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.6f\t%.4f\n", r.epoch, r.step, r.train_loss, r.valid_bleu);
    out += buf;
  }
  return out;
}

inline std::string checkpoint_name(std::size_t epoch, std::size_t step) {
  return "model.e" + std::to_string(epoch) + ".s" + std::to_string(step) + ".ckpt";
}

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no checkpoints or metric log on disk
  std::ostream* log = nullptr;    // progress lines
  // Called after each validation; returning true ends training early.
  std::function<bool(const MetricRow&)> stop_after;
};

struct TrainResult {
  std::vector<MetricRow> rows;
  std::size_t steps = 0;
  std::size_t best_row = 0;
  double seconds = 0.0;
};

// Shuffles, groups `sort_window` batches worth of pairs, sorts each group by
// source length, cuts batches, then shuffles the batch order.
inline std::vector<Batch> epoch_batches(std::span<const EncodedPair> pairs, const TrainConfig& cfg, Rng& rng) {
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t window = cfg.sort_window * cfg.batch_size;
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += window) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + window));
    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) { return pairs[a].src.size() < pairs[b].src.size(); });
    auto chunk = make_batches(pairs, std::span<const std::size_t>(&*first, static_cast<std::size_t>(last - first)),
                              cfg.batch_size);
    for (auto& b : chunk) batches.push_back(std::move(b));
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

template <class T>
std::vector<std::string> greedy_translate(const Seq2Seq<T>& model, std::span<const std::vector<int>> sources,
                                          const Vocab& tgt_vocab, std::size_t chunk = 64) {
  std::vector<std::string> out;
  out.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); i += chunk) {
    const auto part = sources.subspan(i, std::min(chunk, sources.size() - i));
    for (const auto& ids : greedy_batch(model, part)) out.push_back(tgt_vocab.decode(ids));
  }
  return out;
}

template <class T>
TrainResult train(Seq2Seq<T>& model, const TrainConfig& cfg, std::span<const EncodedPair> pairs,
                  const ValidSet& valid, const Vocab& tgt_vocab, const TrainOptions& opt = {}) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("train: empty training corpus");
  if (valid.src.empty() || valid.src.size() != valid.refs.size())
    throw std::invalid_argument("train: validation set is empty or misaligned");
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].src.empty()) throw std::invalid_argument("train: training pair " + std::to_string(i) + " has an empty source");
  if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  auto params = model.parameters();
  Adam<T> adam(params, AdamConfig{cfg.lr});
  const ForwardContext ctx{Mode::kTrain, &rng, cfg.dropout};

  TrainResult res;
  std::vector<T> best;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  bool stop = false;

  auto run_validation = [&](std::size_t epoch) {
    const auto hyps = greedy_translate(model, std::span<const std::vector<int>>(valid.src), tgt_vocab);
    const double bleu = corpus_bleu(std::span<const std::string>(hyps), std::span<const std::string>(valid.refs)).score;
    MetricRow row{epoch, res.steps, loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0, bleu};
    loss_sum = 0.0;
    loss_count = 0;
    res.rows.push_back(row);
    if (res.rows.size() == 1 || bleu > res.rows[res.best_row].valid_bleu) {
      res.best_row = res.rows.size() - 1;
      best.clear();
      for (const auto& p : params) best.insert(best.end(), p.values().begin(), p.values().end());
    }
    if (!opt.out_dir.empty()) {
      save_checkpoint(model, opt.out_dir / checkpoint_name(epoch, res.steps));
      write_file_atomic(opt.out_dir / "metrics.tsv", metrics_tsv(res.rows));
    }
    if (opt.log) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %zu step %zu loss %.4f valid_bleu %.2f\n", epoch, res.steps,
                    row.train_loss, bleu);
      *opt.log << buf << std::flush;
    }
    if (opt.stop_after && opt.stop_after(row)) stop = true;
  };

  std::size_t last_epoch = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    last_epoch = epoch;
    const auto batches = epoch_batches(pairs, cfg, rng);
    for (const auto& batch : batches) {
      model.zero_grad();
      const Tensor<T> loss = model.nll_loss(batch, ctx);
      const double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv)) {
        std::string ids;
        for (std::size_t i : batch.indices) ids += (ids.empty() ? "" : ",") + std::to_string(i);
        throw TrainingError("non-finite loss at step " + std::to_string(res.steps + 1) + " (epoch " +
                            std::to_string(epoch) + "), batch pairs [" + ids + "]");
      }
      backward(loss);
      clip_gradients(std::span<Tensor<T>>(params), cfg.clip_norm);
      adam.step(std::span<Tensor<T>>(params));
      ++res.steps;
      loss_sum += lv;
      ++loss_count;
      if (cfg.validate_every > 0 && res.steps % cfg.validate_every == 0) {
        run_validation(epoch);
        if (stop) break;
      }
    }
    if (cfg.validate_every == 0) run_validation(epoch);
  }
  if (res.rows.empty() || loss_count > 0) run_validation(last_epoch);

  std::size_t off = 0;
  for (auto& p : params) {
    auto w = p.mutable_values();
    std::copy(best.begin() + static_cast<std::ptrdiff_t>(off), best.begin() + static_cast<std::ptrdiff_t>(off + w.size()),
              w.begin());
    off += w.size();
  }
  model.zero_grad();
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace acanmt
