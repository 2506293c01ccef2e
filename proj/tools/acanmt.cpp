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

// acanmt: data generation, training, translation and evaluation.
//
// Exit status: 0 on success, 2 on usage errors, 1 on runtime errors.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "acanmt/checkpoint.hpp"
#include "acanmt/config.hpp"
#include "acanmt/data.hpp"
#include "acanmt/decoding.hpp"
#include "acanmt/evaluation.hpp"
#include "acanmt/io.hpp"
#include "acanmt/train.hpp"

namespace fs = std::filesystem;
using namespace acanmt;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Usage problems detected after CLI11 parsing (bad values, missing files).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " '" + p.string() + "' does not exist or is not a file");
}

bool parse_bool(const std::string& v, const std::string& flag) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError(flag + " expects true|false, got '" + v + "'");
}

struct GenDataArgs {
  std::string task = "copy";
  std::size_t count = 5000;
  std::size_t vocab_size = 20;
  std::size_t min_len = 5;
  std::size_t max_len = 10;
  std::uint64_t seed = 1;
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  const Task task = [&] {
    try {
      return parse_task(a.task);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  if (a.vocab_size < 5) throw UsageError("--vocab-size must be at least 5");
  if (a.min_len == 0 || a.min_len > a.max_len) throw UsageError("--min-len/--max-len must satisfy 1 <= min <= max");
  const auto corpus = gen_synthetic(task, a.count, a.vocab_size, a.min_len, a.max_len, a.seed);
  const auto splits = split_corpus(corpus);
  fs::create_directories(a.out);
  write_corpus(a.out, "train", splits.train);
  write_corpus(a.out, "valid", splits.valid);
  write_corpus(a.out, "test", splits.test);
  std::cout << "wrote " << splits.train.size() << " train, " << splits.valid.size() << " valid, "
            << splits.test.size() << " test pairs to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> use_aca;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> max_len;
  std::vector<std::string> overrides;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  RunConfig rc;
  try {
    if (!a.config.empty()) {
      require_file(a.config, "config file");
      rc.load_file(a.config);
    }
    for (const auto& kv : a.overrides) rc.apply_override(kv);
    if (!a.data.empty()) rc.data_dir = a.data;
    if (!a.out.empty()) rc.out_dir = a.out;
    if (a.seed) rc.train.seed = *a.seed;
    if (a.use_aca) rc.model.use_aca = parse_bool(*a.use_aca, "--use-aca");
    if (a.epochs) rc.train.epochs = *a.epochs;
    if (a.max_len) rc.model.max_decode_len = *a.max_len;
    rc.train.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (rc.data_dir.empty()) throw UsageError("no data directory: pass --data or set data_dir");
  if (rc.out_dir.empty()) throw UsageError("no output directory: pass --out or set out_dir");
  for (const char* f : {"train.src", "train.tgt", "valid.src", "valid.tgt"}) require_file(rc.data_dir / f, "data file");

  const auto train_c = read_corpus(rc.data_dir / "train.src", rc.data_dir / "train.tgt");
  const auto valid_c = read_corpus(rc.data_dir / "valid.src", rc.data_dir / "valid.tgt");
  if (rc.max_vocab <= kReservedTokens) throw UsageError("max_vocab must exceed 4");
  const Vocab vs = Vocab::build(train_c.src, rc.max_vocab);
  const Vocab vt = Vocab::build(train_c.tgt, rc.max_vocab);
  rc.model.src_vocab = vs.size();
  rc.model.tgt_vocab = vt.size();
  try {
    rc.model.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  fs::create_directories(rc.out_dir);
  vs.save(rc.out_dir / "vocab.src");
  vt.save(rc.out_dir / "vocab.tgt");

  Seq2Seq<float> model(rc.model, rc.train.seed);
  const auto pairs = encode_pairs(train_c, vs, vt);
  const auto valid = make_valid_set(valid_c, vs);
  TrainOptions opt;
  opt.out_dir = rc.out_dir;
  if (!a.quiet) opt.log = &std::cerr;
  const auto res = train(model, rc.train, pairs, valid, vt, opt);
  save_checkpoint(model, rc.out_dir / "model.best.ckpt");
  const auto& best = res.rows[res.best_row];
  std::cout << "best valid BLEU " << best.valid_bleu << " at epoch " << best.epoch << " step " << best.step
            << "; weights in " << (rc.out_dir / "model.best.ckpt").string() << '\n';
  return 0;
}

struct TranslateArgs {
  std::string ckpt;
  std::string src;
  std::string out;
  std::string vocab_dir;
  std::size_t beam = 10;
  bool greedy = false;
  std::optional<std::size_t> max_len;
};

int run_translate(const TranslateArgs& a) {
  require_file(a.ckpt, "checkpoint");
  require_file(a.src, "source file");
  if (a.beam == 0) throw UsageError("--beam must be at least 1");
  if (a.max_len && *a.max_len == 0) throw UsageError("--max-len must be at least 1");
  const fs::path vdir = a.vocab_dir.empty() ? fs::path(a.ckpt).parent_path() : fs::path(a.vocab_dir);
  require_file(vdir / "vocab.src", "source vocabulary");
  require_file(vdir / "vocab.tgt", "target vocabulary");

  const auto model = load_checkpoint<float>(a.ckpt);
  const Vocab vs = Vocab::load(vdir / "vocab.src");
  const Vocab vt = Vocab::load(vdir / "vocab.tgt");
  if (vs.size() != model.config().src_vocab || vt.size() != model.config().tgt_vocab)
    throw std::runtime_error("vocabulary sizes (" + std::to_string(vs.size()) + ", " + std::to_string(vt.size()) +
                             ") do not match checkpoint (" + std::to_string(model.config().src_vocab) + ", " +
                             std::to_string(model.config().tgt_vocab) + "); pass the --vocab-dir used in training");
  const std::size_t beam = a.greedy ? 1 : a.beam;
  std::string text;
  for (const auto& line : read_lines(a.src)) {
    const auto ids = vs.encode(line);
    if (!ids.empty()) {
      const std::size_t limit = a.max_len ? *a.max_len : model.config().decode_limit(ids.size());
      text += vt.decode(translate_ids(model, ids, beam, limit).tokens);
    }
    text += '\n';
  }
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(a.out, text);
  }
  return 0;
}

struct EvaluateArgs {
  std::string hyp;
  std::string ref;
  std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
  require_file(a.hyp, "hypothesis file");
  require_file(a.ref, "reference file");
  const auto hyps = read_lines(a.hyp);
  const auto refs = read_lines(a.ref);
  if (hyps.size() != refs.size())
    throw UsageError("hypothesis file has " + std::to_string(hyps.size()) + " lines, reference file has " +
                     std::to_string(refs.size()));
  if (hyps.empty()) throw UsageError("hypothesis file is empty");
  const auto rep = evaluate_corpus(hyps, refs, default_length_thresholds());
  std::cout << report_text(rep);
  if (!a.out.empty()) write_file_atomic(a.out, report_kv(rep));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-based NMT with adaptive control of attention"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Write a synthetic parallel corpus split into train/valid/test");
  g->add_option("--task", gen.task, "copy | reverse | repeat-trap")->capture_default_str();
  g->add_option("--count", gen.count, "Number of sentence pairs before splitting")->capture_default_str();
  g->add_option("--vocab-size", gen.vocab_size, "Distinct source tokens")->capture_default_str();
  g->add_option("--min-len", gen.min_len, "Shortest source length")->capture_default_str();
  g->add_option("--max-len", gen.max_len, "Longest source length")->capture_default_str();
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model; writes vocabularies, checkpoints and metrics.tsv");
  t->add_option("--config", tr.config, "Key-value config file (flags override it)");
  t->add_option("--data", tr.data, "Directory holding train.{src,tgt} and valid.{src,tgt}");
  t->add_option("--out", tr.out, "Output directory for checkpoints and logs");
  t->add_option("--seed", tr.seed, "Seed for initialisation, shuffling and dropout");
  t->add_option("--use-aca", tr.use_aca, "Enable adaptive control of attention (true|false)");
  t->add_option("--epochs", tr.epochs, "Number of training epochs");
  t->add_option("--max-len", tr.max_len, "Decoding length limit during validation");
  t->add_option("--set", tr.overrides, "Override any config key (key=value, repeatable)");
  t->add_flag("--quiet", tr.quiet, "Suppress per-validation progress on stderr");

  TranslateArgs tl;
  auto* x = app.add_subcommand("translate", "Translate a tokenized source file, one sentence per line");
  x->add_option("--ckpt", tl.ckpt, "Checkpoint file")->required();
  x->add_option("--src", tl.src, "Source file")->required();
  x->add_option("--out", tl.out, "Output file (default: stdout)");
  x->add_option("--vocab-dir", tl.vocab_dir, "Directory with vocab.src/vocab.tgt (default: checkpoint directory)");
  x->add_option("--beam", tl.beam, "Beam width")->capture_default_str();
  x->add_flag("--greedy", tl.greedy, "Greedy decoding (same as --beam 1)");
  x->add_option("--max-len", tl.max_len, "Maximum output length (default: 2 x source length + 10)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "BLEU, duplicate n-gram rates and length-bucketed BLEU");
  e->add_option("--hyp", ev.hyp, "Hypothesis file")->required();
  e->add_option("--ref", ev.ref, "Reference file")->required();
  e->add_option("--out", ev.out, "Write the key=value report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitUsage;
  }

  try {
    if (*g) return run_gen_data(gen);
    if (*t) return run_train(tr);
    if (*x) return run_translate(tl);
    if (*e) return run_evaluate(ev);
  } catch (const UsageError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
