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

// Key-value run configuration: model and training settings plus paths.
// Lines are `key = value`; `#` starts a comment.

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "acanmt/model.hpp"
#include "acanmt/train.hpp"

namespace acanmt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t max_vocab = 50000;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{
        "embed_dim", "hidden_dim",  "enc_layers", "dec_layers",     "dropout",     "use_aca",
        "max_decode_len", "init_scale", "lr",    "batch_size",     "clip_norm",   "epochs",
        "seed",      "validate_every", "sort_window", "max_vocab", "data_dir",    "out_dir"};
    return k;
  }

  void set(const std::string& key, const std::string& value) {
    try {
      if (key == "src_vocab" || key == "tgt_vocab")
        throw ConfigError("'" + key + "' is derived from the training data and cannot be set");
      if (key == "dropout") {
        model.set(key, value);
        train.dropout = model.dropout;
        return;
      }
      if (model.set(key, value)) return;
      if (key == "lr") train.lr = parse_double(value);
      else if (key == "batch_size") train.batch_size = parse_size(value);
      else if (key == "clip_norm") train.clip_norm = parse_double(value);
      else if (key == "epochs") train.epochs = parse_size(value);
      else if (key == "seed") train.seed = parse_size(value);
      else if (key == "validate_every") train.validate_every = parse_size(value);
      else if (key == "sort_window") train.sort_window = parse_size(value);
      else if (key == "max_vocab") max_vocab = parse_size(value);
      else if (key == "data_dir") data_dir = value;
      else if (key == "out_dir") out_dir = value;
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    } catch (const std::out_of_range&) {
      throw ConfigError("config key '" + key + "': value '" + value + "' out of range");
    }
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
      try {
        set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  // `key=value` override from the command line.
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set(trim(std::string_view(kv).substr(0, eq)), trim(std::string_view(kv).substr(eq + 1)));
  }

 private:
  static double parse_double(const std::string& v) {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("bad number '" + v + "'");
    return d;
  }

  static std::size_t parse_size(const std::string& v) {
    std::size_t pos = 0;
    if (v.empty() || v.front() == '-') throw std::invalid_argument("bad integer '" + v + "'");
    const unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("bad integer '" + v + "'");
    return static_cast<std::size_t>(n);
  }
};

}  // namespace acanmt
