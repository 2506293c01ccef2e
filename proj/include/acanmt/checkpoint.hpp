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

// Binary checkpoint container, all integers little-endian:
//
//   u8  version (= 1)
//   u32 config length, config text (key=value lines)
//   u32 entry count
//   per entry: u32 name length, name (UTF-8), u32 rank, rank x u64 dims,
//              prod(dims) x f32 values

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "acanmt/io.hpp"
#include "acanmt/model.hpp"

namespace acanmt {

inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string path) : b_(bytes), path_(std::move(path)) {}

  template <class U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, b_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw CheckpointError(path_ + ": checkpoint truncated");
  }

  const std::string& b_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <class T>
std::string checkpoint_bytes(const Seq2Seq<T>& model) {
  std::string out;
  detail::put<std::uint8_t>(out, kCheckpointVersion);
  const std::string cfg = model.config().to_text();
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  const auto& named = model.named_parameters();
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::put<std::uint64_t>(out, d);
    for (T v : t.values()) detail::put<float>(out, static_cast<float>(v));
  }
  return out;
}

template <class T>
void save_checkpoint(const Seq2Seq<T>& model, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_bytes(model));
}

template <class T>
Seq2Seq<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::Reader r(bytes, path.string());
  const auto version = r.get<std::uint8_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_text(r.str(r.get<std::uint32_t>()));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  Seq2Seq<T> model(cfg, 0);
  auto& named = model.named_parameters();
  const auto count = r.get<std::uint32_t>();
  if (count != named.size())
    throw CheckpointError(path.string() + ": holds " + std::to_string(count) + " tensors, config implies " +
                          std::to_string(named.size()));
  for (auto& [name, t] : named) {
    const std::string got = r.str(r.get<std::uint32_t>());
    if (got != name) throw CheckpointError(path.string() + ": expected tensor '" + name + "', found '" + got + "'");
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (shape != t.shape())
      throw CheckpointError(path.string() + ": tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                            shape_str(t.shape()));
    for (T& v : t.mutable_values()) v = static_cast<T>(r.get<float>());
  }
  if (!r.done()) throw CheckpointError(path.string() + ": trailing bytes after last tensor");
  return model;
}

}  // namespace acanmt
