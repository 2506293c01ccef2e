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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "acanmt/tensor.hpp"

namespace acanmt {

// Global L2 norm over every gradient, computed in double.
template <class T>
double global_grad_norm(std::span<const Tensor<T>> params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

// Rescales all gradients jointly so their global norm is at most max_norm.
// Returns the norm measured before clipping.
template <class T>
double clip_gradients(std::span<Tensor<T>> params, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be positive");
  const double norm = global_grad_norm(std::span<const Tensor<T>>(params.data(), params.size()));
  if (norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (T& g : p.mutable_grad()) g *= scale;
    }
  }
  return norm;
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
class Adam {
 public:
  Adam(std::span<const Tensor<T>> params, AdamConfig cfg) : cfg_(cfg) {
    if (!(cfg_.lr >= 0.0)) throw std::invalid_argument("adam: lr must be non-negative");
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  // Parameters without a gradient are treated as having a zero gradient.
  void step(std::span<Tensor<T>> params) {
    if (params.size() != m_.size()) throw ShapeError("adam: parameter count changed");
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].size() != m_[i].size()) throw ShapeError("adam: parameter " + std::to_string(i) + " resized");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      auto& m = m_[i];
      auto& v = v_[i];
      auto w = p.mutable_values();
      const bool has = p.has_grad();
      std::span<const T> g = has ? p.grad() : std::span<const T>();
      for (std::size_t k = 0; k < m.size(); ++k) {
        const double gk = has ? static_cast<double>(g[k]) : 0.0;
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
        const double mh = m[k] / bc1, vh = v[k] / bc2;
        w[k] = static_cast<T>(static_cast<double>(w[k]) - cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace acanmt
