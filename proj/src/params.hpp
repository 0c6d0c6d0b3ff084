// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_PARAMS_HPP
#define MMIE_PARAMS_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "autograd.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace mmie {

// Named trainable tensors in registration order. Order is part of the
// checkpoint layout and of the optimizer state, so it must be deterministic.
class ParamStore {
 public:
  ag::Var add(std::string name, Matrix init) {
    for (const auto& [n, v] : entries_)
      if (n == name) throw ConfigError("duplicate parameter name: " + name);
    ag::Var v = ag::parameter(std::move(init));
    entries_.emplace_back(std::move(name), v);
    return v;
  }

  // Glorot-uniform weight of shape fan_in x fan_out.
  ag::Var add_weight(std::string name, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    Matrix m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
    return add(std::move(name), std::move(m));
  }
  ag::Var add_zeros(std::string name, int rows, int cols) {
    return add(std::move(name), Matrix::Zero(rows, cols));
  }
  ag::Var add_ones(std::string name, int rows, int cols) {
    return add(std::move(name), Matrix::Ones(rows, cols));
  }
  ag::Var add_normal(std::string name, int rows, int cols, double stddev, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
    return add(std::move(name), std::move(m));
  }

  const std::vector<std::pair<std::string, ag::Var>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  ag::Var find(const std::string& name) const {
    for (const auto& [n, v] : entries_)
      if (n == name) return v;
    throw ConfigError("unknown parameter: " + name);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : entries_) n += static_cast<std::size_t>(v.value().size());
    return n;
  }

  void zero_grad() {
    for (auto& [n, v] : entries_) v.zero_grad();
  }

  std::vector<Matrix> snapshot() const {
    std::vector<Matrix> out;
    for (const auto& [n, v] : entries_) out.push_back(v.value());
    return out;
  }
  void restore(const std::vector<Matrix>& values) {
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].second.mutable_value() = values[i];
  }

 private:
  std::vector<std::pair<std::string, ag::Var>> entries_;
};

}  // namespace mmie

#endif  // MMIE_PARAMS_HPP
