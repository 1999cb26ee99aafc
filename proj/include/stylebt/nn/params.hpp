// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stylebt/nn/tensor.hpp"

namespace stylebt::nn {

/// Ordered, named collection of trainable leaves. Order is part of the
/// checkpoint format and of optimizer state alignment.
template <typename Scalar>
class ParameterList {
 public:
  Var<Scalar> add(std::string name, Matrix<Scalar> value) {
    auto v = Var<Scalar>::parameter(std::move(value));
    entries_.emplace_back(std::move(name), v);
    return v;
  }

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  Var<Scalar>& operator[](std::size_t i) { return entries_[i].second; }
  const Var<Scalar>& operator[](std::size_t i) const { return entries_[i].second; }

  void zero_grad() {
    for (auto& [_, v] : entries_) v.zero_grad();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : entries_) n += static_cast<std::size_t>(v.value().size());
    return n;
  }

  /// Copies values from another list with identical names and shapes.
  void assign_values(const ParameterList& other) {
    if (other.size() != size()) throw std::invalid_argument("parameter count mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
      if (other.name(i) != name(i) || other[i].rows() != entries_[i].second.rows() ||
          other[i].cols() != entries_[i].second.cols()) {
        throw std::invalid_argument("parameter layout mismatch at " + name(i));
      }
      entries_[i].second.mutable_value() = other[i].value();
    }
  }

  bool values_equal(const ParameterList& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      const auto& a = entries_[i].second.value();
      const auto& b = other[i].value();
      if (a.rows() != b.rows() || a.cols() != b.cols() || !(a.array() == b.array()).all()) return false;
    }
    return true;
  }

 private:
  std::vector<std::pair<std::string, Var<Scalar>>> entries_;
};

/// Gaussian initialization with the given standard deviation.
template <typename Scalar>
Matrix<Scalar> random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return m;
}

/// Weight for a fan_in x fan_out projection, scaled by 1/sqrt(fan_in).
template <typename Scalar>
Matrix<Scalar> projection_init(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
  return random_normal<Scalar>(fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

}  // namespace stylebt::nn
