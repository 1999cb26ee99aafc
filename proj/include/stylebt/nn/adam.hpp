// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "stylebt/nn/params.hpp"

namespace stylebt::nn {

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 1.0;
};

/// Adam with bias correction. Moments are kept in double regardless of the
/// parameter scalar type.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  long steps() const { return step_; }

  void reset() {
    first_.clear();
    second_.clear();
    step_ = 0;
  }

  /// Applies one update from the accumulated gradients, then clears them.
  /// Returns the pre-clip global gradient norm. Parameters without a
  /// gradient are treated as having gradient zero.
  double step(ParameterList<Scalar>& params) {
    if (first_.size() != params.size()) {
      first_.clear();
      second_.clear();
      for (std::size_t i = 0; i < params.size(); ++i) {
        first_.push_back(Eigen::MatrixXd::Zero(params[i].rows(), params[i].cols()));
        second_.push_back(Eigen::MatrixXd::Zero(params[i].rows(), params[i].cols()));
      }
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].has_grad()) sq += params[i].grad().template cast<double>().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    const double clip =
        (options_.clip_norm > 0.0 && norm > options_.clip_norm) ? options_.clip_norm / norm : 1.0;

    ++step_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      auto& m = first_[i];
      auto& v = second_[i];
      Eigen::MatrixXd g = p.has_grad() ? Eigen::MatrixXd(p.grad().template cast<double>() * clip)
                                       : Eigen::MatrixXd::Zero(p.rows(), p.cols());
      m = options_.beta1 * m + (1.0 - options_.beta1) * g;
      v = options_.beta2 * v + (1.0 - options_.beta2) * g.cwiseAbs2();
      const Eigen::MatrixXd update =
          options_.learning_rate * (m / c1).array() / ((v / c2).array().sqrt() + options_.epsilon);
      p.mutable_value() -= update.template cast<Scalar>();
    }
    params.zero_grad();
    return norm;
  }

 private:
  AdamOptions options_;
  std::vector<Eigen::MatrixXd> first_;
  std::vector<Eigen::MatrixXd> second_;
  long step_ = 0;
};

}  // namespace stylebt::nn
