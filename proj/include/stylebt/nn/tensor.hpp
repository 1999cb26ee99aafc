// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Var is a shared handle to a graph node holding a value, an accumulated
// gradient and a backward closure. Graphs are built eagerly by the functions
// in ops.hpp and released when the last handle to the output goes away.
// Parameters are leaf Vars created with requires_grad = true; their gradients
// accumulate across backward() calls until zero_grad().

#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

namespace stylebt::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

namespace detail {
inline thread_local bool grad_enabled = true;
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled; }

/// Disables graph construction on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename Scalar>
struct Node {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Matrix<Scalar>& grad_buffer() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
      grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
    }
    return grad;
  }

  // Gradient flowing into this node; zero-sized when nothing reached it.
  bool has_grad() const { return grad.size() == value.size() && grad.size() > 0; }
};

template <typename Scalar>
class Var {
 public:
  using Mat = Matrix<Scalar>;
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Var() = default;

  explicit Var(Mat value, bool requires_grad = false) : node_(std::make_shared<Node<Scalar>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Var parameter(Mat value) { return Var(std::move(value), true); }

  bool defined() const { return static_cast<bool>(node_); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }

  bool has_grad() const { return node_->has_grad(); }
  const Mat& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Scalar item() const { return node_->value(0, 0); }

  const NodePtr& node() const { return node_; }

  /// Back-propagates from this (1x1) value with seed gradient 1.
  void backward() const {
    if (rows() != 1 || cols() != 1) {
      throw std::logic_error("backward() requires a scalar (1x1) output");
    }
    if (!node_->requires_grad) return;

    std::vector<Node<Scalar>*> order;
    std::unordered_set<Node<Scalar>*> visited;
    std::vector<std::pair<Node<Scalar>*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [current, next_input] = stack.back();
      if (next_input < current->inputs.size()) {
        Node<Scalar>* child = current->inputs[next_input++].get();
        if (child->requires_grad && visited.insert(child).second) {
          stack.emplace_back(child, 0);
        }
      } else {
        order.push_back(current);
        stack.pop_back();
      }
    }

    node_->grad_buffer().setOnes();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<Scalar>& n = **it;
      if (n.backward && n.has_grad()) n.backward(n);
    }
  }

 private:
  NodePtr node_;
};

/// Wraps an op result. The closure receives the output node; node.inputs
/// holds the operands in the order given.
template <typename Scalar, typename Backward>
Var<Scalar> make_op(Matrix<Scalar> value, std::initializer_list<Var<Scalar>> inputs,
                    Backward&& backward) {
  Var<Scalar> out(std::move(value), false);
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& v : inputs) any = any || v.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.inputs.reserve(inputs.size());
  for (const auto& v : inputs) node.inputs.push_back(v.node());
  node.backward = std::forward<Backward>(backward);
  return out;
}

}  // namespace stylebt::nn
