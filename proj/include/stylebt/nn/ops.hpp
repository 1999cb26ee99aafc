// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations on Var. Sequences are packed row-wise: a batch of
// variable-length sequences is one matrix whose rows are tokens, with a
// Segments offset vector (size batch + 1) marking where each sequence starts.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylebt/nn/tensor.hpp"

namespace stylebt::nn {

using Segments = std::vector<int>;

inline int segment_count(const Segments& s) { return static_cast<int>(s.size()) - 1; }
inline int segment_length(const Segments& s, int i) { return s[i + 1] - s[i]; }

/// Offsets for sequences of the given lengths.
inline Segments segments_from_lengths(std::span<const int> lengths) {
  Segments s(lengths.size() + 1, 0);
  for (std::size_t i = 0; i < lengths.size(); ++i) s[i + 1] = s[i] + lengths[i];
  return s;
}

namespace detail {

template <typename Scalar>
void check_same_shape(const Matrix<Scalar>& a, const Matrix<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

template <typename Scalar>
void accumulate(Node<Scalar>& n, const auto& g) {
  if (n.requires_grad) n.grad_buffer() += g;
}

template <typename Scalar>
void softmax_rows_inplace(Matrix<Scalar>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const Scalar mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

// Per-row normalization statistics used by layer_norm and the inference path.
template <typename Scalar>
struct NormStats {
  Matrix<Scalar> normalized;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
};

template <typename Scalar>
NormStats<Scalar> normalize_rows(const Matrix<Scalar>& x, Scalar eps) {
  NormStats<Scalar> s;
  s.normalized.resize(x.rows(), x.cols());
  s.inv_std.resize(x.rows());
  const Scalar n = static_cast<Scalar>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).sum() / n;
    const auto centered = (x.row(r).array() - mean).eval();
    const Scalar var = centered.square().sum() / n;
    const Scalar inv = Scalar(1) / std::sqrt(var + eps);
    s.inv_std(r) = inv;
    s.normalized.row(r) = centered * inv;
  }
  return s;
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix<Scalar> out = a.value() * b.value();
  return make_op<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& n) {
    auto& x = *n.inputs[0];
    auto& y = *n.inputs[1];
    if (x.requires_grad) x.grad_buffer().noalias() += n.grad * y.value.transpose();
    if (y.requires_grad) y.grad_buffer().noalias() += x.value.transpose() * n.grad;
  });
}

/// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Matrix<Scalar> out = a.value() * b.value().transpose();
  return make_op<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& n) {
    auto& x = *n.inputs[0];
    auto& y = *n.inputs[1];
    if (x.requires_grad) x.grad_buffer().noalias() += n.grad * y.value;
    if (y.requires_grad) y.grad_buffer().noalias() += n.grad.transpose() * x.value;
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::check_same_shape(a.value(), b.value(), "add");
  Matrix<Scalar> out = a.value() + b.value();
  return make_op<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& n) {
    detail::accumulate(*n.inputs[0], n.grad);
    detail::accumulate(*n.inputs[1], n.grad);
  });
}

/// Adds a 1 x cols bias row to every row of x.
template <typename Scalar>
Var<Scalar> add_bias(const Var<Scalar>& x, const Var<Scalar>& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw std::invalid_argument("add_bias: bias must be 1 x cols");
  }
  Matrix<Scalar> out = x.value().rowwise() + bias.value().row(0);
  return make_op<Scalar>(std::move(out), {x, bias}, [](Node<Scalar>& n) {
    detail::accumulate(*n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad) n.inputs[1]->grad_buffer() += n.grad.colwise().sum();
  });
}

template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  return add_bias(matmul(x, weight), bias);
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& x, Scalar factor) {
  Matrix<Scalar> out = x.value() * factor;
  return make_op<Scalar>(std::move(out), {x}, [factor](Node<Scalar>& n) {
    detail::accumulate(*n.inputs[0], n.grad * factor);
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  Matrix<Scalar> out = x.value().cwiseMax(Scalar(0));
  return make_op<Scalar>(std::move(out), {x}, [](Node<Scalar>& n) {
    auto& in = *n.inputs[0];
    if (!in.requires_grad) return;
    in.grad_buffer().array() += (in.value.array() > Scalar(0)).select(n.grad.array(), Scalar(0));
  });
}

/// Row-wise layer normalization with learned gain and shift (both 1 x cols).
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gain, const Var<Scalar>& shift,
                       Scalar eps = Scalar(1e-5)) {
  auto stats = detail::normalize_rows(x.value(), eps);
  Matrix<Scalar> out =
      (stats.normalized.array().rowwise() * gain.value().row(0).array()).rowwise() +
      shift.value().row(0).array();
  return make_op<Scalar>(
      std::move(out), {x, gain, shift}, [stats = std::move(stats)](Node<Scalar>& n) {
        auto& in = *n.inputs[0];
        auto& g = *n.inputs[1];
        auto& b = *n.inputs[2];
        const auto& xhat = stats.normalized;
        if (b.requires_grad) b.grad_buffer() += n.grad.colwise().sum();
        if (g.requires_grad) g.grad_buffer() += (n.grad.array() * xhat.array()).matrix().colwise().sum();
        if (!in.requires_grad) return;
        const Matrix<Scalar> dxhat = n.grad.array().rowwise() * g.value.row(0).array();
        const Scalar cols = static_cast<Scalar>(xhat.cols());
        auto& gx = in.grad_buffer();
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
          const Scalar mean_d = dxhat.row(r).sum() / cols;
          const Scalar mean_dx = dxhat.row(r).dot(xhat.row(r)) / cols;
          gx.row(r).array() +=
              stats.inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
        }
      });
}

/// Selects rows of table by id (embedding lookup).
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& table, std::vector<int> ids) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw std::out_of_range("gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  return make_op<Scalar>(std::move(out), {table}, [ids = std::move(ids)](Node<Scalar>& n) {
    auto& t = *n.inputs[0];
    if (!t.requires_grad) return;
    auto& g = t.grad_buffer();
    for (std::size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

/// Multi-head scaled dot-product attention over packed sequences.
/// q: (sum query lengths) x d; k, v: (sum key lengths) x d. Query segment i
/// attends only to key segment i. With causal = true, query row t of a
/// segment sees key rows 0..t of the same segment (query and key segments
/// must then coincide).
template <typename Scalar>
Var<Scalar> attention(const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v,
                      const Segments& q_segments, const Segments& k_segments, int heads,
                      bool causal) {
  const Eigen::Index d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != k.rows()) {
    throw std::invalid_argument("attention: q/k/v shape mismatch");
  }
  if (d % heads != 0) throw std::invalid_argument("attention: width not divisible by heads");
  if (q_segments.size() != k_segments.size()) throw std::invalid_argument("attention: segment count mismatch");
  const Eigen::Index dh = d / heads;
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const int batch = segment_count(q_segments);

  Matrix<Scalar> out = Matrix<Scalar>::Zero(q.rows(), d);
  std::vector<Matrix<Scalar>> probs(static_cast<std::size_t>(batch) * heads);
  for (int b = 0; b < batch; ++b) {
    const int q0 = q_segments[b], qn = segment_length(q_segments, b);
    const int k0 = k_segments[b], kn = segment_length(k_segments, b);
    if (qn == 0) continue;
    if (kn == 0) throw std::invalid_argument("attention: empty key segment");
    if (causal && qn != kn) throw std::invalid_argument("attention: causal needs equal segments");
    for (int h = 0; h < heads; ++h) {
      const auto qb = q.value().block(q0, h * dh, qn, dh);
      const auto kb = k.value().block(k0, h * dh, kn, dh);
      Matrix<Scalar> p = (qb * kb.transpose()) * inv_sqrt;
      if (causal) {
        for (int r = 0; r < qn; ++r)
          for (int c = r + 1; c < kn; ++c) p(r, c) = -std::numeric_limits<Scalar>::infinity();
      }
      detail::softmax_rows_inplace(p);
      out.block(q0, h * dh, qn, dh).noalias() = p * v.value().block(k0, h * dh, kn, dh);
      probs[static_cast<std::size_t>(b) * heads + h] = std::move(p);
    }
  }
  return make_op<Scalar>(
      std::move(out), {q, k, v},
      [probs = std::move(probs), q_segments, k_segments, heads, dh, inv_sqrt, batch](Node<Scalar>& n) {
        auto& qn_ = *n.inputs[0];
        auto& kn_ = *n.inputs[1];
        auto& vn_ = *n.inputs[2];
        for (int b = 0; b < batch; ++b) {
          const int q0 = q_segments[b], ql = segment_length(q_segments, b);
          const int k0 = k_segments[b], kl = segment_length(k_segments, b);
          if (ql == 0) continue;
          for (int h = 0; h < heads; ++h) {
            const Matrix<Scalar>& p = probs[static_cast<std::size_t>(b) * heads + h];
            const auto go = n.grad.block(q0, h * dh, ql, dh);
            if (vn_.requires_grad) vn_.grad_buffer().block(k0, h * dh, kl, dh).noalias() += p.transpose() * go;
            if (!qn_.requires_grad && !kn_.requires_grad) continue;
            const Matrix<Scalar> dp = go * vn_.value.block(k0, h * dh, kl, dh).transpose();
            Matrix<Scalar> ds = p.array() * dp.array();
            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_dot = ds.rowwise().sum();
            ds.array() -= p.array().colwise() * row_dot.array();
            ds *= inv_sqrt;
            if (qn_.requires_grad)
              qn_.grad_buffer().block(q0, h * dh, ql, dh).noalias() += ds * kn_.value.block(k0, h * dh, kl, dh);
            if (kn_.requires_grad)
              kn_.grad_buffer().block(k0, h * dh, kl, dh).noalias() += ds.transpose() * qn_.value.block(q0, h * dh, ql, dh);
          }
        }
      });
}

/// log softmax(logits[r])[targets[r]] for every row r, as an N x 1 column.
template <typename Scalar>
Var<Scalar> log_softmax_pick(const Var<Scalar>& logits, std::vector<int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw std::invalid_argument("log_softmax_pick: one target per row required");
  }
  Matrix<Scalar> probs = logits.value();
  detail::softmax_rows_inplace(probs);
  Matrix<Scalar> out(logits.rows(), 1);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto row = logits.value().row(r);
    const Scalar mx = row.maxCoeff();
    const Scalar lse = mx + std::log((row.array() - mx).exp().sum());
    out(r, 0) = row(targets[static_cast<std::size_t>(r)]) - lse;
  }
  return make_op<Scalar>(std::move(out), {logits},
                         [probs = std::move(probs), targets = std::move(targets)](Node<Scalar>& n) {
                           auto& in = *n.inputs[0];
                           if (!in.requires_grad) return;
                           auto& g = in.grad_buffer();
                           for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                             const Scalar gr = n.grad(r, 0);
                             g.row(r) -= gr * probs.row(r);
                             g(r, targets[static_cast<std::size_t>(r)]) += gr;
                           }
                         });
}

/// Sums an N x 1 column within each segment, giving batch x 1.
template <typename Scalar>
Var<Scalar> segment_sum(const Var<Scalar>& x, const Segments& segments) {
  if (x.cols() != 1) throw std::invalid_argument("segment_sum: column input required");
  const int batch = segment_count(segments);
  Matrix<Scalar> out(batch, 1);
  for (int b = 0; b < batch; ++b) {
    out(b, 0) = x.value().block(segments[b], 0, segment_length(segments, b), 1).sum();
  }
  return make_op<Scalar>(std::move(out), {x}, [segments, batch](Node<Scalar>& n) {
    auto& in = *n.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int b = 0; b < batch; ++b) {
      g.block(segments[b], 0, segment_length(segments, b), 1).array() += n.grad(b, 0);
    }
  });
}

/// Σ weights[i] * x[i] over an N x 1 column, as a 1 x 1 value.
template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& x, std::vector<Scalar> weights) {
  if (x.cols() != 1 || static_cast<Eigen::Index>(weights.size()) != x.rows()) {
    throw std::invalid_argument("weighted_sum: one weight per row required");
  }
  Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> w(weights.data(), x.rows());
  Matrix<Scalar> out(1, 1);
  out(0, 0) = x.value().col(0).dot(w);
  return make_op<Scalar>(std::move(out), {x}, [weights = std::move(weights)](Node<Scalar>& n) {
    auto& in = *n.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < weights.size(); ++i) g(static_cast<Eigen::Index>(i), 0) += n.grad(0, 0) * weights[i];
  });
}

/// Segment offsets of the windows produced by unfold_windows.
inline Segments window_segments(const Segments& segments, int width) {
  Segments out(segments.size(), 0);
  for (int b = 0; b < segment_count(segments); ++b) {
    out[b + 1] = out[b] + std::max(segment_length(segments, b) - width + 1, 1);
  }
  return out;
}

/// Concatenates each run of `width` consecutive rows within a segment into a
/// single row (im2col for 1-D convolution). Segments shorter than width yield
/// one window, zero-padded at the end.
template <typename Scalar>
Var<Scalar> unfold_windows(const Var<Scalar>& x, const Segments& segments, int width) {
  const Eigen::Index d = x.cols();
  const Segments ws = window_segments(segments, width);
  Matrix<Scalar> out = Matrix<Scalar>::Zero(ws.back(), width * d);
  for (int b = 0; b < segment_count(segments); ++b) {
    const int len = segment_length(segments, b);
    for (int w = 0; w < segment_length(ws, b); ++w) {
      for (int j = 0; j < width && w + j < len; ++j) {
        out.block(ws[b] + w, j * d, 1, d) = x.value().row(segments[b] + w + j);
      }
    }
  }
  return make_op<Scalar>(std::move(out), {x}, [segments, ws, width, d](Node<Scalar>& n) {
    auto& in = *n.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int b = 0; b < segment_count(segments); ++b) {
      const int len = segment_length(segments, b);
      for (int w = 0; w < segment_length(ws, b); ++w) {
        for (int j = 0; j < width && w + j < len; ++j) {
          g.row(segments[b] + w + j) += n.grad.block(ws[b] + w, j * d, 1, d);
        }
      }
    }
  });
}

/// Column-wise maximum within each segment (max-over-time pooling).
template <typename Scalar>
Var<Scalar> segment_max(const Var<Scalar>& x, const Segments& segments) {
  const int batch = segment_count(segments);
  const Eigen::Index c = x.cols();
  Matrix<Scalar> out(batch, c);
  std::vector<int> argmax(static_cast<std::size_t>(batch * c));
  for (int b = 0; b < batch; ++b) {
    if (segment_length(segments, b) == 0) throw std::invalid_argument("segment_max: empty segment");
    for (Eigen::Index j = 0; j < c; ++j) {
      Eigen::Index best = 0, unused = 0;
      out(b, j) = x.value().block(segments[b], j, segment_length(segments, b), 1).maxCoeff(&best, &unused);
      argmax[static_cast<std::size_t>(b * c + j)] = segments[b] + static_cast<int>(best);
    }
  }
  return make_op<Scalar>(std::move(out), {x}, [argmax = std::move(argmax), batch, c](Node<Scalar>& n) {
    auto& in = *n.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int b = 0; b < batch; ++b)
      for (Eigen::Index j = 0; j < c; ++j) g(argmax[static_cast<std::size_t>(b * c + j)], j) += n.grad(b, j);
  });
}

}  // namespace stylebt::nn
