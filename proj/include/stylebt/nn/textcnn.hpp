// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylebt/nn/ops.hpp"
#include "stylebt/nn/params.hpp"

namespace stylebt::nn {

struct TextCnnConfig {
  int vocab_size = 0;
  int embedding_dim = 128;
  std::vector<int> filter_widths{3, 4, 5};
  int filters_per_width = 100;
  int classes = 2;
};

/// Convolutional sentence classifier: embeddings, one 1-D convolution per
/// filter width with ReLU and max-over-time pooling, then a linear layer
/// over the pooled features.
template <typename Scalar>
class TextCnn {
 public:
  using Mat = Matrix<Scalar>;
  using V = Var<Scalar>;

  TextCnn(const TextCnnConfig& config, std::uint64_t seed) : config_(config) {
    if (config.vocab_size <= 0 || config.embedding_dim <= 0 || config.filter_widths.empty() ||
        config.filters_per_width <= 0 || config.classes < 2) {
      throw std::invalid_argument("invalid TextCNN configuration");
    }
    std::mt19937_64 rng(seed);
    const int e = config.embedding_dim, f = config.filters_per_width;
    embedding_ = params_.add("embedding", random_normal<Scalar>(config.vocab_size, e, 1.0 / std::sqrt(e), rng));
    for (int w : config.filter_widths) {
      if (w <= 0) throw std::invalid_argument("filter widths must be positive");
      const std::string p = "conv" + std::to_string(w);
      Conv c;
      c.width = w;
      c.weight = params_.add(p + ".weight", projection_init<Scalar>(w * e, f, rng));
      c.bias = params_.add(p + ".bias", Mat::Zero(1, f));
      c.projection = params_.add(p + ".projection", projection_init<Scalar>(f, config.classes, rng));
      convs_.push_back(c);
    }
    output_bias_ = params_.add("output_bias", Mat::Zero(1, config.classes));
  }

  TextCnn(const TextCnn&) = delete;
  TextCnn& operator=(const TextCnn&) = delete;
  TextCnn(TextCnn&&) noexcept = default;
  TextCnn& operator=(TextCnn&&) noexcept = default;

  const TextCnnConfig& config() const { return config_; }
  ParameterList<Scalar>& parameters() { return params_; }
  const ParameterList<Scalar>& parameters() const { return params_; }

  /// Class logits, one row per sentence. Sentences shorter than a filter are
  /// zero-padded to a single window.
  V logits(std::span<const std::vector<int>> sentences) const {
    std::vector<int> ids, lengths;
    for (const auto& s : sentences) {
      if (s.empty()) throw std::invalid_argument("TextCnn: empty sentence");
      ids.insert(ids.end(), s.begin(), s.end());
      lengths.push_back(static_cast<int>(s.size()));
    }
    const Segments segments = segments_from_lengths(lengths);
    V emb = gather_rows(embedding_, std::move(ids));
    // The projection is split per filter width, so the pooled features never
    // need to be concatenated: logits = Σ_w pooled_w * P_w.
    V out;
    for (const auto& c : convs_) {
      V windows = unfold_windows(emb, segments, c.width);
      V pooled = segment_max(relu(linear(windows, c.weight, c.bias)), window_segments(segments, c.width));
      V part = matmul(pooled, c.projection);
      out = out.defined() ? add(out, part) : part;
    }
    return add_bias(out, output_bias_);
  }

  TextCnn clone() const {
    TextCnn copy(config_, 0);
    copy.params_.assign_values(params_);
    return copy;
  }

 private:
  struct Conv {
    int width = 0;
    V weight, bias, projection;
  };

  TextCnnConfig config_;
  ParameterList<Scalar> params_;
  V embedding_;
  std::vector<Conv> convs_;
  V output_bias_;
};

}  // namespace stylebt::nn
