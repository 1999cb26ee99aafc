// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pre-norm transformer encoder-decoder with tied input/output embeddings.
// Training runs teacher-forced through the autograd graph; decoding runs an
// incremental, cache-based path over plain Eigen values.

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

struct TransformerConfig {
  int vocab_size = 0;
  int model_dim = 128;
  int heads = 4;
  int ff_dim = 256;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int max_positions = 72;
};

/// Teacher-forcing batch. decoder_inputs are the targets shifted right by one
/// with BOS in front; targets are what each position must predict.
struct PackedBatch {
  std::vector<int> source_ids;
  std::vector<int> source_positions;
  Segments source_segments{0};
  std::vector<int> decoder_inputs;
  std::vector<int> decoder_positions;
  std::vector<int> targets;
  Segments target_segments{0};

  int size() const { return segment_count(source_segments); }
};

inline PackedBatch pack_batch(std::span<const std::vector<int>> sources,
                              std::span<const std::vector<int>> targets, int bos) {
  if (sources.size() != targets.size()) throw std::invalid_argument("pack_batch: size mismatch");
  PackedBatch b;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].empty() || targets[i].empty()) {
      throw std::invalid_argument("pack_batch: empty source or target");
    }
    for (std::size_t t = 0; t < sources[i].size(); ++t) {
      b.source_ids.push_back(sources[i][t]);
      b.source_positions.push_back(static_cast<int>(t));
    }
    b.source_segments.push_back(static_cast<int>(b.source_ids.size()));
    for (std::size_t t = 0; t < targets[i].size(); ++t) {
      b.decoder_inputs.push_back(t == 0 ? bos : targets[i][t - 1]);
      b.decoder_positions.push_back(static_cast<int>(t));
      b.targets.push_back(targets[i][t]);
    }
    b.target_segments.push_back(static_cast<int>(b.targets.size()));
  }
  return b;
}

template <typename Scalar>
class Transformer {
 public:
  using Mat = Matrix<Scalar>;
  using V = Var<Scalar>;

  Transformer(const TransformerConfig& config, std::uint64_t seed) : config_(config) {
    if (config.vocab_size <= 0 || config.model_dim <= 0 || config.heads <= 0 ||
        config.model_dim % config.heads != 0 || config.ff_dim <= 0 || config.max_positions <= 0 ||
        config.encoder_layers < 0 || config.decoder_layers < 0) {
      throw std::invalid_argument("invalid transformer configuration");
    }
    std::mt19937_64 rng(seed);
    const int d = config.model_dim;
    const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
    token_embedding_ = params_.add("token_embedding", random_normal<Scalar>(config.vocab_size, d, emb_std, rng));
    position_embedding_ =
        params_.add("position_embedding", random_normal<Scalar>(config.max_positions, d, emb_std, rng));
    for (int l = 0; l < config.encoder_layers; ++l) {
      const std::string p = "encoder." + std::to_string(l) + ".";
      EncoderLayer layer;
      layer.norm1 = make_norm(p + "norm1");
      layer.self = make_attention(p + "self", rng);
      layer.norm2 = make_norm(p + "norm2");
      layer.ff = make_ff(p + "ff", rng);
      encoder_.push_back(layer);
    }
    encoder_norm_ = make_norm("encoder.norm");
    for (int l = 0; l < config.decoder_layers; ++l) {
      const std::string p = "decoder." + std::to_string(l) + ".";
      DecoderLayer layer;
      layer.norm1 = make_norm(p + "norm1");
      layer.self = make_attention(p + "self", rng);
      layer.norm2 = make_norm(p + "norm2");
      layer.cross = make_attention(p + "cross", rng);
      layer.norm3 = make_norm(p + "norm3");
      layer.ff = make_ff(p + "ff", rng);
      decoder_.push_back(layer);
    }
    decoder_norm_ = make_norm("decoder.norm");
    output_bias_ = params_.add("output_bias", Mat::Zero(1, config.vocab_size));
  }

  Transformer(const Transformer&) = delete;
  Transformer& operator=(const Transformer&) = delete;
  Transformer(Transformer&&) noexcept = default;
  Transformer& operator=(Transformer&&) noexcept = default;

  const TransformerConfig& config() const { return config_; }
  ParameterList<Scalar>& parameters() { return params_; }
  const ParameterList<Scalar>& parameters() const { return params_; }

  /// Encoder output rows for packed sources.
  V encode(const std::vector<int>& ids, const std::vector<int>& positions, const Segments& segments) const {
    check_positions(positions);
    V x = add(gather_rows(token_embedding_, ids), gather_rows(position_embedding_, positions));
    for (const auto& layer : encoder_) {
      V h = ln(x, layer.norm1);
      x = add(x, self_attention(h, layer.self, segments, false));
      x = add(x, feed_forward(ln(x, layer.norm2), layer.ff));
    }
    return ln(x, encoder_norm_);
  }

  /// Teacher-forced next-token logits, one row per target token.
  V logits(const PackedBatch& batch) const {
    V memory = encode(batch.source_ids, batch.source_positions, batch.source_segments);
    check_positions(batch.decoder_positions);
    V y = add(gather_rows(token_embedding_, batch.decoder_inputs),
              gather_rows(position_embedding_, batch.decoder_positions));
    for (const auto& layer : decoder_) {
      V h = ln(y, layer.norm1);
      y = add(y, self_attention(h, layer.self, batch.target_segments, true));
      h = ln(y, layer.norm2);
      V q = linear(h, layer.cross.wq, layer.cross.bq);
      V k = linear(memory, layer.cross.wk, layer.cross.bk);
      V v = linear(memory, layer.cross.wv, layer.cross.bv);
      V a = attention(q, k, v, batch.target_segments, batch.source_segments, config_.heads, false);
      y = add(y, linear(a, layer.cross.wo, layer.cross.bo));
      y = add(y, feed_forward(ln(y, layer.norm3), layer.ff));
    }
    return add_bias(matmul_nt(ln(y, decoder_norm_), token_embedding_), output_bias_);
  }

  /// log p(target token | prefix, source) per target row (N x 1).
  V token_logprobs(const PackedBatch& batch) const { return log_softmax_pick(logits(batch), batch.targets); }

  /// Σ log p over each target sequence (batch x 1).
  V sequence_logprobs(const PackedBatch& batch) const {
    return segment_sum(token_logprobs(batch), batch.target_segments);
  }

  /// Incremental decoding state for a fixed batch of sources.
  class Decoder {
   public:
    int batch_size() const { return static_cast<int>(self_keys_.size()); }
    int steps_taken() const { return steps_; }

    /// Feeds one token per sequence (BOS on the first call) and returns the
    /// next-token distributions, one row per sequence.
    Mat step(std::span<const int> tokens) {
      const auto& m = *model_;
      const int batch = batch_size();
      if (static_cast<int>(tokens.size()) != batch) throw std::invalid_argument("Decoder::step: one token per sequence");
      if (steps_ >= m.config_.max_positions) throw std::out_of_range("Decoder::step: exceeded max positions");
      const int d = m.config_.model_dim;
      Mat x(batch, d);
      for (int b = 0; b < batch; ++b) {
        const int tok = tokens[static_cast<std::size_t>(b)];
        if (tok < 0 || tok >= m.config_.vocab_size) throw std::out_of_range("Decoder::step: token out of range");
        x.row(b) = m.token_embedding_.value().row(tok) + m.position_embedding_.value().row(steps_);
      }
      for (std::size_t l = 0; l < m.decoder_.size(); ++l) {
        const auto& layer = m.decoder_[l];
        Mat h = ln_value(x, layer.norm1);
        Mat q = linear_value(h, layer.self.wq, layer.self.bq);
        Mat k = linear_value(h, layer.self.wk, layer.self.bk);
        Mat v = linear_value(h, layer.self.wv, layer.self.bv);
        Mat attended(batch, d);
        for (int b = 0; b < batch; ++b) {
          auto& kc = self_keys_[static_cast<std::size_t>(b)][l];
          auto& vc = self_values_[static_cast<std::size_t>(b)][l];
          kc.conservativeResize(steps_ + 1, d);
          vc.conservativeResize(steps_ + 1, d);
          kc.row(steps_) = k.row(b);
          vc.row(steps_) = v.row(b);
          attended.row(b) = attend_row(q.row(b), kc, vc);
        }
        x += linear_value(attended, layer.self.wo, layer.self.bo);
        h = ln_value(x, layer.norm2);
        q = linear_value(h, layer.cross.wq, layer.cross.bq);
        for (int b = 0; b < batch; ++b) {
          const int s0 = source_segments_[static_cast<std::size_t>(b)];
          const int sn = segment_length(source_segments_, b);
          attended.row(b) = attend_row(q.row(b), cross_keys_[l].middleRows(s0, sn), cross_values_[l].middleRows(s0, sn));
        }
        x += linear_value(attended, layer.cross.wo, layer.cross.bo);
        h = ln_value(x, layer.norm3);
        Mat f = linear_value(h, layer.ff.w1, layer.ff.b1).cwiseMax(Scalar(0));
        x += linear_value(f, layer.ff.w2, layer.ff.b2);
      }
      Mat logits = ln_value(x, m.decoder_norm_) * m.token_embedding_.value().transpose();
      logits.rowwise() += m.output_bias_.value().row(0);
      detail::softmax_rows_inplace(logits);
      ++steps_;
      return logits;
    }

   private:
    friend class Transformer;

    template <typename Row, typename Block>
    RowVector<Scalar> attend_row(const Row& q, const Block& keys, const Block& values) const {
      const int heads = model_->config_.heads;
      const int dh = model_->config_.model_dim / heads;
      const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
      RowVector<Scalar> out(model_->config_.model_dim);
      for (int h = 0; h < heads; ++h) {
        RowVector<Scalar> s = (q.segment(h * dh, dh) * keys.middleCols(h * dh, dh).transpose()) * inv_sqrt;
        const Scalar mx = s.maxCoeff();
        s = (s.array() - mx).exp();
        s /= s.sum();
        out.segment(h * dh, dh) = s * values.middleCols(h * dh, dh);
      }
      return out;
    }

    const Transformer* model_ = nullptr;
    Segments source_segments_;
    std::vector<Mat> cross_keys_;
    std::vector<Mat> cross_values_;
    std::vector<std::vector<Mat>> self_keys_;
    std::vector<std::vector<Mat>> self_values_;
    int steps_ = 0;
  };

  Decoder start_decoding(std::span<const std::vector<int>> sources) const {
    NoGradGuard no_grad;
    std::vector<int> ids, positions, lengths;
    for (const auto& s : sources) {
      if (s.empty()) throw std::invalid_argument("start_decoding: empty source");
      for (std::size_t t = 0; t < s.size(); ++t) {
        ids.push_back(s[t]);
        positions.push_back(static_cast<int>(t));
      }
      lengths.push_back(static_cast<int>(s.size()));
    }
    Decoder dec;
    dec.model_ = this;
    dec.source_segments_ = segments_from_lengths(lengths);
    const Mat memory = encode(ids, positions, dec.source_segments_).value();
    for (const auto& layer : decoder_) {
      dec.cross_keys_.push_back(linear_value(memory, layer.cross.wk, layer.cross.bk));
      dec.cross_values_.push_back(linear_value(memory, layer.cross.wv, layer.cross.bv));
    }
    dec.self_keys_.assign(sources.size(), std::vector<Mat>(decoder_.size()));
    dec.self_values_.assign(sources.size(), std::vector<Mat>(decoder_.size()));
    return dec;
  }

  /// Deep copy: same configuration and parameter values, no shared nodes.
  Transformer clone() const {
    Transformer copy(config_, 0);
    copy.params_.assign_values(params_);
    return copy;
  }

 private:
  struct Norm {
    V gain, shift;
  };
  struct AttentionWeights {
    V wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct FeedForward {
    V w1, b1, w2, b2;
  };
  struct EncoderLayer {
    Norm norm1;
    AttentionWeights self;
    Norm norm2;
    FeedForward ff;
  };
  struct DecoderLayer {
    Norm norm1;
    AttentionWeights self;
    Norm norm2;
    AttentionWeights cross;
    Norm norm3;
    FeedForward ff;
  };

  Norm make_norm(const std::string& name) {
    const int d = config_.model_dim;
    return Norm{params_.add(name + ".gain", Mat::Ones(1, d)), params_.add(name + ".shift", Mat::Zero(1, d))};
  }

  AttentionWeights make_attention(const std::string& name, std::mt19937_64& rng) {
    const int d = config_.model_dim;
    AttentionWeights a;
    a.wq = params_.add(name + ".wq", projection_init<Scalar>(d, d, rng));
    a.bq = params_.add(name + ".bq", Mat::Zero(1, d));
    a.wk = params_.add(name + ".wk", projection_init<Scalar>(d, d, rng));
    a.bk = params_.add(name + ".bk", Mat::Zero(1, d));
    a.wv = params_.add(name + ".wv", projection_init<Scalar>(d, d, rng));
    a.bv = params_.add(name + ".bv", Mat::Zero(1, d));
    a.wo = params_.add(name + ".wo", projection_init<Scalar>(d, d, rng));
    a.bo = params_.add(name + ".bo", Mat::Zero(1, d));
    return a;
  }

  FeedForward make_ff(const std::string& name, std::mt19937_64& rng) {
    const int d = config_.model_dim, f = config_.ff_dim;
    FeedForward ff;
    ff.w1 = params_.add(name + ".w1", projection_init<Scalar>(d, f, rng));
    ff.b1 = params_.add(name + ".b1", Mat::Zero(1, f));
    ff.w2 = params_.add(name + ".w2", projection_init<Scalar>(f, d, rng));
    ff.b2 = params_.add(name + ".b2", Mat::Zero(1, d));
    return ff;
  }

  void check_positions(const std::vector<int>& positions) const {
    for (int p : positions) {
      if (p >= config_.max_positions) throw std::out_of_range("sequence longer than max_positions");
    }
  }

  V ln(const V& x, const Norm& n) const { return layer_norm(x, n.gain, n.shift); }

  V self_attention(const V& h, const AttentionWeights& w, const Segments& segments, bool causal) const {
    V q = linear(h, w.wq, w.bq);
    V k = linear(h, w.wk, w.bk);
    V v = linear(h, w.wv, w.bv);
    return linear(attention(q, k, v, segments, segments, config_.heads, causal), w.wo, w.bo);
  }

  V feed_forward(const V& h, const FeedForward& ff) const {
    return linear(relu(linear(h, ff.w1, ff.b1)), ff.w2, ff.b2);
  }

  static Mat ln_value(const Mat& x, const Norm& n) {
    auto stats = detail::normalize_rows(x, Scalar(1e-5));
    return (stats.normalized.array().rowwise() * n.gain.value().row(0).array()).rowwise() +
           n.shift.value().row(0).array();
  }

  static Mat linear_value(const Mat& x, const V& w, const V& b) {
    Mat out = x * w.value();
    out.rowwise() += b.value().row(0);
    return out;
  }

  TransformerConfig config_;
  ParameterList<Scalar> params_;
  V token_embedding_;
  V position_embedding_;
  std::vector<EncoderLayer> encoder_;
  Norm encoder_norm_;
  std::vector<DecoderLayer> decoder_;
  Norm decoder_norm_;
  V output_bias_;
};

}  // namespace stylebt::nn
