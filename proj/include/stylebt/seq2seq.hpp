// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stylebt/corpus.hpp"
#include "stylebt/nn/adam.hpp"
#include "stylebt/nn/transformer.hpp"
#include "stylebt/rewards.hpp"
#include "stylebt/vocab.hpp"

namespace stylebt {

enum class BackboneKind { ReferenceTiny, External };

std::string backbone_name(BackboneKind kind);
BackboneKind parse_backbone(const std::string& name);

inline constexpr const char* kSeq2SeqCheckpointKind = "seq2seq/reference-tiny";

/// One teacher-forced sequence in a training loss, contributing
/// weight * -log p(target | source). Ids are raw: the caller appends EOS to
/// targets that should end on it. Sources get EOS appended by the model.
struct SequenceTerm {
  std::vector<int> source;
  std::vector<int> target;
  double weight = 1.0;
};

/// Incremental decoding over a fixed batch of sources.
class DecodeSession {
 public:
  virtual ~DecodeSession() = default;
  virtual int batch_size() const = 0;
  /// One input token per sequence (BOS first); returns next-token
  /// probabilities, one row per sequence.
  virtual nn::Matrix<float> step(std::span<const int> tokens) = 0;
};

struct Seq2SeqOptions {
  nn::AdamOptions adam;
};

/// Encoder-decoder backbone. Training is single-writer; const members are
/// safe to call concurrently.
class Seq2SeqModel {
 public:
  virtual ~Seq2SeqModel() = default;

  virtual BackboneKind kind() const = 0;
  virtual const Vocabulary& vocab() const = 0;
  /// Longest target (content tokens plus EOS) the model can score or emit.
  virtual int max_target_length() const = 0;
  /// Longest source in content tokens; longer sources are truncated.
  virtual int max_source_length() const = 0;

  virtual std::unique_ptr<DecodeSession> start_decoding(std::span<const std::vector<int>> sources) const = 0;

  /// Σ log p(target | source) per term, weights ignored.
  virtual std::vector<double> sequence_logprobs(std::span<const SequenceTerm> terms) const = 0;

  /// One optimizer update on Σ weight * -log p. Returns the loss value and,
  /// when requested, each term's log p from the same forward pass.
  /// Throws (and leaves parameters untouched) when the loss is not finite.
  virtual double train_step(std::span<const SequenceTerm> terms, std::vector<double>* term_logprobs = nullptr) = 0;
  /// Pre-clipping gradient norm of the last train_step.
  virtual double last_grad_norm() const = 0;
  /// Carried over by clone().
  virtual void set_learning_rate(double lr) = 0;
  /// Drops optimizer moments.
  virtual void reset_optimizer() = 0;

  virtual std::unique_ptr<Seq2SeqModel> clone() const = 0;
  virtual bool parameters_equal(const Seq2SeqModel& other) const = 0;
  virtual void save(const std::filesystem::path& path) const = 0;

  /// Content ids of x, truncated to max_source_length with a warning.
  std::vector<int> encode_source(const Utterance& x) const;
  /// Content ids of y plus EOS, truncated to max_target_length with a warning.
  std::vector<int> encode_target(const Utterance& y) const;
};

/// From-scratch transformer encoder-decoder with tied embeddings.
class ReferenceTinyModel final : public Seq2SeqModel {
 public:
  ReferenceTinyModel(Vocabulary vocab, const nn::TransformerConfig& config, std::uint64_t seed,
                     const Seq2SeqOptions& options = {});

  BackboneKind kind() const override { return BackboneKind::ReferenceTiny; }
  const Vocabulary& vocab() const override { return vocab_; }
  int max_target_length() const override { return net_.config().max_positions; }
  int max_source_length() const override { return net_.config().max_positions - 1; }

  std::unique_ptr<DecodeSession> start_decoding(std::span<const std::vector<int>> sources) const override;
  std::vector<double> sequence_logprobs(std::span<const SequenceTerm> terms) const override;
  double train_step(std::span<const SequenceTerm> terms, std::vector<double>* term_logprobs = nullptr) override;
  double last_grad_norm() const override { return grad_norm_; }
  void set_learning_rate(double lr) override {
    options_.adam.learning_rate = lr;
    adam_.set_learning_rate(lr);
  }
  void reset_optimizer() override { adam_.reset(); }

  std::unique_ptr<Seq2SeqModel> clone() const override;
  bool parameters_equal(const Seq2SeqModel& other) const override;
  void save(const std::filesystem::path& path) const override;

  nn::Transformer<float>& network() { return net_; }
  const nn::Transformer<float>& network() const { return net_; }
  const Seq2SeqOptions& options() const { return options_; }

 private:
  nn::PackedBatch pack(std::span<const SequenceTerm> terms) const;

  Vocabulary vocab_;
  nn::Transformer<float> net_;
  Seq2SeqOptions options_;
  nn::Adam<float> adam_;
  double grad_norm_ = 0.0;
};

struct ModelSpec {
  BackboneKind kind = BackboneKind::ReferenceTiny;
  int model_dim = 128;
  int heads = 4;
  int ff_dim = 256;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int max_positions = 72;
  Seq2SeqOptions options;
};

/// Builds an untrained backbone. The external kind has no bundled adapter
/// and is rejected with a ConfigError.
std::unique_ptr<Seq2SeqModel> create_model(const ModelSpec& spec, Vocabulary vocab, std::uint64_t seed);

void save_checkpoint(const Seq2SeqModel& model, const std::filesystem::path& path);
/// Throws NotFoundError, or FormatError for a foreign, corrupt or
/// wrong-version file.
std::unique_ptr<Seq2SeqModel> load_checkpoint(const std::filesystem::path& path, const Seq2SeqOptions& options = {});

/// Mean over pairs of -Σ log p(y_i | y_<i, x), EOS included.
double nll_loss(const Seq2SeqModel& model, std::span<const SentencePair> pairs);
double nll_loss(const Seq2SeqModel& model, const SentencePair& pair);

/// One update on the mean pair NLL; returns the loss.
double train_step(Seq2SeqModel& model, std::span<const SentencePair> pairs);

/// Generated ids stop before EOS; at most max_len content tokens.
struct Generation {
  std::vector<int> ids;
  std::vector<double> logprobs;
  std::optional<double> eos_logprob;
};

enum class DecodeMode { Greedy, Sample };

/// Batched decoding of raw content-id sources. Sampling draws from rng in
/// batch order, so results are reproducible per rng state.
std::vector<Generation> decode_ids(const Seq2SeqModel& model, std::span<const std::vector<int>> sources, int max_len,
                                   DecodeMode mode, std::mt19937_64* rng = nullptr);

Utterance greedy_decode(const Seq2SeqModel& model, const Utterance& x, int max_len);
std::vector<Utterance> greedy_decode_batch(const Seq2SeqModel& model, std::span<const Utterance> xs, int max_len);

DecodeOutcome sample_decode(const Seq2SeqModel& model, const Utterance& x, int max_len, std::uint64_t seed);
std::vector<DecodeOutcome> sample_decode_batch(const Seq2SeqModel& model, std::span<const std::vector<int>> sources,
                                               int max_len, std::mt19937_64& rng);

}  // namespace stylebt
