// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stylebt/common.hpp"
#include "stylebt/corpus.hpp"
#include "stylebt/nn/textcnn.hpp"
#include "stylebt/vocab.hpp"

namespace stylebt {

inline constexpr const char* kClassifierCheckpointKind = "classifier/textcnn";

/// (p(first style), p(second style)).
using StyleProbs = std::array<double, 2>;

/// Binary convolutional style classifier. Inference never records a graph,
/// so a trained classifier is safe to share between readers.
class StyleClassifier {
 public:
  StyleClassifier(StylePair styles, Vocabulary vocab, const nn::TextCnnConfig& config, std::uint64_t seed);

  StyleClassifier(StyleClassifier&&) noexcept = default;
  StyleClassifier& operator=(StyleClassifier&&) noexcept = default;

  const StylePair& styles() const { return styles_; }
  const Vocabulary& vocab() const { return vocab_; }
  nn::TextCnn<float>& network() { return net_; }
  const nn::TextCnn<float>& network() const { return net_; }

  /// Throws EmptyUtteranceError on an empty utterance.
  StyleProbs predict(const Utterance& utterance) const;
  std::vector<StyleProbs> predict_batch(std::span<const Utterance> utterances) const;

  /// Probability of `style` for the utterance.
  double probability(const Utterance& utterance, const StyleId& style) const;
  /// Style with the larger probability; ties go to the first style.
  const StyleId& predict_label(const Utterance& utterance) const;

  StyleClassifier clone() const;
  bool parameters_equal(const StyleClassifier& other) const;

  void save(const std::filesystem::path& path) const;
  static StyleClassifier load(const std::filesystem::path& path);

 private:
  StylePair styles_;
  Vocabulary vocab_;
  nn::TextCnn<float> net_;
};

struct ClassifierTrainConfig {
  int epochs = 5;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  int filters_per_width = 100;
  int embedding_dim = 128;
  std::vector<int> filter_widths = {3, 4, 5};
  /// Vocabulary cap including reserved ids; 0 keeps every training token.
  std::size_t max_vocab = 0;
};

struct ClassifierTrainResult {
  StyleClassifier classifier;
  std::vector<double> train_loss;      // mean loss per epoch
  std::vector<double> valid_accuracy;  // per epoch; empty without validation data
  int best_epoch = 0;                  // 1-based
};

/// Trains on `train` and returns the epoch with the best validation accuracy
/// (earliest on ties). With an empty `valid` the final epoch is returned.
/// Throws when `train` lacks either style.
ClassifierTrainResult train_classifier(const Dataset<LabeledUtterance>& train, const Dataset<LabeledUtterance>& valid,
                                       const StylePair& styles, const ClassifierTrainConfig& config);

StyleProbs predict_style_probs(const StyleClassifier& clf, const Utterance& utterance);

/// Annotates p_source = p(source_style | source), p_target = p(target_style |
/// target) and style_mean = their average.
Dataset<SentencePair> score_style_pairs(const StyleClassifier& clf, const Dataset<SentencePair>& pairs);

/// Keeps pairs whose stored style_mean strictly exceeds sigma, in order.
/// Throws when a pair carries no style scores.
Dataset<SentencePair> filter_scored_paraphrase_pairs(const Dataset<SentencePair>& scored, double sigma);

/// Scores with the classifier, then keeps the pairs passing the sigma gate.
Dataset<SentencePair> filter_paraphrase_pairs(const StyleClassifier& clf, const Dataset<SentencePair>& pairs,
                                              double sigma);

/// Fraction of items whose predicted label matches the gold style.
double classifier_accuracy(const StyleClassifier& clf, const Dataset<LabeledUtterance>& test);

}  // namespace stylebt
