// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stylebt/classifier.hpp"
#include "stylebt/corpus.hpp"
#include "stylebt/metrics.hpp"
#include "stylebt/rewards.hpp"
#include "stylebt/seq2seq.hpp"

namespace stylebt {

/// One logs.tsv row. Unset fields are written as empty cells.
struct LogRow {
  long step = 0;
  std::string direction;
  std::optional<double> nll, r_sc, r_bleu, r_learned;
  std::optional<double> valid_acc, valid_bleu, valid_hm;
};

struct TrainingLog {
  std::vector<LogRow> rows;
};

void write_logs_tsv(std::ostream& out, const TrainingLog& log);
void write_logs_tsv(const std::filesystem::path& path, const TrainingLog& log);

struct SupervisedConfig {
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 1;
  /// Decode cap for reward samples.
  int max_len = 64;
};

/// NLL-only training on pairs, starting from a copy of `base`. Zero epochs
/// returns an unchanged copy.
std::unique_ptr<Seq2SeqModel> further_pretrain(const Seq2SeqModel& base, const Dataset<SentencePair>& pairs,
                                               const SupervisedConfig& config, TrainingLog* log = nullptr);

/// model_a maps styles.first to styles.second; model_b the reverse.
struct ModelPair {
  std::unique_ptr<Seq2SeqModel> a;
  std::unique_ptr<Seq2SeqModel> b;
  StylePair styles;

  /// Two independent copies of one checkpoint.
  static ModelPair from_base(const Seq2SeqModel& base, const StylePair& styles);
  ModelPair clone() const;
};

/// Per-direction means over one step.
struct DirectionStepMetrics {
  double nll = 0.0;
  double r_sc = 0.0;
  double r_bleu = 0.0;
  double r_learned = 0.0;
  std::size_t skipped = 0;
};

struct IbtStepMetrics {
  DirectionStepMetrics a;  // updates applied to model a
  DirectionStepMetrics b;
};

struct IbtStepContext {
  const StyleClassifier& classifier;
  const RewardConfig& rewards;
  const LearnedMetricOracle* oracle = nullptr;  // required when the learned reward is on
  int max_len = 64;
};

/// One round of back-translation in both directions, a-side first.
IbtStepMetrics ibt_step(ModelPair& models, std::span<const Utterance> batch_first,
                        std::span<const Utterance> batch_second, const IbtStepContext& context, std::mt19937_64& rng);

struct IbtConfig {
  long steps = 1000;
  int batch_size = 32;
  long valid_every = 100;
  /// Validations without improvement before stopping; 0 disables.
  int patience = 0;
  int max_len = 64;
  RewardConfig rewards;
  std::uint64_t seed = 1;
  void validate() const;
};

/// Validation data for one direction. Without references BLEU is taken
/// against the sources themselves.
struct DirectionValidation {
  std::vector<Utterance> sources;
  std::vector<std::vector<Utterance>> references;
};

struct IbtValidation {
  DirectionValidation first_to_second;
  DirectionValidation second_to_first;
};

DirectionValidation direction_validation(const Dataset<ReferenceSet>& refs);
DirectionValidation direction_validation(const Dataset<LabeledUtterance>& sources);

struct ValidationScore {
  double acc = 0.0;
  double bleu = 0.0;
  double hm = 0.0;
};

ValidationScore validate_direction(const Seq2SeqModel& model, const DirectionValidation& data,
                                   const StyleClassifier& clf, const StyleId& target, int max_len);

struct IbtResult {
  ModelPair models;
  TrainingLog log;
  ValidationScore best_a, best_b;
  long best_step_a = 0, best_step_b = 0;
  long steps_run = 0;
};

/// Each direction keeps its own best-HM checkpoint; the starting models
/// count as step 0.
IbtResult ibt_train(const ModelPair& models, const Dataset<LabeledUtterance>& unpaired_first,
                    const Dataset<LabeledUtterance>& unpaired_second, const IbtValidation& valid,
                    const StyleClassifier& clf, const IbtConfig& config, const LearnedMetricOracle* oracle = nullptr);

struct PairSelectionConfig {
  double sigma_c = 0.15;
  double sigma_s = 0.9;
  /// Sources drawn for generation; 0 uses all.
  std::size_t sample_count = 0;
  std::uint64_t seed = 1;
  int max_len = 64;
};

/// Greedy transfers scored with content = oracle(x, y'), p_source =
/// p(source style | x), p_target = p(target style | y').
Dataset<SentencePair> generate_pseudo_pairs(const Seq2SeqModel& model, const Dataset<LabeledUtterance>& sources,
                                            const StyleId& target_style, const StyleClassifier& clf,
                                            const LearnedMetricOracle& oracle, const PairSelectionConfig& config);

/// Keeps pairs with content > sigma_c and mean style score > sigma_s.
Dataset<SentencePair> select_high_quality_pairs(const Dataset<SentencePair>& pairs, const PairSelectionConfig& config);

struct OfflineContext {
  const StyleClassifier* classifier = nullptr;  // required when the style reward is on
  RewardConfig rewards = RewardConfig::none();
  const LearnedMetricOracle* oracle = nullptr;
};

/// Supervised training from `base` with NLL plus the enabled reward terms
/// on the model's own samples. With every reward off it matches
/// further_pretrain.
std::unique_ptr<Seq2SeqModel> offline_train(const Seq2SeqModel& base, const Dataset<SentencePair>& pairs,
                                            const OfflineContext& context, const SupervisedConfig& config,
                                            TrainingLog* log = nullptr);

}  // namespace stylebt
