// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stylebt/classifier.hpp"
#include "stylebt/corpus.hpp"

namespace stylebt {

/// Sufficient statistics for corpus BLEU. Clipping is per sentence against
/// the maximum count over its references; the reference length is the one
/// closest to the candidate, shorter on ties.
struct BleuStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;

  BleuStats& operator+=(const BleuStats& other);
  /// Unsmoothed: 0 as soon as any order has no match.
  double score() const;
};

BleuStats bleu_stats(const Tokens& candidate, std::span<const Utterance> references);

/// Corpus BLEU of candidates[i] against references[i].
double bleu(std::span<const Utterance> candidates, std::span<const ReferenceSet> references);
double bleu(std::span<const Utterance> candidates, const Dataset<ReferenceSet>& references);

/// Corpus BLEU restricted to one sentence.
double sentence_bleu(const Utterance& candidate, std::span<const Utterance> references);
double sentence_bleu(const Utterance& candidate, const Utterance& reference);

/// 2ab/(a+b), and 0 when a+b is 0.
double harmonic_mean(double acc, double bleu);

/// Fraction of outputs classified as `target`. Empty outputs count as misses.
double style_accuracy(const StyleClassifier& clf, std::span<const Utterance> outputs, const StyleId& target);

/// Sample Pearson correlation. Throws on length mismatch, fewer than two
/// points, or a constant input.
double pearson(std::span<const double> x, std::span<const double> y);

/// Learned content metric scoring a candidate against an anchor.
class LearnedMetricOracle {
 public:
  virtual ~LearnedMetricOracle() = default;
  virtual double score(const Utterance& candidate, const Utterance& anchor) const = 0;
  /// Default implementation calls score() per pair.
  virtual std::vector<double> score_batch(std::span<const Utterance> candidates,
                                          std::span<const Utterance> anchors) const;
  /// Written into reports so scores are attributable to an adapter.
  virtual std::string identity() const = 0;
};

/// 2 * F1 - 1 of the token multisets.
double desk_oracle_score(const Utterance& candidate, const Utterance& anchor);

class DeskOracle final : public LearnedMetricOracle {
 public:
  double score(const Utterance& candidate, const Utterance& anchor) const override;
  std::string identity() const override { return "desk"; }
};

/// Runs `command <tsv>` where each TSV row is candidate<TAB>anchor and
/// expects one real per row on stdout. Calls are serialized.
class ExternalOracle final : public LearnedMetricOracle {
 public:
  explicit ExternalOracle(std::string command);
  double score(const Utterance& candidate, const Utterance& anchor) const override;
  std::vector<double> score_batch(std::span<const Utterance> candidates,
                                  std::span<const Utterance> anchors) const override;
  std::string identity() const override { return "external:" + command_; }

 private:
  std::string command_;
};

/// "desk" or "external:<command>".
std::unique_ptr<LearnedMetricOracle> make_oracle(const std::string& spec);

struct EvalOptions {
  bool bleu_lowercase = false;
  bool oracle_lowercase = false;
};

struct EvalRow {
  std::string name;
  std::size_t count = 0;
  double acc = 0.0;
  double bleu = 0.0;
  double hm = 0.0;
  std::vector<std::pair<std::string, double>> learned;  // oracle identity, mean score
};

struct EvalReport {
  std::vector<EvalRow> directions;
  EvalRow overall;
  std::map<std::string, std::string> config;
};

struct DirectionOutputs {
  std::string name;
  StyleId target;
  std::vector<Utterance> outputs;
  Dataset<ReferenceSet> references;
};

/// Learned metrics are the mean over items of the mean over references.
/// The overall row pools all items of all directions.
EvalReport evaluate_system(std::span<const DirectionOutputs> directions, const StyleClassifier& clf,
                           std::span<const LearnedMetricOracle* const> oracles, const EvalOptions& options = {});

EvalRow evaluate_direction(const DirectionOutputs& direction, const StyleClassifier& clf,
                           std::span<const LearnedMetricOracle* const> oracles, const EvalOptions& options = {});

/// Columns: direction, count, one per oracle, BLEU, ACC, HM. Values are
/// written at full precision; the table rounds to four decimals.
void write_report_tsv(std::ostream& out, const EvalReport& report);
void write_report_table(std::ostream& out, const EvalReport& report);

/// One row per system, one column per metric.
struct ScoreTable {
  std::vector<std::string> systems;
  std::vector<std::string> metrics;
  std::vector<std::vector<double>> values;  // values[system][metric]

  std::vector<double> column(std::size_t metric) const;
};

/// Header row "system<TAB>metric...", then one row per system.
ScoreTable load_score_table(const std::filesystem::path& path);

/// Pearson matrix over the table's metric columns.
std::vector<std::vector<double>> correlation_matrix(const ScoreTable& table);

}  // namespace stylebt
