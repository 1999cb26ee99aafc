// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic two-style task. A sentence is one style marker followed by
// neutral content words; transferring it swaps the marker for its
// counterpart, so the reference output of every sentence is known.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "stylebt/corpus.hpp"

namespace stylebt {

struct ToyTaskConfig {
  std::size_t train_per_style = 2000;
  std::size_t valid_per_style = 200;
  std::size_t test_per_style = 200;
  std::size_t paraphrase_pairs = 2000;
  std::size_t min_content = 4;
  std::size_t max_content = 7;
  /// Probability that a paraphrase target carries a random marker instead of
  /// the source's own.
  double paraphrase_marker_noise = 0.5;
  std::uint64_t seed = 7;
};

struct ToyTask {
  StylePair styles{StyleId("informal"), StyleId("formal")};
  /// (first-style marker, second-style marker).
  std::vector<std::pair<std::string, std::string>> markers;
  std::vector<std::string> content_words;

  Dataset<LabeledUtterance> train_first, train_second;
  Dataset<LabeledUtterance> valid_first, valid_second;
  /// Single-reference transfer sets, one per direction.
  Dataset<ReferenceSet> valid_first_to_second, valid_second_to_first;
  Dataset<ReferenceSet> test_first_to_second, test_second_to_first;
  /// Style-agnostic near-copy pairs used for further pre-training.
  Dataset<SentencePair> paraphrases;

  /// Every training sentence of both styles, labeled.
  Dataset<LabeledUtterance> train_labeled() const;
  Dataset<LabeledUtterance> valid_labeled() const;
};

ToyTask make_toy_task(const ToyTaskConfig& config);

/// The counterpart-marker rewrite of a toy sentence.
Utterance toy_transfer(const ToyTask& task, const Utterance& sentence);

/// Writes the task as corpus files:
///   {split}.{style}, {s1}-{s2}/{split}.src|.ref0, and paraphrases.tsv.
void write_toy_task(const std::filesystem::path& dir, const ToyTask& task);

/// Directory holding the reference files of one direction.
std::filesystem::path direction_dir(const std::filesystem::path& dir, const StyleId& from, const StyleId& to);

}  // namespace stylebt
