// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sentiment-lexicon tagging and antonym-swap synthesis of polarity pairs.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stylebt/corpus.hpp"

namespace stylebt {

struct PolarityScores {
  double positive = 0.0;
  double negative = 0.0;
};

/// word -> (positive, negative) scores in [0, 1]. Keys are lowercase and
/// lookups are case-insensitive; unknown words are neutral (0, 0).
class PolarityLexicon {
 public:
  PolarityLexicon() = default;

  /// Repeated words keep the entry with the largest |pos - neg|, which is
  /// how per-sense scores collapse onto one surface form.
  void add(std::string_view word, PolarityScores scores);
  PolarityScores lookup(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

  /// TSV rows: word<TAB>pos_score<TAB>neg_score.
  static PolarityLexicon load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, PolarityScores> entries_;
};

/// word -> ordered antonyms. Keys are lowercase; self-antonyms are dropped.
class AntonymMap {
 public:
  void add(std::string_view word, std::vector<std::string> antonyms);
  const std::vector<std::string>& lookup(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

  /// TSV rows: word<TAB>antonym1,antonym2,...
  static AntonymMap load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

inline constexpr double kDefaultPolarityCutoff = 0.5;

/// positive - negative; 0 for unknown words.
double word_polarity(const PolarityLexicon& lexicon, std::string_view word);

/// Ascending indices of tokens with |word_polarity| >= cutoff.
std::vector<std::size_t> find_polarity_words(const PolarityLexicon& lexicon, const Utterance& utterance,
                                             double cutoff = kDefaultPolarityCutoff);

/// A pair when exactly one token is polar, it is all-lowercase and it has at
/// least one antonym; the target swaps in the first antonym. Styles are left
/// empty for the caller to assign.
std::optional<SentencePair> synthesize_pair(const PolarityLexicon& lexicon, const AntonymMap& antonyms,
                                            const Utterance& utterance, double cutoff = kDefaultPolarityCutoff);

/// synthesize_pair over every item; each pair runs from the item's style to
/// the other style of the task, in input order.
Dataset<SentencePair> build_synthetic_corpus(const PolarityLexicon& lexicon, const AntonymMap& antonyms,
                                             const Dataset<LabeledUtterance>& data, const StylePair& styles,
                                             double cutoff = kDefaultPolarityCutoff);

}  // namespace stylebt
