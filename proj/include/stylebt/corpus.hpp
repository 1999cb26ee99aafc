// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sentences, labeled sentences, sentence pairs and reference sets, plus the
// plain-text formats they are stored in:
//
//   unpaired     one sentence per line, conventionally named {split}.{style}
//   pairs        source<TAB>target per line
//   references   {split}.src plus {split}.ref0 .. {split}.refK, line-aligned
//   scored pairs header row, then source<TAB>target<TAB>score columns

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stylebt/common.hpp"

namespace stylebt {

using Tokens = std::vector<std::string>;

struct Utterance {
  Tokens tokens;
  std::string raw;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  /// Tokens joined by single spaces.
  std::string text() const;

  bool operator==(const Utterance& other) const { return tokens == other.tokens; }
};

struct LabeledUtterance {
  Utterance utterance;
  StyleId style;
};

struct SentencePair {
  Utterance source;
  Utterance target;
  StyleId source_style;
  StyleId target_style;
  std::map<std::string, double> scores;
};

struct ReferenceSet {
  Utterance source;
  std::vector<Utterance> references;
};

enum class Split { Train, Valid, Test };

std::string split_name(Split split);
Split parse_split(std::string_view name);

template <typename Item>
struct Dataset {
  Split split = Split::Train;
  std::vector<Item> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  auto begin() const { return items.begin(); }
  auto end() const { return items.end(); }
  const Item& operator[](std::size_t i) const { return items[i]; }
};

struct TokenizerOptions {
  bool lowercase = false;
  // Longer inputs are truncated with a logged warning.
  std::size_t max_tokens = 64;
};

/// Whitespace split, then punctuation split. Runs of one punctuation
/// character stay together ("..."), hyphens and periods between
/// alphanumerics stay inside the word, and English clitics become their own
/// tokens ("it's" -> it 's, "don't" -> do n't). Lowercasing is ASCII-only.
/// Throws EmptyUtteranceError when no token remains.
Utterance tokenize(std::string_view text, const TokenizerOptions& options = {});

std::string detokenize(const Tokens& tokens);

bool is_valid_utf8(std::string_view text);

Dataset<LabeledUtterance> load_unpaired(const std::filesystem::path& path, const StyleId& style,
                                        Split split = Split::Train, const TokenizerOptions& options = {});

Dataset<SentencePair> load_pairs(const std::filesystem::path& path, const StyleId& source_style,
                                 const StyleId& target_style, Split split = Split::Train,
                                 const TokenizerOptions& options = {});

Dataset<ReferenceSet> load_references(const std::filesystem::path& source_path,
                                      const std::vector<std::filesystem::path>& reference_paths,
                                      Split split = Split::Test, const TokenizerOptions& options = {});

/// Reads a scored pair file written by write_scored_pairs.
Dataset<SentencePair> load_scored_pairs(const std::filesystem::path& path, const StyleId& source_style,
                                        const StyleId& target_style, Split split = Split::Train);

void write_unpaired(const std::filesystem::path& path, const Dataset<LabeledUtterance>& data);
void write_pairs(const std::filesystem::path& path, const Dataset<SentencePair>& data);
void write_references(const std::filesystem::path& source_path,
                      const std::vector<std::filesystem::path>& reference_paths,
                      const Dataset<ReferenceSet>& data);
/// Score columns are the sorted union of score names; every pair must carry
/// all of them.
void write_scored_pairs(const std::filesystem::path& path, const Dataset<SentencePair>& data);

/// {dir}/{split}.{style}
std::filesystem::path unpaired_path(const std::filesystem::path& dir, Split split, const StyleId& style);

/// All utterances of a labeled dataset, in order.
std::vector<Utterance> utterances(const Dataset<LabeledUtterance>& data);

}  // namespace stylebt
