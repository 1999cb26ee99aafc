// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stylebt/corpus.hpp"

namespace stylebt {

/// Token <-> id map with four reserved ids in front.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  Vocabulary();

  /// Reserved tokens followed by the given ones (duplicates rejected).
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  /// Counts tokens across the corpus and keeps the most frequent, ties broken
  /// lexicographically, so the result does not depend on input order.
  class Builder {
   public:
    void add(const Tokens& tokens);
    void add(const Utterance& u) { add(u.tokens); }
    /// max_size counts the reserved ids; 0 means unbounded.
    Vocabulary build(std::size_t max_size = 0) const;

   private:
    std::unordered_map<std::string, std::size_t> counts_;
  };

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  /// Content tokens only, without the reserved ones.
  std::vector<std::string> content_tokens() const;

  std::vector<int> encode(const Tokens& tokens) const;
  /// Stops at EOS and drops the other reserved ids.
  Tokens decode(std::span<const int> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace stylebt
