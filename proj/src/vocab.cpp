// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/vocab.hpp"

#include <algorithm>

namespace stylebt {

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<s>", "</s>", "<unk>"}) {
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.emplace_back(t);
  }
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (!v.index_.emplace(t, v.size()).second) throw FormatError("duplicate vocabulary token '" + t + "'");
    v.tokens_.push_back(t);
  }
  return v;
}

void Vocabulary::Builder::add(const Tokens& tokens) {
  for (const auto& t : tokens) ++counts_[t];
}

Vocabulary Vocabulary::Builder::build(std::size_t max_size) const {
  std::vector<std::pair<std::string, std::size_t>> ranked(counts_.begin(), counts_.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [token, _] : ranked) {
    if (max_size > 0 && static_cast<std::size_t>(v.size()) >= max_size) break;
    if (v.index_.contains(token)) continue;
    v.index_.emplace(token, v.size());
    v.tokens_.push_back(token);
  }
  return v;
}

int Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::string> Vocabulary::content_tokens() const {
  return {tokens_.begin() + kReserved, tokens_.end()};
}

std::vector<int> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Tokens Vocabulary::decode(std::span<const int> ids) const {
  Tokens out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id < kReserved && id != kUnk) continue;
    out.push_back(token(id));
  }
  return out;
}

}  // namespace stylebt
