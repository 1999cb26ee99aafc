// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace stylebt {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_all_lower(std::string_view s) {
  return std::none_of(s.begin(), s.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_score(const std::string& field, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used == field.size() && std::isfinite(v) && v >= 0.0 && v <= 1.0) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(path, line, "score '" + field + "' is not a number in [0, 1]");
}

std::vector<std::string> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rows.push_back(line);
  }
  return rows;
}

}  // namespace

void PolarityLexicon::add(std::string_view word, PolarityScores scores) {
  if (!(scores.positive >= 0.0 && scores.positive <= 1.0 && scores.negative >= 0.0 && scores.negative <= 1.0)) {
    throw Error("polarity scores must lie in [0, 1]");
  }
  const std::string key = lower(word);
  auto [it, inserted] = entries_.try_emplace(key, scores);
  if (!inserted && std::abs(scores.positive - scores.negative) > std::abs(it->second.positive - it->second.negative)) {
    it->second = scores;
  }
}

PolarityScores PolarityLexicon::lookup(std::string_view word) const {
  const auto it = entries_.find(lower(word));
  return it == entries_.end() ? PolarityScores{} : it->second;
}

PolarityLexicon PolarityLexicon::load(const std::filesystem::path& path) {
  PolarityLexicon lex;
  const auto rows = read_rows(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (trim(rows[i]).empty() || rows[i][0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0, tab;
    while ((tab = rows[i].find('\t', start)) != std::string::npos) {
      cols.push_back(rows[i].substr(start, tab - start));
      start = tab + 1;
    }
    cols.push_back(rows[i].substr(start));
    if (cols.size() != 3) throw ParseError(path, i + 1, "expected word<TAB>pos<TAB>neg");
    lex.add(trim(cols[0]), {parse_score(trim(cols[1]), path, i + 1), parse_score(trim(cols[2]), path, i + 1)});
  }
  return lex;
}

void AntonymMap::add(std::string_view word, std::vector<std::string> antonyms) {
  const std::string key = lower(word);
  std::erase_if(antonyms, [&](const std::string& a) { return a.empty() || lower(a) == key; });
  auto& list = entries_[key];
  for (auto& a : antonyms) {
    if (std::find(list.begin(), list.end(), a) == list.end()) list.push_back(std::move(a));
  }
}

const std::vector<std::string>& AntonymMap::lookup(std::string_view word) const {
  static const std::vector<std::string> none;
  const auto it = entries_.find(lower(word));
  return it == entries_.end() ? none : it->second;
}

AntonymMap AntonymMap::load(const std::filesystem::path& path) {
  AntonymMap map;
  const auto rows = read_rows(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (trim(rows[i]).empty() || rows[i][0] == '#') continue;
    const auto tab = rows[i].find('\t');
    if (tab == std::string::npos || rows[i].find('\t', tab + 1) != std::string::npos) {
      throw ParseError(path, i + 1, "expected word<TAB>antonym1,antonym2,...");
    }
    std::vector<std::string> antonyms;
    const std::string list = rows[i].substr(tab + 1);
    std::size_t start = 0, comma;
    while ((comma = list.find(',', start)) != std::string::npos) {
      antonyms.push_back(trim(list.substr(start, comma - start)));
      start = comma + 1;
    }
    antonyms.push_back(trim(list.substr(start)));
    map.add(trim(rows[i].substr(0, tab)), std::move(antonyms));
  }
  return map;
}

double word_polarity(const PolarityLexicon& lexicon, std::string_view word) {
  const auto s = lexicon.lookup(word);
  return s.positive - s.negative;
}

std::vector<std::size_t> find_polarity_words(const PolarityLexicon& lexicon, const Utterance& utterance,
                                             double cutoff) {
  if (!(cutoff > 0.0)) throw Error("polarity cutoff must be positive");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < utterance.tokens.size(); ++i) {
    if (std::abs(word_polarity(lexicon, utterance.tokens[i])) >= cutoff) out.push_back(i);
  }
  return out;
}

std::optional<SentencePair> synthesize_pair(const PolarityLexicon& lexicon, const AntonymMap& antonyms,
                                            const Utterance& utterance, double cutoff) {
  const auto polar = find_polarity_words(lexicon, utterance, cutoff);
  if (polar.size() != 1) return std::nullopt;
  const std::string& word = utterance.tokens[polar.front()];
  if (!is_all_lower(word)) return std::nullopt;
  const auto& candidates = antonyms.lookup(word);
  if (candidates.empty()) return std::nullopt;
  SentencePair pair;
  pair.source = utterance;
  pair.target.tokens = utterance.tokens;
  pair.target.tokens[polar.front()] = candidates.front();
  pair.target.raw = pair.target.text();
  return pair;
}

Dataset<SentencePair> build_synthetic_corpus(const PolarityLexicon& lexicon, const AntonymMap& antonyms,
                                             const Dataset<LabeledUtterance>& data, const StylePair& styles,
                                             double cutoff) {
  Dataset<SentencePair> out{data.split, {}};
  for (const auto& item : data) {
    auto pair = synthesize_pair(lexicon, antonyms, item.utterance, cutoff);
    if (!pair) continue;
    pair->source_style = item.style;
    pair->target_style = styles.opposite(item.style);
    out.items.push_back(std::move(*pair));
  }
  return out;
}

}  // namespace stylebt
