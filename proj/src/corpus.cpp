// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

namespace stylebt {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

bool is_alnum(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z');
}

bool is_alpha(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z');
}

// Bytes of multi-byte UTF-8 sequences count as word characters.
bool is_word_char(char c) { return is_alnum(c) || static_cast<unsigned char>(c) >= 0x80; }

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
  return out;
}

bool is_clitic(const std::string& suffix) {
  static const std::set<std::string> clitics{"s", "re", "ve", "ll", "d", "m"};
  return clitics.contains(suffix);
}

void tokenize_chunk(std::string_view chunk, Tokens& out) {
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  const std::size_t n = chunk.size();
  std::size_t i = 0;
  while (i < n) {
    const char c = chunk[i];
    if (is_word_char(c)) {
      word += c;
      ++i;
      continue;
    }
    if ((c == '-' || c == '.') && !word.empty() && i > 0 && is_alnum(chunk[i - 1]) && i + 1 < n &&
        is_alnum(chunk[i + 1])) {
      word += c;
      ++i;
      continue;
    }
    if (c == '\'') {
      std::size_t j = i + 1;
      while (j < n && is_alpha(chunk[j])) ++j;
      const bool at_word_end = j == n || !is_word_char(chunk[j]);
      const std::string suffix = lower(chunk.substr(i + 1, j - i - 1));
      if (at_word_end && suffix == "t" && !word.empty() && ascii_lower(word.back()) == 'n') {
        const char n_char = word.back();
        word.pop_back();
        flush();
        out.push_back(std::string(1, n_char) + std::string(chunk.substr(i, j - i)));
        i = j;
        continue;
      }
      if (at_word_end && is_clitic(suffix)) {
        flush();
        out.emplace_back(chunk.substr(i, j - i));
        i = j;
        continue;
      }
    }
    flush();
    std::size_t j = i;
    while (j < n && chunk[j] == c) ++j;
    out.emplace_back(chunk.substr(i, j - i));
    i = j;
  }
  flush();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Reads every line with its trailing CR removed, validating UTF-8.
std::vector<std::string> read_lines(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!is_valid_utf8(line)) throw ParseError(path, lines.size() + 1, "invalid UTF-8");
    lines.push_back(std::move(line));
  }
  return lines;
}

bool is_blank(std::string_view s) { return std::all_of(s.begin(), s.end(), is_space); }

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cols;
}

Utterance tokenize_at(std::string_view text, const TokenizerOptions& options, const std::filesystem::path& path,
                      std::size_t line) {
  try {
    return tokenize(text, options);
  } catch (const EmptyUtteranceError&) {
    throw ParseError(path, line, "empty sentence");
  }
}

}  // namespace

std::string Utterance::text() const { return detokenize(tokens); }

std::string split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "valid" || name == "dev") return Split::Valid;
  if (name == "test") return Split::Test;
  throw Error("unknown split '" + std::string(name) + "'");
}

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= text.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::array<std::uint32_t, 4> min_cp{0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

Utterance tokenize(std::string_view text, const TokenizerOptions& options) {
  Utterance u;
  u.raw = std::string(text);
  const std::string source = options.lowercase ? lower(text) : std::string(text);
  std::size_t i = 0;
  while (i < source.size()) {
    while (i < source.size() && is_space(source[i])) ++i;
    std::size_t j = i;
    while (j < source.size() && !is_space(source[j])) ++j;
    if (j > i) tokenize_chunk(std::string_view(source).substr(i, j - i), u.tokens);
    i = j;
  }
  if (u.tokens.empty()) throw EmptyUtteranceError("empty utterance");
  if (options.max_tokens > 0 && u.tokens.size() > options.max_tokens) {
    spdlog::warn("truncating utterance of {} tokens to {}", u.tokens.size(), options.max_tokens);
    u.tokens.resize(options.max_tokens);
  }
  return u;
}

std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

Dataset<LabeledUtterance> load_unpaired(const std::filesystem::path& path, const StyleId& style, Split split,
                                        const TokenizerOptions& options) {
  Dataset<LabeledUtterance> data{split, {}};
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    data.items.push_back({tokenize_at(lines[i], options, path, i + 1), style});
  }
  return data;
}

Dataset<SentencePair> load_pairs(const std::filesystem::path& path, const StyleId& source_style,
                                 const StyleId& target_style, Split split, const TokenizerOptions& options) {
  if (source_style == target_style) throw Error("pair styles must differ");
  Dataset<SentencePair> data{split, {}};
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto cols = split_tabs(lines[i]);
    if (cols.size() != 2) {
      throw ParseError(path, i + 1, "expected 2 tab-separated columns, found " + std::to_string(cols.size()));
    }
    SentencePair p;
    p.source = tokenize_at(cols[0], options, path, i + 1);
    p.target = tokenize_at(cols[1], options, path, i + 1);
    p.source_style = source_style;
    p.target_style = target_style;
    data.items.push_back(std::move(p));
  }
  return data;
}

Dataset<ReferenceSet> load_references(const std::filesystem::path& source_path,
                                      const std::vector<std::filesystem::path>& reference_paths, Split split,
                                      const TokenizerOptions& options) {
  if (reference_paths.empty()) throw Error("at least one reference file is required");
  const auto sources = read_lines(source_path);
  std::vector<std::vector<std::string>> refs;
  for (const auto& p : reference_paths) {
    refs.push_back(read_lines(p));
    if (refs.back().size() != sources.size()) {
      const std::size_t line = std::min(refs.back().size(), sources.size()) + 1;
      throw ParseError(p, line,
                       "has " + std::to_string(refs.back().size()) + " lines but " + source_path.string() +
                           " has " + std::to_string(sources.size()));
    }
  }
  Dataset<ReferenceSet> data{split, {}};
  for (std::size_t i = 0; i < sources.size(); ++i) {
    ReferenceSet set;
    set.source = tokenize_at(sources[i], options, source_path, i + 1);
    for (std::size_t r = 0; r < refs.size(); ++r) {
      set.references.push_back(tokenize_at(refs[r][i], options, reference_paths[r], i + 1));
    }
    data.items.push_back(std::move(set));
  }
  return data;
}

Dataset<SentencePair> load_scored_pairs(const std::filesystem::path& path, const StyleId& source_style,
                                        const StyleId& target_style, Split split) {
  const auto lines = read_lines(path);
  if (lines.empty()) return Dataset<SentencePair>{split, {}};
  const auto header = split_tabs(lines[0]);
  if (header.size() < 2 || header[0] != "source" || header[1] != "target") {
    throw ParseError(path, 1, "scored pair header must start with source<TAB>target");
  }
  Dataset<SentencePair> data{split, {}};
  TokenizerOptions keep_all;
  keep_all.max_tokens = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto cols = split_tabs(lines[i]);
    if (cols.size() != header.size()) {
      throw ParseError(path, i + 1, "expected " + std::to_string(header.size()) + " columns");
    }
    SentencePair p;
    p.source = tokenize_at(cols[0], keep_all, path, i + 1);
    p.target = tokenize_at(cols[1], keep_all, path, i + 1);
    p.source_style = source_style;
    p.target_style = target_style;
    for (std::size_t c = 2; c < cols.size(); ++c) {
      try {
        std::size_t used = 0;
        const std::string field(cols[c]);
        const double v = std::stod(field, &used);
        if (used != field.size() || !std::isfinite(v)) throw std::invalid_argument("bad");
        p.scores[std::string(header[c])] = v;
      } catch (const std::exception&) {
        throw ParseError(path, i + 1, "score column '" + std::string(header[c]) + "' is not a finite number");
      }
    }
    data.items.push_back(std::move(p));
  }
  return data;
}

void write_unpaired(const std::filesystem::path& path, const Dataset<LabeledUtterance>& data) {
  auto out = open_output(path);
  for (const auto& item : data) out << item.utterance.text() << '\n';
}

void write_pairs(const std::filesystem::path& path, const Dataset<SentencePair>& data) {
  auto out = open_output(path);
  for (const auto& p : data) out << p.source.text() << '\t' << p.target.text() << '\n';
}

void write_references(const std::filesystem::path& source_path,
                      const std::vector<std::filesystem::path>& reference_paths, const Dataset<ReferenceSet>& data) {
  auto src = open_output(source_path);
  std::vector<std::ofstream> refs;
  for (const auto& p : reference_paths) refs.push_back(open_output(p));
  for (const auto& set : data) {
    if (set.references.size() != refs.size()) throw Error("reference count does not match reference files");
    src << set.source.text() << '\n';
    for (std::size_t r = 0; r < refs.size(); ++r) refs[r] << set.references[r].text() << '\n';
  }
}

void write_scored_pairs(const std::filesystem::path& path, const Dataset<SentencePair>& data) {
  std::set<std::string> names;
  for (const auto& p : data) {
    for (const auto& [k, _] : p.scores) names.insert(k);
  }
  auto out = open_output(path);
  out << "source\ttarget";
  for (const auto& n : names) out << '\t' << n;
  out << '\n';
  out.precision(17);
  for (const auto& p : data) {
    out << p.source.text() << '\t' << p.target.text();
    for (const auto& n : names) {
      const auto it = p.scores.find(n);
      if (it == p.scores.end()) throw Error("pair is missing score '" + n + "'");
      out << '\t' << it->second;
    }
    out << '\n';
  }
}

std::filesystem::path unpaired_path(const std::filesystem::path& dir, Split split, const StyleId& style) {
  return dir / (split_name(split) + "." + style.name);
}

std::vector<Utterance> utterances(const Dataset<LabeledUtterance>& data) {
  std::vector<Utterance> out;
  out.reserve(data.size());
  for (const auto& item : data) out.push_back(item.utterance);
  return out;
}

}  // namespace stylebt
