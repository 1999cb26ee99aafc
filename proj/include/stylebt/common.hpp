// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace stylebt {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that cannot be used as an utterance (empty after tokenization).
class EmptyUtteranceError : public Error {
 public:
  using Error::Error;
};

/// A malformed record in a text file, with its 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::filesystem::path& file, std::size_t line, const std::string& what)
      : Error(file.string() + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::filesystem::path& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or file whose kind or version does not match what was asked for.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// A style label. Each task instance binds exactly two distinct styles.
struct StyleId {
  std::string name;

  StyleId() = default;
  explicit StyleId(std::string n) : name(std::move(n)) {}

  auto operator<=>(const StyleId&) const = default;
};

/// The two styles of a task, in (s1, s2) order.
struct StylePair {
  StyleId first;
  StyleId second;

  StylePair() = default;
  StylePair(StyleId a, StyleId b) : first(std::move(a)), second(std::move(b)) {
    if (first == second) throw Error("a task needs two distinct styles, got '" + first.name + "' twice");
  }

  bool contains(const StyleId& s) const { return s == first || s == second; }

  const StyleId& opposite(const StyleId& s) const {
    if (s == first) return second;
    if (s == second) return first;
    throw Error("style '" + s.name + "' is not part of the task");
  }

  /// 0 for first, 1 for second.
  int index_of(const StyleId& s) const {
    if (s == first) return 0;
    if (s == second) return 1;
    throw Error("style '" + s.name + "' is not part of the task");
  }
};

}  // namespace stylebt
