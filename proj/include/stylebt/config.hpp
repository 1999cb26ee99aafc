// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stylebt/common.hpp"

namespace stylebt {

/// Flat `key = value` settings. Every read is recorded together with the
/// value it resolved to (defaults included), so echo() reproduces the run.
class Config {
 public:
  /// Lines are `key = value`; blank lines and lines starting with '#' are
  /// skipped. Throws ParseError on malformed lines or repeated keys.
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text, const std::filesystem::path& source = "<string>");

  /// Overrides (or adds) a key; later calls win.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.contains(key); }

  std::string get_string(const std::string& key, const std::string& fallback);
  /// Throws ConfigError when the key is missing.
  std::string require_string(const std::string& key);
  long get_int(const std::string& key, long fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);

  /// Resolved keys, sorted, one `key = value` per line.
  std::string echo() const;
  void write_echo(const std::filesystem::path& path) const;

  /// Keys that were set but never read.
  std::vector<std::string> unused_keys() const;

 private:
  std::string resolve(const std::string& key, const std::string& fallback);

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> resolved_;
};

}  // namespace stylebt
