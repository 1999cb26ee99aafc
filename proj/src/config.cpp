// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stylebt {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': '" + text + "' is not a valid number");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

Config Config::parse(const std::string& text, const std::filesystem::path& source) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ParseError(source, lineno, "empty key");
    if (cfg.values_.contains(key)) throw ParseError(source, lineno, "key '" + key + "' is set twice");
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("config file not found: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path);
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::resolve(const std::string& key, const std::string& fallback) {
  const auto it = values_.find(key);
  const std::string v = it == values_.end() ? fallback : it->second;
  resolved_[key] = v;
  return v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) { return resolve(key, fallback); }

std::string Config::require_string(const std::string& key) {
  if (!values_.contains(key)) throw ConfigError("missing required setting '" + key + "'");
  return resolve(key, "");
}

long Config::get_int(const std::string& key, long fallback) {
  return parse_number<long>(key, resolve(key, std::to_string(fallback)));
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) {
  return parse_number<std::uint64_t>(key, resolve(key, std::to_string(fallback)));
}

double Config::get_double(const std::string& key, double fallback) {
  const double v = parse_number<double>(key, resolve(key, format_double(fallback)));
  if (!std::isfinite(v)) throw ConfigError("config key '" + key + "' must be finite");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) {
  const std::string v = resolve(key, fallback ? "true" : "false");
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::string Config::echo() const {
  std::string out;
  for (const auto& [k, v] : resolved_) out += k + " = " + v + "\n";
  return out;
}

void Config::write_echo(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << echo();
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : values_) {
    if (!resolved_.contains(k)) out.push_back(k);
  }
  return out;
}

}  // namespace stylebt
