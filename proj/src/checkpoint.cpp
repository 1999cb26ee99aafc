// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace stylebt {
namespace {

constexpr char kMagic[8] = {'S', 'T', 'Y', 'L', 'E', 'B', 'T', '\0'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename T>
  void integer(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void string(const std::string& s) {
    integer<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::size_t end, std::string source)
      : buf_(buf), end_(end), source_(std::move(source)) {}

  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T integer() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  std::string string() {
    const auto n = integer<std::uint32_t>();
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw FormatError(source_ + ": truncated or corrupt checkpoint");
  }
  const std::vector<char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string source_;
};

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("checkpoint not found: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Validates magic, version and checksum; returns a reader positioned at kind.
Reader open_reader(const std::vector<char>& buf, const std::filesystem::path& path) {
  const std::string src = path.string();
  if (buf.size() < sizeof(kMagic) + 4 + 8 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(src + ": not a stylebt checkpoint");
  }
  const std::size_t body = buf.size() - 8;
  Reader tail(buf, buf.size(), src);
  std::uint64_t stored = 0;
  for (std::size_t i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[body + i])) << (8 * i);
  if (stored != fnv1a(buf.data(), body)) throw FormatError(src + ": checksum mismatch (corrupt checkpoint)");
  Reader r(buf, body, src);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  const auto version = r.integer<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(src + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  return r;
}

}  // namespace

const std::string& Checkpoint::config_value(const std::string& key) const {
  const auto it = config.find(key);
  if (it == config.end()) throw FormatError("checkpoint is missing config key '" + key + "'");
  return it->second;
}

const std::vector<std::string>& Checkpoint::list(const std::string& key) const {
  const auto it = lists.find(key);
  if (it == lists.end()) throw FormatError("checkpoint is missing list '" + key + "'");
  return it->second;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.integer<std::uint32_t>(kCheckpointVersion);
  w.string(ckpt.kind);
  w.integer<std::uint32_t>(static_cast<std::uint32_t>(ckpt.config.size()));
  for (const auto& [k, v] : ckpt.config) {
    w.string(k);
    w.string(v);
  }
  w.integer<std::uint32_t>(static_cast<std::uint32_t>(ckpt.lists.size()));
  for (const auto& [k, items] : ckpt.lists) {
    w.string(k);
    w.integer<std::uint32_t>(static_cast<std::uint32_t>(items.size()));
    for (const auto& s : items) w.string(s);
  }
  w.integer<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.string(t.name);
    w.integer<std::uint32_t>(t.rows);
    w.integer<std::uint32_t>(t.cols);
    w.integer<std::uint8_t>(t.scalar_bytes);
    w.integer<std::uint64_t>(t.data.size());
    w.bytes(t.data.data(), t.data.size());
  }
  auto& buf = w.buffer();
  const std::uint64_t sum = fnv1a(buf.data(), buf.size());
  w.integer<std::uint64_t>(sum);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  const auto buf = slurp(path);
  Reader r = open_reader(buf, path);
  Checkpoint ckpt;
  ckpt.kind = r.string();
  if (!expected_kind.empty() && ckpt.kind != expected_kind) {
    throw FormatError(path.string() + ": checkpoint holds a '" + ckpt.kind + "', expected a '" + expected_kind + "'");
  }
  const auto n_config = r.integer<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_config; ++i) {
    auto k = r.string();
    ckpt.config[k] = r.string();
  }
  const auto n_lists = r.integer<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_lists; ++i) {
    auto k = r.string();
    const auto n = r.integer<std::uint32_t>();
    auto& items = ckpt.lists[k];
    for (std::uint32_t j = 0; j < n; ++j) items.push_back(r.string());
  }
  const auto n_tensors = r.integer<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Tensor t;
    t.name = r.string();
    t.rows = r.integer<std::uint32_t>();
    t.cols = r.integer<std::uint32_t>();
    t.scalar_bytes = r.integer<std::uint8_t>();
    const auto n = r.integer<std::uint64_t>();
    t.data.resize(n);
    r.bytes(t.data.data(), n);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

std::string peek_checkpoint_kind(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  Reader r = open_reader(buf, path);
  return r.string();
}

}  // namespace stylebt
