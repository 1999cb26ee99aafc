// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned binary container for model checkpoints:
//
//   "STYLEBT\0" | u32 version | kind | config map | string lists | tensors | u64 FNV-1a of all prior bytes
//
// Strings are u32 length + bytes; integers are little-endian. Tensor data is
// stored in the model's own scalar type, so a save/load round trip is
// bit-exact.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stylebt/common.hpp"
#include "stylebt/nn/params.hpp"

namespace stylebt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::string name;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint8_t scalar_bytes = 4;  // 4 = float, 8 = double
  std::vector<char> data;
};

struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> config;
  std::map<std::string, std::vector<std::string>> lists;
  std::vector<Tensor> tensors;

  const std::string& config_value(const std::string& key) const;
  const std::vector<std::string>& list(const std::string& key) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws NotFoundError, FormatError on a bad magic, version or checksum,
/// and FormatError when the stored kind does not match expected_kind (an
/// empty expected_kind accepts any).
Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_kind = {});

/// Only the stored kind, for dispatching on file type.
std::string peek_checkpoint_kind(const std::filesystem::path& path);

template <typename Scalar>
std::vector<Tensor> to_tensors(const nn::ParameterList<Scalar>& params) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params[i].value();
    Tensor t;
    t.name = params.name(i);
    t.rows = static_cast<std::uint32_t>(v.rows());
    t.cols = static_cast<std::uint32_t>(v.cols());
    t.scalar_bytes = sizeof(Scalar);
    t.data.resize(static_cast<std::size_t>(v.size()) * sizeof(Scalar));
    std::memcpy(t.data.data(), v.data(), t.data.size());
    out.push_back(std::move(t));
  }
  return out;
}

template <typename Scalar>
void from_tensors(const std::vector<Tensor>& tensors, nn::ParameterList<Scalar>& params) {
  if (tensors.size() != params.size()) throw FormatError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = tensors[i];
    auto& v = params[i].mutable_value();
    if (t.name != params.name(i) || t.rows != v.rows() || t.cols != v.cols() || t.scalar_bytes != sizeof(Scalar) ||
        t.data.size() != static_cast<std::size_t>(v.size()) * sizeof(Scalar)) {
      throw FormatError("checkpoint tensor '" + t.name + "' does not match parameter '" + params.name(i) + "'");
    }
    std::memcpy(v.data(), t.data.data(), t.data.size());
  }
}

}  // namespace stylebt
