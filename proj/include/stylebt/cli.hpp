// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

namespace stylebt::cli {

/// Runs one subcommand. args[0] is the program name. Returns 0 on success,
/// 1 with a one-line diagnostic on stderr when the stage fails, and 2 with
/// usage text for an unknown subcommand or flag.
int run(std::span<const std::string> args);
int run(int argc, const char* const* argv);

}  // namespace stylebt::cli
