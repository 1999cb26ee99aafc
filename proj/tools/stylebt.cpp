// Copyright 2026 The stylebt Authors
// SPDX-License-Identifier: Apache-2.0

#include "stylebt/cli.hpp"

int main(int argc, char** argv) { return stylebt::cli::run(argc, argv); }
