// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lccrl/cli.hpp"

int main(int argc, char** argv) { return lccrl::cli::run(argc, argv); }
