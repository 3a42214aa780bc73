// SPDX-FileCopyrightText: © 2026 The dun authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dun/cli.hpp"

int main(int argc, char** argv) { return dun::cli::run(argc, argv); }
