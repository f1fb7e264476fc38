// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "lmr_cli/commands.hpp"

int main(int argc, char** argv) {
    return lmr::cli::run(argc, argv, std::cout, std::cerr);
}
