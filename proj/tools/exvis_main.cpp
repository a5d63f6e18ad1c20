// SPDX-License-Identifier: Apache-2.0
#include "exvis/cli.hpp"

int main(int argc, char** argv) { return exvis::run_cli(argc, argv); }
