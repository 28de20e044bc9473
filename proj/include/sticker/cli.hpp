#pragma once

// Single entrypoint with subcommands: synth, describe, tagset, train, eval,
// predict. Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <ostream>

namespace sticker::cli {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Results go to `out`; the effective configuration and progress go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sticker::cli
