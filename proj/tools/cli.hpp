#pragma once

// Batch driver: subcommands for each module, seeded runs, CSV/JSONL tables
// and a JSON manifest per run.

#include <string>
#include <vector>

namespace affinelab::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidation = 1;
inline constexpr int kNumeric = 2;

// argv[0] is the program name.
int run(int argc, const char* const* argv);

// Arguments without the program name.
int run(const std::vector<std::string>& args);

}  // namespace affinelab::cli
