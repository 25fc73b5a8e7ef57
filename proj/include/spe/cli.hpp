#pragma once

// Command-line front end: gen-data, train, eval, sweep, export-embeddings.
//
// Every command writes <out>/<command>.ini holding its fully resolved
// options; `spe <command> --config <out>/<command>.ini` repeats the run.

#include <ostream>
#include <string>
#include <vector>

namespace spe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;
inline constexpr int kExitVerify = 5;

/// args excludes the program name: {"train", "--data", "d/", ...}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spe
