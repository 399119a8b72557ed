#pragma once

#include <ostream>

#include "cropshift/error.hpp"

namespace cropshift::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitTrainingData = 3;
inline constexpr int kExitConfig = 4;

/// Maps a library error to the process exit code.
int exit_code_for(ErrorCode code);

/// Runs one command line. Reports go to files; `out` gets short summaries
/// and `err` gets warnings and error messages.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cropshift::cli
