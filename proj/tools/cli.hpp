// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rlready::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Runs one command line (without the program name). Errors are reported on
// err as a single line "rlready: error[<kind>]: <message>".
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace rlready::cli
