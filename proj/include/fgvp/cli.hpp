// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fgvp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitRecordErrors = 2;  // --strict and at least one record failed
inline constexpr int kExitUsage = 64;

/// Runs the command line (without argv[0]).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fgvp::cli
