#pragma once

// Subcommand driver shared by the kerrsim binary and the tests.

#include <iosfwd>
#include <string>
#include <vector>

namespace kerrsim::cli {

enum ExitCode : int {
    kSuccess = 0,
    kNotConverged = 1,
    kInputError = 2,
};

// args excludes the program name. Reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a, printed as 16 hex digits in manifests.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace kerrsim::cli
