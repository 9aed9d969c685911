#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace c2f::cli {

/// Process exit codes, one per error class.
enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kIo = 3,
    kFormat = 4,
    kDimension = 5,
    kInvalidArgument = 6,
    kNumeric = 7,
    kGradCheckFailed = 8,
};

/// Runs the command line with args[0] as the program name. JSON goes to
/// `out` when an output path is "-"; notices and error lines go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace c2f::cli
