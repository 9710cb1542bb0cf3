#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dncnn {

/// Process exit codes of the command-line driver.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitDiverged = 3,
};

/// Runs one subcommand (`build-data`, `train`, `denoise`, `degrade`, `eval`,
/// `ablate`, `inspect-model`). `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dncnn
