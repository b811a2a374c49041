#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace forge {

/// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitUsage = 2,
    kExitConfig = 3,
    kExitParse = 4,
    kExitValidation = 5,
    kExitTraining = 6,
};

/// Entry point behind the `forge` executable. `args` excludes the program
/// name. Failures print one line `error[<category>]: <message>` to `err`.
/// Progress verbosity follows FORGE_LOG (quiet, info, debug; default info).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace forge
