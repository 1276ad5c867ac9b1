#ifndef GLUCOLENS_CLI_HPP
#define GLUCOLENS_CLI_HPP

#include <iostream>
#include <string>
#include <vector>

namespace glucolens::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kValidation = 4,
};

/// Runs one subcommand. `args` excludes the program name. Errors are reported
/// as a single line on `err`: "glucolens: error[<kind>]: <message>".
int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

} // namespace glucolens::cli

#endif // GLUCOLENS_CLI_HPP
