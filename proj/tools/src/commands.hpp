#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace mrf::cli {

/// Subcommand names in the order they appear in --help.
const std::vector<std::string> &command_names();

/// Runs one subcommand ("seq gen", "dict build", ...). Outputs go to `out`,
/// which is created if needed; config.used.json is written first.
void run_command(const std::string &name, const RunConfig &cfg, const std::filesystem::path &out,
                 std::ostream &log);

/// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3, kIoError = 4 };

/// Parses argv, runs the requested subcommand and maps errors to exit codes.
int cli_main(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace mrf::cli
