#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace isda::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3 };

/// Runs `isda <subcommand> [flags]`; `args` excludes the program name.
/// CSV files go to the --out directory; a one-line summary goes to `out`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

/// "1,2,5..8" -> {1,2,5,6,7,8}.
std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

/// Lines of `key = value`; blank lines and lines starting with '#' or ';'
/// are skipped. Returned as `--key=value` arguments.
std::vector<std::string> read_config_args(const std::string& path);

}  // namespace isda::cli
