#ifndef HTP_TOOLS_CLI_HPP_
#define HTP_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace htp::cli {

enum ExitCode { kOk = 0, kUsage = 1, kNumerical = 2 };

/// Runs one command line (without the program name). Standard streams are
/// passed in so the commands can be driven from tests.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace htp::cli

#endif  // HTP_TOOLS_CLI_HPP_
