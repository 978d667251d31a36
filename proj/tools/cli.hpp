#ifndef EBLR_TOOLS_CLI_HPP
#define EBLR_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace eblr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Runs one command line (args[0] is the program name). Diagnostics go to
// `err` as a single line; summaries go to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eblr::cli

#endif  // EBLR_TOOLS_CLI_HPP
