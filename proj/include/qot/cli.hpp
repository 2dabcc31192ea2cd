#ifndef QOT_CLI_HPP
#define QOT_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace qot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;

/// Runs one command line (without the program name), e.g.
/// {"transport", "--mu", "a.json", ...}. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "frames/out_{}.json" -> "frames/out_003.json"; without a placeholder the
/// index is inserted before the extension when count > 1.
std::string expand_pattern(const std::string& pattern, std::size_t index, std::size_t count);

}  // namespace qot::cli

#endif  // QOT_CLI_HPP
