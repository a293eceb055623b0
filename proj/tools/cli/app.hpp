#pragma once

#include <iosfwd>

namespace mcox::cli {

// Exit codes: 0 success, 1 input or usage error, 2 numerical non-convergence.
int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mcox::cli
