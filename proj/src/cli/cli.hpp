#pragma once

namespace dvi::cli {

// Full command-line entry point. Returns 0 on success, 1 on numeric
// failure (e.g. NotConverged without --allow-partial), 2 on usage errors.
int run_cli(int argc, const char* const* argv);

}  // namespace dvi::cli
