#pragma once

/**
 * @file cli.hpp
 * @brief Command-line front end: validate, run and report subcommands.
 */

#include <iosfwd>

namespace dmpc {

/// Parses arguments and dispatches. Returns the process exit code:
/// 0 success, 1 usage or configuration error, 2 step cap, 3 safety abort,
/// 4 certificate failure. Validation failures also return 1.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Reads DMPC_LOG_LEVEL (trace, debug, info, warn, error, off) and installs
/// a stderr logger. Unknown values fall back to info.
void configure_logging();

}  // namespace dmpc
