#pragma once

#include <ostream>

namespace simml::cli {

enum ExitCode { ok = 0, invalid = 1, failed = 2, usage = 64 };

/// Whole command line: validate, compile, run, render, publish, serve.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace simml::cli
