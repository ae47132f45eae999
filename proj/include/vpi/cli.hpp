#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vpi {

/// Entry point of the `vpi` tool. Subcommands: run, oracle, bound, optimize,
/// trace. Every invocation prints one JSON document
/// {command, config, results, stderr_notes}. Exit codes: 0 success,
/// 1 estimator error (reported under results.error), 2 usage error or
/// unknown model/guide name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_main(int argc, const char* const* argv);

}  // namespace vpi
