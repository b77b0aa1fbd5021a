#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcnet {

/// Entry point of the `mcnet` command. `args` excludes the program name.
/// Returns the process exit status; failures print one line
/// "error: <kind>: <message>" to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcnet
