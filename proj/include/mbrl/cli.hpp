#pragma once

#include <string>
#include <vector>

namespace mbrl {

// Entry point behind the `mbrl` binary; split out so tests can drive the
// command surface in-process.
int run_cli(const std::vector<std::string>& args);

std::string build_identifier();

}  // namespace mbrl
