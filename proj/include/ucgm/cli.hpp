#pragma once

namespace ucgm {

/// Entry point of the `ucgm` tool. Returns 0 on success, 1 for configuration or usage
/// errors and 2 for failures while running.
int run_cli(int argc, const char* const* argv);

}  // namespace ucgm
