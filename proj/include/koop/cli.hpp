#pragma once

namespace koop {

// Entry point for the `koop` command-line tool.  Returns the process exit
// code: 0 success, 2 usage/config error, 3 numerical failure.
int run_cli(int argc, char** argv);

}  // namespace koop
