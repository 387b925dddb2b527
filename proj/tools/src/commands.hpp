#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sego::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
};

// Full command-line entry point; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Keeps large freed blocks in the heap instead of returning them to the OS.
// Training allocates batch-sized similarity matrices every step; without this
// glibc maps and faults them in afresh each time. No-op off glibc.
void tune_allocator();

// Prints one pass/fail line per check. Returns kOk iff every check passes,
// kFailure otherwise. `fault` is "none" or "relu_backward".
int run_selftest(std::ostream& out, const std::string& fault = "none");

}  // namespace sego::cli
