#pragma once

// The sethit command line as a library call, so tests can drive it without a
// subprocess.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sethit::cli {

enum ExitCode : int { kOk = 0, kViolated = 1, kUsage = 2 };

/// args excludes the program name. The report goes to `out`, diagnostics to
/// `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace sethit::cli
