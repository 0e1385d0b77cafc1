#pragma once

// Line-oriented distribution files:
//
//   # comment
//   alphabet 0 1 2
//   steps 2
//   entry 0 0 1/6
//
// Weights written as integers or p/q are exact; any decimal weight makes the
// whole table binary floating point.

#include "sethit/dist.hpp"

#include <string>
#include <string_view>

namespace sethit {

StepDistribution parse_distribution(std::string_view text);
StepDistribution load_distribution(const std::string& path);

/// Canonical form: entries with positive weight in mixed-radix order.
std::string serialize_distribution(const StepDistribution& P);

std::string read_text_file(const std::string& path);

}  // namespace sethit
