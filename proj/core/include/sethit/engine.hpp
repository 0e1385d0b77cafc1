#pragma once

// Exact evaluation of E[prod_j f_j(X^(j))] where the n coordinates are drawn
// i.i.d. from an l-step distribution P and f_j reads step j.

#include "sethit/dist.hpp"
#include "sethit/function.hpp"

#include <span>

namespace sethit {

enum class Engine { automatic, enumerate, dp };

Engine parse_engine(std::string_view name);
std::string_view engine_name(Engine e);

struct EngineOptions {
  Engine engine = Engine::automatic;
  std::uint64_t budget = kDefaultBudget;
  unsigned threads = 1;
};

/// Every function is anchored_symmetric or mod_linear and the anchors span at
/// most two coordinates.
bool histogram_compatible(std::span<const FunctionSpec> fns);

/// Sums over supp(P)^n in fixed blocks; result independent of `threads`.
Number enumerate_expectation(const StepDistribution& P, std::span<const FunctionSpec> fns,
                             std::uint64_t budget = kDefaultBudget, unsigned threads = 1);

/// Dynamic program over joint symbol counts (and residues for mod_linear),
/// with the anchor coordinates enumerated explicitly.
Number histogram_expectation(const StepDistribution& P, std::span<const FunctionSpec> fns,
                             std::uint64_t budget = kDefaultBudget);

Number product_expectation(const StepDistribution& P, std::span<const FunctionSpec> fns, const EngineOptions& opt = {});

}  // namespace sethit
