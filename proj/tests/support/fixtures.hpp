#pragma once

#include "sethit/dist.hpp"
#include "sethit/function.hpp"
#include "sethit/hitting.hpp"

#include <random>

namespace sethit::testing {

/// x uniform on {0,1,2}, Y = x or x+1 mod 3 with probability 1/2 each.
StepDistribution basic_distribution();
/// P(x, x) = pi(x).
StepDistribution identity_coupling(const std::vector<Rational>& pi);
StepDistribution independent_product(const std::vector<Rational>& pi, std::size_t steps = 2);

/// Rational probability vector with entries in {1..9}/total.
std::vector<Rational> random_probs(std::size_t m, std::mt19937_64& rng);

/// Normalized sum of random weighted cycles (including self-loops); marginals
/// are equal exactly. With `full_diagonal` every symbol also gets a self-loop.
StepDistribution random_equal_marginal(std::size_t m, std::mt19937_64& rng, bool full_diagonal = true);

/// Rational l-step table with random zeros (at least one positive entry).
StepDistribution random_distribution(std::size_t m, std::size_t steps, std::mt19937_64& rng, double zero_rate = 0.3);

/// Float table with values in [0,1].
FunctionSpec random_table(const Alphabet& alphabet, std::size_t n, std::mt19937_64& rng);
/// Exact table with values in {0, 1/4, ..., 1}.
FunctionSpec random_rational_table(const Alphabet& alphabet, std::size_t n, std::mt19937_64& rng);

/// Random anchored_symmetric or mod_linear function (histogram-compatible).
FunctionSpec random_histogram_function(const Alphabet& alphabet, std::size_t n, std::mt19937_64& rng,
                                       std::size_t max_anchor_coordinate = 1);

/// Chain X1 -> X2 -> ... with initial law pi and kernel rows (exact).
StepDistribution markov_chain(const std::vector<Rational>& pi, const std::vector<std::vector<Rational>>& kernel,
                              std::size_t steps);

/// Brute force over all of (Omega^l)^n with the full weight table.
Rational brute_force(const StepDistribution& P, const std::vector<FunctionSpec>& fns);

}  // namespace sethit::testing
