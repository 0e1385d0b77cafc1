#pragma once

// Two-step distributions as weighted digraphs: cycle decomposition of regular
// digraphs, (s, p)-cycles, and the convex decomposition of an equal-marginal
// P into cycles and point masses.

#include "sethit/dist.hpp"

#include <vector>

namespace sethit {

/// Edge weights w(u, v) stored at u + m*v, matching the layout of a two-step
/// distribution table (an edge u -> v is the tuple (u, v)).
struct WeightedDigraph {
  Alphabet alphabet;
  std::vector<Rational> weight;

  static WeightedDigraph from_distribution(const StepDistribution& P);
  std::size_t vertex_count() const noexcept { return alphabet.size(); }
  const Rational& operator()(std::size_t u, std::size_t v) const { return weight[u + vertex_count() * v]; }
  Rational& operator()(std::size_t u, std::size_t v) { return weight[u + vertex_count() * v]; }
  bool regular() const;
};

struct WeightedCycle {
  std::vector<std::size_t> vertices;  // edges vertices[i] -> vertices[i+1 mod s]
  Rational weight;
};

/// Repeatedly walks from the smallest vertex with out-weight, following the
/// smallest out-edge, and peels off the first closed cycle at its minimum
/// edge weight. Self-loops come out as length-1 cycles.
std::vector<WeightedCycle> digraph_cycle_decomposition(const WeightedDigraph& G);

/// (s, p)-cycle on the listed vertices: p/s on each diagonal pair, (1-p)/s on
/// each forward edge.
StepDistribution make_cycle(const Alphabet& alphabet, const Rational& p, std::span<const std::size_t> vertices);
StepDistribution make_cycle(const Alphabet& alphabet, double p, std::span<const std::size_t> vertices);

struct CycleRho {
  double rho;
  double bound;  // 1 - 7p(1-p)/s^2
};
CycleRho cycle_rho(std::size_t s, double p);

struct DecompositionPart {
  enum class Kind { cycle, point };
  Kind kind;
  Rational beta;
  StepDistribution dist;
  std::vector<std::size_t> vertices;
  Rational p;  // cycle parameter; 1 for point masses
};

struct ConvexDecomposition {
  std::vector<DecompositionPart> parts;
  Rational alpha;  // alpha(P) used by the construction
};

ConvexDecomposition convex_cycle_decomposition(const StepDistribution& P);

struct PartCheck {
  Rational alpha;
  double rho;
  bool alpha_ok;
  bool rho_ok;
  bool p_ok;
};

struct DecompositionReport {
  bool reconstruction_exact;
  bool weights_sum_to_one;
  bool part_count_ok;
  std::vector<PartCheck> parts;
  Rational alpha_floor;  // alpha(P)^4
  double rho_ceiling;    // 1 - 3 alpha(P)^5
  bool holds() const;
};

DecompositionReport decomposition_guarantees(const ConvexDecomposition& dec, const StepDistribution& P);

}  // namespace sethit
