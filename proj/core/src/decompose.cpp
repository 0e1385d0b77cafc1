#include "sethit/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sethit {

WeightedDigraph WeightedDigraph::from_distribution(const StepDistribution& P) {
  if (P.steps() != 2) throw ValidationError("a digraph needs a two-step distribution");
  return WeightedDigraph{P.alphabet(), P.exact_weights()};
}

bool WeightedDigraph::regular() const {
  std::size_t m = vertex_count();
  for (std::size_t u = 0; u < m; ++u) {
    Rational in = 0, out = 0;
    for (std::size_t v = 0; v < m; ++v) {
      out += (*this)(u, v);
      in += (*this)(v, u);
    }
    if (in != out) return false;
  }
  return true;
}

std::vector<WeightedCycle> digraph_cycle_decomposition(const WeightedDigraph& G) {
  std::size_t m = G.vertex_count();
  if (G.weight.size() != m * m) throw ValidationError("digraph weight table has the wrong size");
  for (const auto& w : G.weight)
    if (w < 0) throw ValidationError("negative edge weight");
  if (!G.regular()) throw ValidationError("digraph is not regular (in-weight differs from out-weight)");

  WeightedDigraph H = G;
  std::vector<WeightedCycle> cycles;
  auto next_edge = [&](std::size_t u) -> std::optional<std::size_t> {
    for (std::size_t v = 0; v < m; ++v)
      if (H(u, v) > 0) return v;
    return std::nullopt;
  };

  for (std::size_t iter = 0;; ++iter) {
    std::optional<std::size_t> start;
    for (std::size_t u = 0; u < m && !start; ++u)
      if (next_edge(u)) start = u;
    if (!start) break;
    if (iter >= m * m) throw Error("cycle decomposition exceeded |V|^2 iterations");

    std::vector<std::size_t> walk{*start};
    std::vector<std::ptrdiff_t> position(m, -1);
    position[*start] = 0;
    std::size_t u = *start;
    for (;;) {
      auto v = next_edge(u);
      // Regularity guarantees every vertex entered has out-weight.
      if (!v) throw Error("walk stalled in a regular digraph");
      if (position[*v] >= 0) {
        WeightedCycle c;
        c.vertices.assign(walk.begin() + position[*v], walk.end());
        c.weight = H(c.vertices.back(), c.vertices.front());
        for (std::size_t k = 0; k + 1 < c.vertices.size(); ++k)
          c.weight = std::min(c.weight, H(c.vertices[k], c.vertices[k + 1]));
        for (std::size_t k = 0; k < c.vertices.size(); ++k)
          H(c.vertices[k], c.vertices[(k + 1) % c.vertices.size()]) -= c.weight;
        cycles.push_back(std::move(c));
        break;
      }
      position[*v] = static_cast<std::ptrdiff_t>(walk.size());
      walk.push_back(*v);
      u = *v;
    }
  }
  return cycles;
}

namespace {

void check_cycle_vertices(const Alphabet& alphabet, std::span<const std::size_t> vertices) {
  if (vertices.size() < 2) throw ValidationError("a cycle needs at least two vertices");
  std::vector<std::size_t> sorted(vertices.begin(), vertices.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError("duplicate cycle vertex");
  if (sorted.back() >= alphabet.size()) throw ValidationError("cycle vertex outside the alphabet");
}

template <class T>
std::vector<T> cycle_table(std::size_t m, const T& p, std::span<const std::size_t> vertices) {
  std::vector<T> w(m * m, T(0));
  T s = T(static_cast<long>(vertices.size()));
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    std::size_t a = vertices[k], b = vertices[(k + 1) % vertices.size()];
    w[a + m * a] += p / s;
    w[a + m * b] += (T(1) - p) / s;
  }
  return w;
}

}  // namespace

StepDistribution make_cycle(const Alphabet& alphabet, const Rational& p, std::span<const std::size_t> vertices) {
  check_cycle_vertices(alphabet, vertices);
  if (!(p > 0 && p < 1)) throw ValidationError("cycle parameter p must lie in (0, 1)");
  return StepDistribution(alphabet, 2, cycle_table<Rational>(alphabet.size(), p, vertices));
}

StepDistribution make_cycle(const Alphabet& alphabet, double p, std::span<const std::size_t> vertices) {
  check_cycle_vertices(alphabet, vertices);
  if (!(p > 0 && p < 1)) throw ValidationError("cycle parameter p must lie in (0, 1)");
  return StepDistribution(alphabet, 2, cycle_table<double>(alphabet.size(), p, vertices));
}

CycleRho cycle_rho(std::size_t s, double p) {
  if (s < 2) throw ValidationError("cycle size must be at least 2");
  if (!(p > 0 && p < 1)) throw ValidationError("cycle parameter p must lie in (0, 1)");
  double q = p * (1 - p);
  double best = 0.0;
  for (std::size_t k = 1; k < s; ++k) {
    double angle = 2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(s);
    best = std::max(best, 1 - 2 * q * (1 - std::cos(angle)));
  }
  double ss = static_cast<double>(s);
  return {std::sqrt(std::clamp(best, 0.0, 1.0)), 1 - 7 * q / (ss * ss)};
}

ConvexDecomposition convex_cycle_decomposition(const StepDistribution& P) {
  if (P.steps() != 2) throw ValidationError("convex decomposition needs a two-step distribution");
  if (!P.exact()) throw ValidationError("convex decomposition needs rational weights");
  if (!equal_marginals(P)) throw ValidationError("convex decomposition needs equal marginals");
  Rational a = alpha(P).rational();
  if (a == 0) throw ValidationError("convex decomposition needs alpha(P) > 0");

  std::size_t t = P.symbol_count();
  auto support = marginal(P, 0).support();
  WeightedDigraph G = WeightedDigraph::from_distribution(P);
  for (auto x : support) G(x, x) -= a;

  ConvexDecomposition dec;
  dec.alpha = a;
  Rational cap = a / Rational(static_cast<long>(t * t));
  std::vector<Rational> point_mass(t, Rational(0));
  for (auto x : support) point_mass[x] = a;

  for (const auto& c : digraph_cycle_decomposition(G)) {
    if (c.vertices.size() == 1) {
      point_mass[c.vertices[0]] += c.weight;
      continue;
    }
    Rational b = std::min(c.weight, cap);
    Rational s = Rational(static_cast<long>(c.vertices.size()));
    Rational p = b / (b + c.weight);
    for (auto x : c.vertices) point_mass[x] -= b;
    dec.parts.push_back({DecompositionPart::Kind::cycle, s * (c.weight + b),
                         make_cycle(P.alphabet(), p, c.vertices), c.vertices, p});
  }
  for (std::size_t x = 0; x < t; ++x) {
    if (point_mass[x] == 0) continue;
    std::vector<Rational> w(t * t, Rational(0));
    w[x + t * x] = 1;
    dec.parts.push_back(
        {DecompositionPart::Kind::point, point_mass[x], StepDistribution(P.alphabet(), 2, std::move(w)), {x}, 1});
  }
  return dec;
}

bool DecompositionReport::holds() const {
  if (!reconstruction_exact || !weights_sum_to_one || !part_count_ok) return false;
  return std::all_of(parts.begin(), parts.end(), [](const PartCheck& c) { return c.alpha_ok && c.rho_ok && c.p_ok; });
}

DecompositionReport decomposition_guarantees(const ConvexDecomposition& dec, const StepDistribution& P) {
  DecompositionReport rep;
  Rational a = alpha(P).rational();
  rep.alpha_floor = a * a * a * a;
  rep.rho_ceiling = 1.0 - 3.0 * std::pow(to_double(a), 5);

  std::vector<Rational> sum(P.size(), Rational(0));
  Rational total = 0;
  for (const auto& part : dec.parts) {
    total += part.beta;
    const auto& w = part.dist.exact_weights();
    for (auto idx : part.dist.support()) sum[idx] += part.beta * w[idx];

    PartCheck c;
    c.alpha = alpha(part.dist).rational();
    c.alpha_ok = c.alpha >= rep.alpha_floor;
    if (part.kind == DecompositionPart::Kind::point) {
      c.rho = 0.0;
      c.rho_ok = true;
      c.p_ok = true;
    } else {
      c.rho = rho(part.dist);
      c.rho_ok = c.rho <= rep.rho_ceiling + kStructuralTol;
      c.p_ok = part.p >= a * a * a && part.p <= Rational(1, 2);
    }
    rep.parts.push_back(c);
  }
  rep.reconstruction_exact = sum == P.exact_weights();
  rep.weights_sum_to_one = total == 1;
  std::size_t t = P.symbol_count();
  rep.part_count_ok = dec.parts.size() <= t * t + t;
  return rep;
}

}  // namespace sethit
