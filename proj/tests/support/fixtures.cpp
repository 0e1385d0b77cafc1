#include "fixtures.hpp"

#include <algorithm>
#include <numeric>

namespace sethit::testing {

StepDistribution basic_distribution() {
  std::vector<Rational> w(9, Rational(0));
  for (std::size_t x = 0; x < 3; ++x) {
    w[x + 3 * x] = Rational(1, 6);
    w[x + 3 * ((x + 1) % 3)] = Rational(1, 6);
  }
  return StepDistribution(Alphabet::range(3), 2, std::move(w), "basic");
}

StepDistribution identity_coupling(const std::vector<Rational>& pi) {
  std::size_t m = pi.size();
  std::vector<Rational> w(m * m, Rational(0));
  for (std::size_t x = 0; x < m; ++x) w[x + m * x] = pi[x];
  return StepDistribution(Alphabet::range(m), 2, std::move(w), "identity");
}

StepDistribution independent_product(const std::vector<Rational>& pi, std::size_t steps) {
  std::size_t m = pi.size();
  auto size = checked_power(m, steps, kDefaultBudget);
  std::vector<Rational> w(size);
  std::vector<std::size_t> x(steps, 0);
  for (std::uint64_t idx = 0; idx < size; ++idx) {
    Rational p = 1;
    for (auto a : x) p *= pi[a];
    w[idx] = p;
    next_tuple(x, m);
  }
  return StepDistribution(Alphabet::range(m), steps, std::move(w), "independent");
}

std::vector<Rational> random_probs(std::size_t m, std::mt19937_64& rng) {
  std::uniform_int_distribution<long> pick(1, 9);
  std::vector<long> raw(m);
  for (auto& r : raw) r = pick(rng);
  long total = std::accumulate(raw.begin(), raw.end(), 0L);
  std::vector<Rational> out;
  for (auto r : raw) out.emplace_back(r, total);
  return out;
}

StepDistribution random_equal_marginal(std::size_t m, std::mt19937_64& rng, bool full_diagonal) {
  std::vector<Rational> w(m * m, Rational(0));
  std::uniform_int_distribution<long> weight(1, 6);
  std::uniform_int_distribution<std::size_t> count(1, 2 * m);
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  if (full_diagonal)
    for (std::size_t x = 0; x < m; ++x) w[x + m * x] += weight(rng);
  std::size_t cycles = count(rng);
  for (std::size_t k = 0; k < cycles; ++k) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t len = std::uniform_int_distribution<std::size_t>(1, m)(rng);
    Rational cw = weight(rng);
    for (std::size_t i = 0; i < len; ++i) w[perm[i] + m * perm[(i + 1) % len]] += cw;
  }
  Rational total = 0;
  for (const auto& v : w) total += v;
  for (auto& v : w) v /= total;
  return StepDistribution(Alphabet::range(m), 2, std::move(w), "random-equal-marginal");
}

StepDistribution random_distribution(std::size_t m, std::size_t steps, std::mt19937_64& rng, double zero_rate) {
  auto size = checked_power(m, steps, kDefaultBudget);
  std::uniform_int_distribution<long> weight(1, 9);
  std::bernoulli_distribution zero(zero_rate);
  std::vector<long> raw(size);
  for (auto& r : raw) r = zero(rng) ? 0 : weight(rng);
  if (std::all_of(raw.begin(), raw.end(), [](long r) { return r == 0; })) raw[0] = 1;
  long total = std::accumulate(raw.begin(), raw.end(), 0L);
  std::vector<Rational> w;
  for (auto r : raw) w.emplace_back(r, total);
  return StepDistribution(Alphabet::range(m), steps, std::move(w), "random");
}

FunctionSpec random_table(const Alphabet& alphabet, std::size_t n, std::mt19937_64& rng) {
  auto size = checked_power(alphabet.size(), n, kDefaultBudget);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(size);
  for (auto& x : v) x = u(rng);
  return FunctionSpec::table(alphabet, n, std::move(v));
}

FunctionSpec random_rational_table(const Alphabet& alphabet, std::size_t n, std::mt19937_64& rng) {
  auto size = checked_power(alphabet.size(), n, kDefaultBudget);
  std::uniform_int_distribution<long> u(0, 4);
  std::vector<Rational> v;
  for (std::uint64_t k = 0; k < size; ++k) v.emplace_back(u(rng), 4);
  return FunctionSpec::table(alphabet, n, std::move(v));
}

FunctionSpec random_histogram_function(const Alphabet& alphabet, std::size_t n, std::mt19937_64& rng,
                                       std::size_t max_anchor_coordinate) {
  std::size_t m = alphabet.size();
  std::bernoulli_distribution coin(0.5);
  if (coin(rng)) {
    long q = std::uniform_int_distribution<long>(2, 4)(rng);
    std::vector<long> c(n), map(m);
    for (auto& v : c) v = std::uniform_int_distribution<long>(0, q - 1)(rng);
    for (auto& v : map) v = std::uniform_int_distribution<long>(0, q - 1)(rng);
    return FunctionSpec::mod_linear(alphabet, n, q, c, std::uniform_int_distribution<long>(0, q - 1)(rng), map);
  }
  std::vector<SymmetricClause> clauses;
  std::size_t k = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
  for (std::size_t c = 0; c < k; ++c) {
    SymmetricClause clause{std::nullopt, std::vector<CountWindow>(m, {0, static_cast<long>(n)})};
    if (coin(rng)) {
      std::size_t coord = std::uniform_int_distribution<std::size_t>(0, std::min(max_anchor_coordinate, n - 1))(rng);
      clause.anchor = Anchor{coord, std::uniform_int_distribution<std::size_t>(0, m - 1)(rng)};
    }
    std::size_t a = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
    long lo = std::uniform_int_distribution<long>(0, static_cast<long>(n))(rng);
    long hi = std::uniform_int_distribution<long>(lo, static_cast<long>(n))(rng);
    clause.windows[a] = {lo, hi};
    clauses.push_back(std::move(clause));
  }
  return FunctionSpec::anchored_symmetric(alphabet, n, std::move(clauses));
}

StepDistribution markov_chain(const std::vector<Rational>& pi, const std::vector<std::vector<Rational>>& kernel,
                              std::size_t steps) {
  std::size_t m = pi.size();
  auto size = checked_power(m, steps, kDefaultBudget);
  std::vector<Rational> w(size);
  std::vector<std::size_t> x(steps, 0);
  for (std::uint64_t idx = 0; idx < size; ++idx) {
    Rational p = pi[x[0]];
    for (std::size_t j = 1; j < steps; ++j) p *= kernel[x[j - 1]][x[j]];
    w[idx] = p;
    next_tuple(x, m);
  }
  return StepDistribution(Alphabet::range(m), steps, std::move(w), "markov");
}

Rational brute_force(const StepDistribution& P, const std::vector<FunctionSpec>& fns) {
  std::size_t n = fns[0].n(), l = P.steps(), m = P.symbol_count();
  std::uint64_t cells = P.size();
  std::vector<std::size_t> pick(n, 0);
  std::vector<std::size_t> digits(l);
  std::vector<std::vector<std::size_t>> x(l, std::vector<std::size_t>(n));
  Rational total = 0;
  do {
    Rational term = 1;
    for (std::size_t c = 0; c < n; ++c) {
      term *= P.exact_weights()[pick[c]];
      decode_mixed_radix(pick[c], m, digits);
      for (std::size_t j = 0; j < l; ++j) x[j][c] = digits[j];
    }
    if (term == 0) continue;
    for (std::size_t j = 0; j < l; ++j) term *= fns[j].exact_value(x[j]);
    total += term;
  } while (next_tuple(pick, cells));
  return total;
}

}  // namespace sethit::testing
