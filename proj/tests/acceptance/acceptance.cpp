// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero if
// any criterion fails or overruns its time limit.

#include "sethit/decompose.hpp"
#include "sethit/hitting.hpp"
#include "sethit/invariance.hpp"

#include "fixtures.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

using namespace sethit;
using namespace sethit::testing;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<void(Verdict&)> body;
};

// E[h(x)] over pi^n with exact weights.
template <class H>
Rational exact_mean(const MarginalDistribution& pi, std::size_t n, H&& h) {
  const auto& p = pi.exact_probs();
  std::vector<std::size_t> x(n, 0);
  Rational total = 0;
  do {
    Rational w = 1;
    for (auto a : x) w *= p[a];
    total += w * h(x);
  } while (next_tuple(x, pi.size()));
  return total;
}

Rational table_mean(const std::vector<Rational>& t, const MarginalDistribution& pi, std::size_t n) {
  return exact_mean(pi, n, [&](std::span<const std::size_t> x) { return t[encode_mixed_radix(x, pi.size())]; });
}

// E[Var[f | x_{-i}]] from the table.
Rational table_influence(const std::vector<Rational>& t, const MarginalDistribution& pi, std::size_t n, std::size_t i) {
  const auto& p = pi.exact_probs();
  return exact_mean(pi, n, [&](std::span<const std::size_t> x) {
    std::vector<std::size_t> y(x.begin(), x.end());
    Rational m = 0, s = 0;
    for (std::size_t a = 0; a < pi.size(); ++a) {
      y[i] = a;
      const auto& v = t[encode_mixed_radix(y, pi.size())];
      m += p[a] * v;
      s += p[a] * v * v;
    }
    return Rational(s - m * m);
  });
}

// ---------------------------------------------------------------------------

void rho_pipeline(Verdict& v) {
  auto P = basic_distribution();
  auto K = double_sample_kernel(P, 0);
  double worst = 0;
  for (int y = 0; y < 3; ++y)
    for (int z = 0; z < 3; ++z) worst = std::max(worst, std::abs(K(y, z) - (y == z ? 0.5 : 0.25)));
  v.require(worst <= kStructuralTol, "kernel is not circulant (1/2, 1/4, 1/4)");
  double lambda2 = kernel_second_eigenvalue(K);
  double s = 3, p = 0.5;
  double formula = 1 - 2 * p * (1 - p) * (1 - std::cos(2 * std::numbers::pi / s));
  v.require(std::abs(lambda2 - 0.25) <= kAgreementTol, "lambda_2 != 1/4");
  v.require(std::abs(lambda2 - formula) <= kAgreementTol, "lambda_2 disagrees with the cycle eigenvalue formula");
  double r = rho(P), r_svd = rho_via_svd(P);
  v.require(std::abs(r - 0.5) <= kAgreementTol, "rho != 1/2");
  v.require(std::abs(r - r_svd) <= kAgreementTol, "eigen and SVD routes disagree");
  v.detail << "lambda2=" << lambda2 << " rho=" << r << " |eig-svd|=" << std::abs(r - r_svd);
}

void cycle_rho_bound(Verdict& v) {
  double worst_gap = 0, worst_slack = 1;
  for (std::size_t s = 2; s <= 8; ++s)
    for (int k = 1; k <= 5; ++k) {
      std::vector<std::size_t> verts(s);
      for (std::size_t i = 0; i < s; ++i) verts[i] = i;
      auto C = make_cycle(Alphabet::range(s), Rational(k, 10), verts);
      double numeric = rho(C);
      auto closed = cycle_rho(s, k / 10.0);
      worst_gap = std::max(worst_gap, std::abs(numeric - closed.rho));
      worst_slack = std::min(worst_slack, closed.bound - numeric);
      v.require(numeric <= closed.bound + kAgreementTol, "rho above 1 - 7p(1-p)/s^2");
    }
  v.require(worst_gap <= kAgreementTol, "numeric rho differs from closed form");
  v.detail << "35 cycles, max |numeric-closed|=" << worst_gap << " min slack=" << worst_slack;
}

void decomposition_exactness(Verdict& v) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    auto P = random_equal_marginal(2 + trial % 5, rng);
    auto dec = convex_cycle_decomposition(P);
    // Independent reconstruction of sum beta_k P_k.
    std::vector<Rational> sum(P.size(), 0);
    for (const auto& part : dec.parts) {
      const auto& w = part.dist.exact_weights();
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += part.beta * w[k];
    }
    v.require(sum == P.exact_weights(), "reconstruction is not exact");
    std::size_t m = P.symbol_count();
    v.require(dec.parts.size() <= m * m + m, "too many parts");
    Rational a = alpha(P).rational();
    for (const auto& part : dec.parts) {
      if (part.kind == DecompositionPart::Kind::cycle)
        v.require(part.p >= a * a * a && part.p <= Rational(1, 2), "cycle p outside [alpha^3, 1/2]");
      v.require(alpha(part.dist).rational() >= a * a * a * a, "alpha(P_k) < alpha(P)^4");
      v.require(rho(part.dist) <= 1 - 3 * std::pow(a.convert_to<double>(), 5) + kStructuralTol, "rho(P_k) > 1 - 3 alpha^5");
    }
  }
  auto dec = convex_cycle_decomposition(basic_distribution());
  bool golden = dec.parts.size() == 4 && dec.parts[0].kind == DecompositionPart::Kind::cycle &&
                dec.parts[0].beta == Rational(5, 9) && dec.parts[0].p == Rational(1, 10) &&
                dec.parts[0].vertices.size() == 3;
  for (std::size_t k = 1; golden && k < 4; ++k)
    golden = dec.parts[k].kind == DecompositionPart::Kind::point && dec.parts[k].beta == Rational(4, 27);
  v.require(golden, "basic distribution decomposition differs from 5/9 cycle + 3 x 4/27 points");
  v.detail << "100 random instances exact; basic = 5/9 (3,1/10)-cycle + 3 x 4/27";
}

void fourier_suite(Verdict& v) {
  std::mt19937_64 rng(321);
  double parseval = 0, inf_gap = 0, noise_gap = 0, proj_gap = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t m = 2 + trial % 2, n = 1 + trial % 4;
    auto alph = Alphabet::range(m);
    MarginalDistribution pi(alph, random_probs(m, rng));
    auto B = build_basis(pi);
    auto f = random_rational_table(alph, n, rng);
    auto t = f.tabulate<Rational>();
    auto e = analyze(f, B);
    double second = exact_mean(pi, n, [&](std::span<const std::size_t> x) {
                      const auto& q = t[encode_mixed_radix(x, m)];
                      return Rational(q * q);
                    }).convert_to<double>();
    parseval = std::max(parseval, std::abs(e.squared_norm() - second));
    double var = variance(f, pi).value(), total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double cv = table_influence(t, pi, n, i).convert_to<double>();
      inf_gap = std::max(inf_gap, std::abs(cv - influence_from_coefficients(e, i)));
      total += cv;
    }
    v.require(total <= static_cast<double>(e.degree()) * var + 1e-12, "total influence above deg * Var");
    noise_gap = std::max(noise_gap, noise_operator(f, 0.3, pi).route_gap);
    std::vector<std::size_t> S;
    for (std::size_t c = trial % 2; c < n; c += 2) S.push_back(c);
    auto g = projection_subset(f, S, pi);
    proj_gap = std::max(proj_gap, std::abs(variance(g, pi).value() - projected_variance_from_coefficients(e, S)));
  }
  v.require(parseval <= 1e-9, "Parseval");
  v.require(inf_gap <= 1e-10, "influence routes");
  v.require(noise_gap <= 1e-10, "noise routes");
  v.require(proj_gap <= 1e-10, "projected variance identity");
  v.detail << "parseval=" << parseval << " influence=" << inf_gap << " noise=" << noise_gap << " projection=" << proj_gap;
}

void hitting_oracle(Verdict& v) {
  std::mt19937_64 rng(99);
  int checked = 0;
  for (int trial = 0; checked < 50; ++trial) {
    std::size_t m = 2 + trial % 2, l = 2 + (trial / 2) % 2, n = 1 + trial % 6;
    auto P = random_distribution(m, l, rng, 0.6);
    if (P.support().size() > 6) continue;
    std::vector<FunctionSpec> fns;
    for (std::size_t j = 0; j < l; ++j) fns.push_back(random_histogram_function(P.alphabet(), n, rng));
    auto dp = histogram_expectation(P, fns);
    auto en = enumerate_expectation(P, fns);
    v.require(dp.exact() && en.exact() && dp.rational() == en.rational(), "DP and enumeration differ");
    ++checked;
  }
  auto P = basic_distribution();
  auto f = FunctionSpec::mod_linear(P.alphabet(), 2, 3, {1, 1}, 0);
  std::vector<FunctionSpec> fns{f, f};
  Rational oracle = brute_force(P, fns);
  v.require(oracle == Rational(1, 12), "mod-linear brute force != 1/12");
  v.require(histogram_expectation(P, fns).rational() == oracle, "mod-linear DP != 1/12");
  v.require(enumerate_expectation(P, fns).rational() == oracle, "mod-linear enumeration != 1/12");
  v.detail << checked << " instances exact; mod-linear n=2 = " << oracle;
}

void density_increment_suite(Verdict& v) {
  std::mt19937_64 rng(47);
  std::size_t worst_ratio_num = 0, worst_ratio_den = 1;
  for (int trial = 0; trial < 50; ++trial) {
    auto P = random_equal_marginal(3, rng);
    auto pi = marginal(P, 0);
    auto base = random_rational_table(P.alphabet(), 3, rng).tabulate<Rational>();
    for (std::size_t k = 0; k < base.size(); k += 3) base[k] = 1;
    auto f = FunctionSpec::table(P.alphabet(), 3, base);
    Rational mu = table_mean(base, pi, 3);
    Rational eps(1, 4);
    auto r = density_increment(P, f, Number(eps), 2);
    Rational eps_prime = eps * alpha(P).rational() * alpha(P).rational();
    auto bound = static_cast<std::size_t>(std::ceil(2 * std::log(1 / mu.convert_to<double>()) / eps_prime.convert_to<double>()));
    v.require(r.steps.size() <= bound, "iteration count above ceil(2 ln(1/mu)/eps')");
    v.require(is_resilient(r.g, Number(eps), 2, pi).resilient, "output fails an independent resilience check");
    v.require(table_mean(r.g.tabulate<Rational>(), pi, 3) >= mu, "E[g] < mu");
    if (r.steps.size() * worst_ratio_den > worst_ratio_num * bound) {
      worst_ratio_num = r.steps.size();
      worst_ratio_den = bound;
    }
  }
  v.detail << "50 instances; worst iterations/bound = " << worst_ratio_num << "/" << worst_ratio_den;
}

void influence_reduction_suite(Verdict& v) {
  auto P = basic_distribution();
  const std::size_t m = 3, ell = 2;
  std::mt19937_64 rng(59);
  std::size_t max_iters = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 1 + trial % 3;
    std::vector<FunctionSpec> fns{random_rational_table(P.alphabet(), n, rng), random_rational_table(P.alphabet(), n, rng)};
    auto r = influence_reduction(P, fns, 0.1);
    double slack = 1 - r.rho * r.rho;
    double gain_target = 0.1 * slack / 2;
    double floor = 0.1 * slack / (2.0 * ell * std::pow(m, ell + 1.0));
    v.require(r.iteration_bound == 53, "iteration bound != 53");
    v.require(!r.stalled, "reduction stalled");
    v.require(r.steps.size() <= 53, "more than 53 iterations");
    max_iters = std::max(max_iters, r.steps.size());

    // Replay every step on explicit tables.
    std::vector<std::vector<Rational>> g;
    for (const auto& f : fns) g.push_back(f.tabulate<Rational>());
    std::vector<MarginalDistribution> pis{marginal(P, 0), marginal(P, 1)};
    for (const auto& s : r.steps) {
      std::vector<std::vector<Rational>> next(ell, std::vector<Rational>(g[0].size()));
      std::vector<std::size_t> x(n, 0);
      do {
        auto at = [&](std::size_t j, std::size_t a) {
          auto y = x;
          y[s.coordinate] = a;
          return g[j][encode_mixed_radix(y, m)];
        };
        auto idx = encode_mixed_radix(x, m);
        for (std::size_t j = 0, k = 0; j < ell; ++j)
          next[j][idx] = j == s.step ? std::max(at(j, s.y), at(j, s.z)) : at(j, s.others[k++]);
      } while (next_tuple(x, m));
      Rational gain = 0;
      for (std::size_t j = 0; j < ell; ++j) gain += table_mean(next[j], pis[j], n) - table_mean(g[j], pis[j], n);
      v.require(gain.convert_to<double>() >= gain_target * (1 - 1e-12), "expectation-sum gain below tau(1-rho^2)/2");
      auto as_fns = [&](const std::vector<std::vector<Rational>>& t) {
        return std::vector<FunctionSpec>{FunctionSpec::table(P.alphabet(), n, t[0]), FunctionSpec::table(P.alphabet(), n, t[1])};
      };
      Rational before = brute_force(P, as_fns(g)), after = brute_force(P, as_fns(next));
      v.require(before.convert_to<double>() >= floor * after.convert_to<double>() * (1 - 1e-12), "product ratio below floor");
      v.require(s.max_gain.exact && s.max_gain.holds, "max gain check fails");
      g = std::move(next);
    }
    for (std::size_t j = 0; j < ell; ++j) {
      v.require(g[j] == r.g[j].tabulate<Rational>(), "replayed tables differ from the returned ones");
      for (std::size_t i = 0; i < n; ++i)
        v.require(table_influence(g[j], pis[j], n, i).convert_to<double>() <= 0.1, "final influence above tau");
    }
  }
  v.detail << "20 instances replayed; max iterations " << max_iters << " <= 53";
}

void counterexample_suite(Verdict& v) {
  std::vector<std::size_t> ns{6, 9, 12};
  auto rep = counterexample_unequal_marginals(ns);
  std::vector<Rational> normalized;
  for (const auto& row : rep.rows) {
    v.require(row.normalized.exact(), "normalized value is not exact");
    auto lo = std::min(row.mu1.rational(), row.mu2.rational());
    v.require(row.normalized.rational() == row.product.rational() / (lo * lo), "normalization mismatch");
    normalized.push_back(row.normalized.rational());
  }
  for (std::size_t k = 1; k < normalized.size(); ++k) v.require(normalized[k] < normalized[k - 1], "not strictly decreasing");
  v.detail << "normalized " << normalized[0] << " > " << normalized[1] << " > " << normalized[2] << "; ";

  auto P = ap3_distribution();
  for (std::size_t n = 2; n <= 8; ++n) {
    auto fns = three_sets(n);
    v.require(enumerate_expectation(P, fns).rational() == 0, "three-set product nonzero (enumeration)");
  }
  auto fns60 = three_sets(60);
  v.require(histogram_expectation(P, fns60).rational() == 0, "three-set product nonzero at n=60 (DP)");
  // Measures: P(Bin(n, 1/3) <= ceil(n/3) - 1), rising toward 1/2.
  double prev = 0;
  for (std::size_t n : {6, 12, 24, 60}) {
    auto uniform = MarginalDistribution::uniform(P.alphabet());
    double mu = expectation(three_sets(n)[0], uniform, {Engine::dp}).value();
    v.require(mu > prev && mu < 0.5, "measures do not rise toward 1/2");
    prev = mu;
  }
  v.require(prev >= 0.45, "measure at n=60 below 0.45");
  double last = 2;
  for (std::size_t n : {6, 12, 24}) {
    auto r = counterexample_three_sets(n);
    double mx = 0;
    for (const auto& x : r.max_influence) mx = std::max(mx, x.value());
    v.require(mx < last, "max influence not strictly decreasing");
    last = mx;
  }
  v.detail << "three-set product 0 for n=2..8,60; measure(60)=" << prev;
}

MultilinearPolynomial random_poly(std::size_t n, std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-1, 1);
  MultilinearPolynomial P(n, size);
  MultilinearPolynomial::Index sigma(n, 0);
  do {
    if (support_size(sigma) <= 2 && coef(rng) > -0.2) P.set(sigma, coef(rng));
  } while (next_tuple(sigma, size));
  return P;
}

void hypercontractivity_suite(Verdict& v) {
  std::mt19937_64 rng(16);
  double tightest = 1e300;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t m = 2 + trial % 2, n = 1 + trial % 3;
    auto basis = build_basis(MarginalDistribution::uniform(Alphabet::range(m)));
    auto P = random_poly(n, m, rng);
    auto rep = hypercontractivity_check(P, EnsembleSequence::discrete(basis, n), 1.0 / static_cast<double>(m));
    v.require(rep.exact, "not exact");
    v.require(rep.noise_holds, "noise inequality fails");
    v.require(rep.degree_holds, "degree bound fails");
    if (rep.norm2 > 0) tightest = std::min(tightest, rep.norm2 / std::max(rep.noisy_norm3, 1e-300));
  }
  v.detail << "100 polynomials exact; min norm2/noisy_norm3 = " << tightest;
}

void edge_variance_suite(Verdict& v) {
  std::mt19937_64 rng(5);
  std::size_t checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto P = random_distribution(2 + trial % 4, 2 + trial % 2, rng);
    for (std::size_t j = 0; j < P.steps(); ++j)
      for (std::size_t a = 0; a < P.symbol_count(); ++a) {
        std::vector<Rational> f(P.symbol_count(), 0);
        f[a] = 1;
        v.require(check_edge_variance(P, j, std::span<const Rational>(f)).holds, "edge variance inequality fails");
        ++checked;
      }
  }
  v.detail << checked << " indicator checks on 50 distributions";
}

double orthant(double r) {
  auto integrand = [r](double x) {
    return std::exp(-x * x / 2) / std::sqrt(2 * std::numbers::pi) * 0.5 * std::erfc(-r * x / std::sqrt(2 * (1 - r * r)));
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 40.0, 15, 1e-14);
}

void gaussian_rhc_suite(Verdict& v) {
  Eigen::Matrix2d cov;
  cov << 1, 0.5, 0.5, 1;
  std::vector<HalfLine> fns{{0, true}, {0, true}};
  auto rep = gaussian_rhc_check(cov, fns, {1000000, 20240601, 1});
  double oracle = orthant(0.5);
  double z = (rep.product.mean - oracle) / rep.product.std_error;
  v.require(std::abs(oracle - 1.0 / 3) <= 1e-10, "quadrature oracle != 1/3");
  v.require(std::abs(z) <= 3, "estimate not within 3 sigma of the oracle");
  v.require(rep.holds, "reverse hypercontractive inequality fails");
  v.require(rep.product.mean - 3 * rep.product.std_error > std::pow(0.25, 8.0 / 3), "no margin over 0.25^(8/3)");
  v.detail << "E[fg]=" << rep.product.mean << " +- " << rep.product.std_error << " (z=" << z << ") bound=" << rep.bound;
}

void markov_suite(Verdict& v) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t m = 2 + trial % 2, n = 1 + trial % 3;
    auto pi = random_probs(m, rng);
    std::vector<std::vector<Rational>> K;
    for (std::size_t a = 0; a < m; ++a) K.push_back(random_probs(m, rng));
    auto P = markov_chain(pi, K, 3);
    auto f = random_rational_table(P.alphabet(), n, rng);
    auto t = f.tabulate<Rational>();
    // g(x) = f(x) E[f(X3) | X2 = x] from the kernel.
    std::vector<Rational> g(t.size());
    std::vector<std::size_t> x(n, 0), y(n, 0);
    do {
      Rational cond = 0;
      std::fill(y.begin(), y.end(), 0);
      do {
        Rational w = 1;
        for (std::size_t i = 0; i < n; ++i) w *= K[x[i]][y[i]];
        cond += w * t[encode_mixed_radix(y, m)];
      } while (next_tuple(y, m));
      auto idx = encode_mixed_radix(x, m);
      g[idx] = t[idx] * cond;
      v.require(g[idx] <= t[idx], "g > f somewhere");
    } while (next_tuple(x, m));
    Rational lhs = brute_force(P, {f, f, f});
    std::vector<std::size_t> first_two{0, 1};
    Rational rhs = brute_force(P.project(first_two), {f, FunctionSpec::table(P.alphabet(), n, g)});
    v.require(lhs == rhs, "identity fails on the independent oracle");
    auto rep = markov_same_set_check(P, f);
    v.require(rep.identity_holds && rep.dominated, "library check fails");
    v.require(rep.lhs.rational() == lhs && rep.rhs.rational() == rhs, "library values differ from the oracle");
  }
  v.detail << "20 three-step chains exact";
}

void exponent_suite(Verdict& v) {
  std::vector<Rational> pi(3, Rational(1, 3));
  std::vector<double> grid{0.05, 0.1, 0.2, 0.4, 0.7};
  auto ind = estimate_hitting_exponent(independent_product(pi), grid);
  auto id = estimate_hitting_exponent(identity_coupling(pi), grid);
  v.require(std::abs(ind.slope - 2) <= 0.05, "independence slope not 2 +- 0.05");
  v.require(std::abs(id.slope - 1) <= 0.05, "identity slope not 1 +- 0.05");
  v.detail << "independence slope=" << ind.slope << " identity slope=" << id.slope;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {1, "rho pipeline", 1, rho_pipeline},
      {2, "cycle rho bound", 5, cycle_rho_bound},
      {3, "decomposition exactness", 30, decomposition_exactness},
      {4, "fourier suite", 60, fourier_suite},
      {5, "hitting oracle equivalence", 60, hitting_oracle},
      {6, "density increment", 120, density_increment_suite},
      {7, "influence reduction", 120, influence_reduction_suite},
      {8, "counterexamples", 60, counterexample_suite},
      {9, "hypercontractivity", 60, hypercontractivity_suite},
      {10, "edge variance", 10, edge_variance_suite},
      {11, "gaussian reverse hypercontractivity", 30, gaussian_rhc_suite},
      {12, "markov reduction", 30, markov_suite},
      {13, "exponent fit", 60, exponent_suite},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Verdict v;
    auto start = std::chrono::steady_clock::now();
    try {
      c.body(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.require(secs < c.limit_s, "over time limit");
    if (!v.pass) ++failures;
    std::printf("%s [%2d] %-36s %7.2fs/%gs  %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, secs, c.limit_s,
                v.detail.str().c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
