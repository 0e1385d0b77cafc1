#include "sethit/invariance.hpp"

#include "fixtures.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace sethit;
using namespace sethit::testing;

namespace {

MarginalDistribution uniform(std::size_t m) { return MarginalDistribution::uniform(Alphabet::range(m)); }

// Random polynomial of degree <= max_degree with coefficients in [-1, 1].
MultilinearPolynomial random_poly(std::size_t n, std::size_t size, std::size_t max_degree, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-1, 1);
  MultilinearPolynomial P(n, size);
  MultilinearPolynomial::Index sigma(n, 0);
  do {
    if (support_size(sigma) <= max_degree && coef(rng) > -0.2) P.set(sigma, coef(rng));
  } while (next_tuple(sigma, size));
  return P;
}

// E[h(X)] over pi^n by direct enumeration.
template <class F>
double expect(const MarginalDistribution& pi, std::size_t n, F&& h) {
  std::vector<std::size_t> x(n, 0);
  double total = 0;
  do {
    double w = 1;
    for (auto a : x) w *= pi.prob(a);
    total += w * h(x);
  } while (next_tuple(x, pi.size()));
  return total;
}

double orthant_probability(double r) {
  // P(X > 0, Y > 0) = int_0^inf phi(x) Phi(r x / sqrt(1 - r^2)) dx
  auto integrand = [r](double x) {
    double phi = std::exp(-x * x / 2) / std::sqrt(2 * std::numbers::pi);
    return phi * 0.5 * std::erfc(-r * x / std::sqrt(2 * (1 - r * r)));
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 40.0, 15, 1e-14);
}

}  // namespace

TEST(Polynomial, DictatorCoefficients) {
  auto pi = uniform(2);
  auto basis = build_basis(pi);
  auto f = FunctionSpec::dictator(pi.alphabet(), 1, 0, 1);
  auto P = poly_from_function(f, basis);
  EXPECT_NEAR(P.coefficient({0}), 0.5, 1e-12);
  EXPECT_NEAR(std::abs(P.coefficient({1})), 0.5, 1e-12);
  EXPECT_NEAR(P.coefficient({1}), 0.5 * basis(1, 1), 1e-12);
  EXPECT_EQ(P.degree(), 1u);
}

TEST(Polynomial, ConstantFunction) {
  auto pi = uniform(3);
  auto basis = build_basis(pi);
  auto P = poly_from_function(FunctionSpec::constant(pi.alphabet(), 2, true), basis);
  EXPECT_EQ(P.coeffs().size(), 1u);
  EXPECT_NEAR(P.mean(), 1.0, 1e-12);
  EXPECT_EQ(P.degree(), 0u);
}

TEST(Polynomial, ReproducesRandomTables) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto probs = random_probs(3, rng);
    MarginalDistribution pi(Alphabet::range(3), probs);
    auto basis = build_basis(pi);
    auto f = random_table(pi.alphabet(), 3, rng);
    auto P = poly_from_function(f, basis);
    std::vector<std::size_t> x(3, 0);
    do {
      EXPECT_NEAR(evaluate_on_symbols(P, basis, x), f.value(x), 1e-10);
    } while (next_tuple(x, 3));
  }
}

TEST(Polynomial, FormalStatisticsMatchEnumeration) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    MarginalDistribution pi(Alphabet::range(3), random_probs(3, rng));
    auto basis = build_basis(pi);
    auto P = random_poly(3, 3, 3, rng);
    auto val = [&](std::span<const std::size_t> x) { return evaluate_on_symbols(P, basis, x); };
    EXPECT_NEAR(expect(pi, 3, val), P.mean(), 1e-10);
    EXPECT_NEAR(expect(pi, 3, [&](auto x) { return val(x) * val(x); }), P.second_moment(), 1e-10);
    for (std::size_t i = 0; i < 3; ++i) {
      // E[Var over x_i of P]
      double inf = expect(pi, 3, [&](std::span<const std::size_t> x) {
        std::vector<std::size_t> y(x.begin(), x.end());
        double m = 0, s = 0;
        for (std::size_t a = 0; a < 3; ++a) {
          y[i] = a;
          double v = val(y);
          m += pi.prob(a) * v;
          s += pi.prob(a) * v * v;
        }
        return s - m * m;
      });
      EXPECT_NEAR(inf, P.influence(i), 1e-10);
    }
  }
}

TEST(Polynomial, OrthogonalParts) {
  std::mt19937_64 rng(13);
  auto pi = uniform(3);
  auto basis = build_basis(pi);
  auto P = random_poly(2, 3, 2, rng);
  std::vector<std::vector<std::size_t>> sets{{}, {0}, {1}, {0, 1}};
  double sum_sq = 0, sum_var = 0;
  for (std::size_t a = 0; a < sets.size(); ++a) {
    auto PS = P.part(sets[a]);
    sum_sq += PS.second_moment();
    sum_var += PS.variance();
    for (std::size_t b = 0; b < sets.size(); ++b) {
      if (a == b) continue;
      auto QT = P.part(sets[b]);
      double inner = expect(pi, 2, [&](auto x) { return evaluate_on_symbols(PS, basis, x) * evaluate_on_symbols(QT, basis, x); });
      EXPECT_NEAR(inner, 0.0, 1e-12);
    }
  }
  EXPECT_NEAR(sum_sq, P.second_moment(), 1e-12);
  EXPECT_NEAR(sum_var, P.variance(), 1e-12);
}

TEST(Polynomial, NoiseAndTruncation) {
  std::mt19937_64 rng(14);
  auto P = random_poly(3, 3, 3, rng);
  auto once = t_rho_poly(t_rho_poly(P, 0.6), 0.7);
  auto twice = t_rho_poly(P, 0.42);
  for (const auto& [sigma, c] : twice.coeffs()) EXPECT_NEAR(once.coefficient(sigma), c, 1e-14);
  auto id = t_rho_poly(P, 1.0);
  EXPECT_EQ(id.coeffs(), P.coeffs());
  for (std::size_t d = 0; d <= 3; ++d) {
    auto lo = truncate(P, DegreeFilter::at_most, d);
    auto hi = truncate(P, DegreeFilter::above, d);
    EXPECT_EQ(lo.coeffs().size() + hi.coeffs().size(), P.coeffs().size());
    EXPECT_NEAR(lo.second_moment() + hi.second_moment(), P.second_moment(), 1e-12);
  }
}

TEST(Polynomial, RejectsBadIndices) {
  MultilinearPolynomial P(2, 3);
  EXPECT_THROW(P.set({0, 3}, 1.0), ValidationError);
  EXPECT_THROW(P.set({0}, 1.0), ValidationError);
  EXPECT_THROW(P.set({0, 0}, std::nan("")), ValidationError);
}

TEST(Counterpart, CorrelatedSignPair) {
  const double r = 0.4;
  StepDistribution P(Alphabet::range(2), 2, std::vector<double>{(1 + r) / 4, (1 - r) / 4, (1 - r) / 4, (1 + r) / 4});
  auto G = gaussian_counterpart(P);
  Eigen::MatrixXd cov = G.map * G.map.transpose();
  ASSERT_EQ(cov.rows(), 2);
  EXPECT_NEAR(cov(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(cov(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(cov(0, 1), r, 1e-12);
}

TEST(Counterpart, IndependentIsBlockDiagonal) {
  auto P = independent_product({Rational(1, 3), Rational(1, 6), Rational(1, 2)}, 2);
  auto G = gaussian_counterpart(P);
  Eigen::MatrixXd cov = G.map * G.map.transpose();
  for (std::size_t a = 1; a < 3; ++a)
    for (std::size_t b = 1; b < 3; ++b)
      EXPECT_NEAR(cov(static_cast<Eigen::Index>(G.row(0, a)), static_cast<Eigen::Index>(G.row(1, b))), 0.0, 1e-12);
}

TEST(Counterpart, BasicDistributionCovariance) {
  auto P = basic_distribution();
  auto G = gaussian_counterpart(P);
  EXPECT_EQ(G.map.rows(), 4);
  EXPECT_LE(G.covariance_defect, 1e-10);
}

TEST(Counterpart, RandomCovarianceMatch) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t m = 2 + trial % 3, steps = 2 + trial % 2;
    auto P = random_distribution(m, steps, rng, 0.0);
    auto G = gaussian_counterpart(P);
    Eigen::MatrixXd cov = G.map * G.map.transpose();
    // discrete covariance recomputed from the weight table
    std::vector<OrthonormalBasis> bases;
    for (std::size_t j = 0; j < steps; ++j) bases.push_back(build_basis(marginal(P.to_float(), j)));
    for (std::size_t j1 = 0; j1 < steps; ++j1)
      for (std::size_t j2 = 0; j2 < steps; ++j2)
        for (std::size_t k1 = 1; k1 < m; ++k1)
          for (std::size_t k2 = 1; k2 < m; ++k2) {
            double c = 0;
            for (auto idx : P.support()) {
              auto t = P.tuple(idx);
              c += P.weight(idx) * bases[j1](k1, t[j1]) * bases[j2](k2, t[j2]);
            }
            EXPECT_NEAR(cov(static_cast<Eigen::Index>(G.row(j1, k1)), static_cast<Eigen::Index>(G.row(j2, k2))), c,
                        1e-10);
          }
  }
}

TEST(Hypercontractivity, Constant) {
  auto basis = build_basis(uniform(2));
  auto rep = hypercontractivity_check(MultilinearPolynomial::constant(2, 2, 0.7),
                                      EnsembleSequence::discrete(basis, 2), 0.5);
  EXPECT_TRUE(rep.holds());
  EXPECT_NEAR(rep.noisy_norm3, rep.norm2, 1e-12);
  EXPECT_NEAR(rep.norm3, rep.degree_bound, 1e-12);
}

TEST(Hypercontractivity, RandomLowDegree) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t m = 2 + trial % 2, n = 1 + trial % 3;
    auto pi = uniform(m);
    auto basis = build_basis(pi);
    auto P = random_poly(n, m, 2, rng);
    auto rep = hypercontractivity_check(P, EnsembleSequence::discrete(basis, n), 1.0 / static_cast<double>(m));
    EXPECT_TRUE(rep.exact);
    EXPECT_TRUE(rep.holds()) << trial;
    double m3 = expect(pi, n, [&](auto x) { return std::pow(std::abs(evaluate_on_symbols(P, basis, x)), 3); });
    EXPECT_NEAR(rep.norm3, std::cbrt(m3), 1e-10);
  }
}

TEST(Hypercontractivity, GaussianMonteCarlo) {
  std::mt19937_64 rng(17);
  auto P = random_poly(2, 3, 2, rng);
  MonteCarloOptions mc{20000, 5, 1};
  auto rep = hypercontractivity_check(P, EnsembleSequence::gaussian(2, 3), 1.0 / 3, mc);
  EXPECT_FALSE(rep.exact);
  EXPECT_GT(rep.std_error, 0.0);
  EXPECT_TRUE(rep.holds());
}

TEST(Mollifier, Identities) {
  EXPECT_NEAR(mollifier_phi(0.1, -1.0), 0.0, 1e-12);
  EXPECT_NEAR(mollifier_phi(0.1, 0.5), 0.5, 1e-10);
  EXPECT_NEAR(mollifier_phi(0.1, 2.0), 1.0, 1e-10);
  EXPECT_NEAR(mollifier_phi(0.2, 0.0) + mollifier_phi(0.2, 1.0), 1.0, 1e-10);
  EXPECT_THROW(mollifier_phi(0.5, 0.0), ValidationError);
  EXPECT_THROW(mollifier_phi(0.0, 0.0), ValidationError);
  std::vector<double> xs{0.3, 0.6};
  EXPECT_NEAR(mollifier_chi(0.1, xs), 0.18, 1e-10);
}

TEST(Mollifier, GridBounds) {
  const double lambda = 0.05;
  double prev = -1;
  for (int k = 0; k <= 10000; ++k) {
    double x = -0.5 + 2.0 * k / 10000;
    double v = mollifier_phi(lambda, x);
    EXPECT_LE(std::abs(v - clamp_unit(x)), lambda);
    EXPECT_GE(v, prev - 1e-12);
    if (x <= -lambda || x >= 1 + lambda || (x >= lambda && x <= 1 - lambda)) EXPECT_NEAR(v, clamp_unit(x), 1e-10) << x;
    prev = v;
  }
}

TEST(InvarianceGap, DegreeZero) {
  auto P = basic_distribution();
  std::vector<MultilinearPolynomial> polys(2, MultilinearPolynomial::constant(2, 3, 0.4));
  auto rep = invariance_gap(polys, P, 0.1, {2000, 1, 1});
  EXPECT_NEAR(rep.gap, 0.0, 1e-12);
  EXPECT_TRUE(rep.holds);
}

TEST(InvarianceGap, DictatorPolys) {
  auto P = basic_distribution();
  auto basis = build_basis(marginal(P, 0));
  auto f = FunctionSpec::dictator(P.alphabet(), 1, 0, 0);
  std::vector<MultilinearPolynomial> polys(2, poly_from_function(f, basis));
  auto rep = invariance_gap(polys, P, 0.1, {100000, 3, 1});
  EXPECT_TRUE(rep.holds);
  EXPECT_TRUE(rep.variance_ok);
  EXPECT_EQ(rep.degree, 1u);
  EXPECT_GT(rep.gaussian.std_error, 0.0);
  double oracle = 0;
  for (auto idx : P.support()) {
    auto t = P.tuple(idx);
    oracle += P.weight(idx) * mollifier_phi(0.1, t[0] == 0 ? 1.0 : 0.0) * mollifier_phi(0.1, t[1] == 0 ? 1.0 : 0.0);
  }
  EXPECT_NEAR(rep.discrete, oracle, 1e-10);
}

TEST(Smoothing, ZeroGammaAndConstants) {
  auto P = basic_distribution();
  auto basis = build_basis(marginal(P, 0));
  auto f = FunctionSpec::dictator(P.alphabet(), 2, 1, 2);
  std::vector<MultilinearPolynomial> polys(2, poly_from_function(f, basis));
  EXPECT_NEAR(smoothing_gap(polys, P, 0.0, 0.2).gap, 0.0, 1e-14);
  std::vector<MultilinearPolynomial> consts(2, MultilinearPolynomial::constant(2, 3, 0.3));
  EXPECT_NEAR(smoothing_gap(consts, P, 0.3, 0.2).gap, 0.0, 1e-14);
}

TEST(Smoothing, IndicatorPolysWithinEps) {
  auto P = basic_distribution();
  auto basis = build_basis(marginal(P, 0));
  std::mt19937_64 rng(18);
  std::vector<FunctionSpec> fns{random_rational_table(P.alphabet(), 3, rng), random_rational_table(P.alphabet(), 3, rng)};
  std::vector<MultilinearPolynomial> polys{poly_from_function(fns[0], basis), poly_from_function(fns[1], basis)};
  double eps = 0.2;
  auto probe = smoothing_gap(polys, P, 0.0, eps);
  auto rep = smoothing_gap(polys, P, probe.gamma_limit, eps);
  EXPECT_TRUE(rep.in_range);
  EXPECT_TRUE(rep.holds);
  EXPECT_LE(rep.gap, eps);
  EXPECT_NEAR(rep.original, static_cast<double>(brute_force(P, fns)), 1e-10);
  // gamma_limit = (1 - 1/2) eps / (2 ln(2 / eps))
  EXPECT_NEAR(rep.gamma_limit, 0.5 * eps / (2 * std::log(2 / eps)), 1e-9);
}

TEST(Smoothing, RejectsOutOfRange) {
  auto P = basic_distribution();
  std::vector<MultilinearPolynomial> polys(2, MultilinearPolynomial::constant(1, 3, 1.5));
  EXPECT_THROW(smoothing_gap(polys, P, 0.1, 0.2), ValidationError);
}

TEST(GaussianRhc, PositiveOrthants) {
  Eigen::Matrix2d cov;
  cov << 1, 0.5, 0.5, 1;
  std::vector<HalfLine> fns{{0, true}, {0, true}};
  auto rep = gaussian_rhc_check(cov, fns, {1000000, 42, 1});
  double oracle = orthant_probability(0.5);
  EXPECT_NEAR(oracle, 1.0 / 3, 1e-10);
  EXPECT_LE(std::abs(rep.product.mean - oracle), 3 * rep.product.std_error);
  EXPECT_NEAR(rep.rho, 0.5, 1e-12);
  EXPECT_TRUE(rep.condition_met);
  EXPECT_TRUE(rep.holds);
  EXPECT_NEAR(rep.bound, std::pow(rep.means[0].mean * rep.means[1].mean, 8.0 / 3), 1e-12);
  EXPECT_GT(rep.product.mean, 0.0248 * 10);
}

TEST(GaussianRhc, IndependentAndAntipodal) {
  Eigen::Matrix2d indep = Eigen::Matrix2d::Identity();
  std::vector<HalfLine> same{{0.3, true}, {-0.2, false}};
  auto a = gaussian_rhc_check(indep, same, {100000, 7, 1});
  EXPECT_NEAR(a.rho, 0.0, 1e-12);
  EXPECT_TRUE(a.holds);
  Eigen::Matrix2d cov;
  cov << 1, 0.9, 0.9, 1;
  std::vector<HalfLine> anti{{0, true}, {0, false}};
  auto b = gaussian_rhc_check(cov, anti, {200000, 7, 1});
  EXPECT_NEAR(b.product.mean, 0.5 - orthant_probability(0.9), 4 * b.product.std_error);
  EXPECT_TRUE(b.holds);
  EXPECT_GT(b.product.mean, b.bound);
}

TEST(GaussianRhc, RejectsIndefinite) {
  Eigen::Matrix3d cov;
  cov << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
  std::vector<HalfLine> fns(3);
  EXPECT_THROW(gaussian_rhc_check(cov, fns, {1000, 1, 1}), ValidationError);
}

TEST(GammaDecay, ConstantAndSmoothed) {
  auto c = gamma_decay_check(MultilinearPolynomial::constant(3, 2, 0.5), 0.4);
  EXPECT_TRUE(c.decaying);
  std::mt19937_64 rng(19);
  auto P = random_poly(3, 3, 3, rng);
  double scale = 1 / std::sqrt(P.second_moment());
  MultilinearPolynomial Q(3, 3);
  for (const auto& [sigma, v] : P.coeffs()) Q.set(sigma, v * scale);
  auto rep = gamma_decay_check(t_rho_poly(Q, 0.7), 0.3);
  EXPECT_TRUE(rep.decaying);
  EXPECT_EQ(rep.holds_up_to, static_cast<long>(rep.tail.size()) - 1);
  EXPECT_NEAR(rep.tail[0], t_rho_poly(Q, 0.7).second_moment(), 1e-12);
}

TEST(GammaDecay, ReportsFirstFailure) {
  MultilinearPolynomial P(2, 2);
  P.set({1, 0}, 0.9);
  P.set({1, 1}, 0.9);
  auto rep = gamma_decay_check(P, 0.5);
  // tail: 1.62, 1.62, 0.81 vs 1, 0.5, 0.25
  EXPECT_FALSE(rep.decaying);
  EXPECT_EQ(rep.holds_up_to, -1);
}

TEST(MonteCarlo, ReproducibleAcrossThreads) {
  Eigen::Matrix2d cov;
  cov << 1, 0.3, 0.3, 1;
  std::vector<HalfLine> fns{{0, true}, {0.5, false}};
  auto a = gaussian_rhc_check(cov, fns, {50000, 9, 1});
  auto b = gaussian_rhc_check(cov, fns, {50000, 9, 3});
  EXPECT_EQ(a.product.mean, b.product.mean);
  EXPECT_EQ(a.product.std_error, b.product.std_error);
  auto c = gaussian_rhc_check(cov, fns, {50000, 10, 1});
  EXPECT_NE(a.product.mean, c.product.mean);
}
