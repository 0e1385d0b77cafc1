#include "sethit/invariance.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace sethit {

// ---------------------------------------------------------------------------
// Polynomials

MultilinearPolynomial::MultilinearPolynomial(std::size_t n, std::size_t size) : n_(n), size_(size) {
  if (size == 0) throw ValidationError("ensemble size must be positive");
}

MultilinearPolynomial MultilinearPolynomial::constant(std::size_t n, std::size_t size, double c) {
  MultilinearPolynomial P(n, size);
  P.set(Index(n, 0), c);
  return P;
}

void MultilinearPolynomial::check(const Index& sigma) const {
  if (sigma.size() != n_) throw ValidationError("multi-index has the wrong length");
  for (auto s : sigma)
    if (s >= size_) throw ValidationError("multi-index entry out of range");
}

double MultilinearPolynomial::coefficient(const Index& sigma) const {
  check(sigma);
  auto it = coeffs_.find(sigma);
  return it == coeffs_.end() ? 0.0 : it->second;
}

void MultilinearPolynomial::set(const Index& sigma, double value) {
  check(sigma);
  if (!std::isfinite(value)) throw ValidationError("coefficient must be finite");
  if (value == 0) {
    coeffs_.erase(sigma);
  } else {
    coeffs_[sigma] = value;
  }
}

std::size_t support_size(const MultilinearPolynomial::Index& sigma) {
  return static_cast<std::size_t>(std::count_if(sigma.begin(), sigma.end(), [](std::size_t s) { return s != 0; }));
}

std::size_t MultilinearPolynomial::degree() const {
  std::size_t d = 0;
  for (const auto& [sigma, c] : coeffs_) d = std::max(d, support_size(sigma));
  return d;
}

double MultilinearPolynomial::mean() const { return coefficient(Index(n_, 0)); }

double MultilinearPolynomial::second_moment() const {
  std::vector<double> sq;
  for (const auto& [sigma, c] : coeffs_) sq.push_back(c * c);
  return pairwise_sum(sq);
}

double MultilinearPolynomial::variance() const {
  double m = mean();
  return second_moment() - m * m;
}

double MultilinearPolynomial::influence(std::size_t i) const {
  if (i >= n_) throw ValidationError("coordinate out of range");
  std::vector<double> sq;
  for (const auto& [sigma, c] : coeffs_)
    if (sigma[i] != 0) sq.push_back(c * c);
  return pairwise_sum(sq);
}

double MultilinearPolynomial::total_influence() const {
  double s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += influence(i);
  return s;
}

MultilinearPolynomial MultilinearPolynomial::part(std::span<const std::size_t> S) const {
  std::vector<bool> in(n_, false);
  for (auto i : S) {
    if (i >= n_) throw ValidationError("coordinate out of range");
    in[i] = true;
  }
  MultilinearPolynomial out(n_, size_);
  for (const auto& [sigma, c] : coeffs_) {
    bool match = true;
    for (std::size_t i = 0; i < n_ && match; ++i) match = (sigma[i] != 0) == in[i];
    if (match) out.coeffs_[sigma] = c;
  }
  return out;
}

double MultilinearPolynomial::evaluate(const std::vector<std::vector<double>>& ensemble) const {
  if (ensemble.size() != n_) throw ValidationError("ensemble has the wrong number of coordinates");
  double total = 0;
  for (const auto& [sigma, c] : coeffs_) {
    double term = c;
    for (std::size_t i = 0; i < n_; ++i)
      if (sigma[i] != 0) term *= ensemble[i][sigma[i]];
    total += term;
  }
  return total;
}

MultilinearPolynomial poly_from_function(const FunctionSpec& f, const OrthonormalBasis& basis, std::uint64_t budget) {
  auto e = analyze(f, basis, budget);
  MultilinearPolynomial P(f.n(), basis.size());
  MultilinearPolynomial::Index sigma(f.n());
  for (std::uint64_t idx = 0; idx < e.coeffs.size(); ++idx) {
    if (std::abs(e.coeffs[idx]) <= 1e-15) continue;
    decode_mixed_radix(idx, basis.size(), sigma);
    P.set(sigma, e.coeffs[idx]);
  }
  return P;
}

namespace {

std::vector<std::vector<double>> discrete_ensemble(const OrthonormalBasis& basis, std::span<const std::size_t> x) {
  std::vector<std::vector<double>> ens(x.size(), std::vector<double>(basis.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t k = 0; k < basis.size(); ++k) ens[i][k] = basis(k, x[i]);
  return ens;
}

}  // namespace

double evaluate_on_symbols(const MultilinearPolynomial& P, const OrthonormalBasis& basis,
                           std::span<const std::size_t> x) {
  if (P.size() != basis.size()) throw ValidationError("polynomial and basis sizes differ");
  return P.evaluate(discrete_ensemble(basis, x));
}

MultilinearPolynomial t_rho_poly(const MultilinearPolynomial& P, double rho) {
  MultilinearPolynomial out(P.n(), P.size());
  for (const auto& [sigma, c] : P.coeffs()) out.set(sigma, std::pow(rho, static_cast<double>(support_size(sigma))) * c);
  return out;
}

MultilinearPolynomial truncate(const MultilinearPolynomial& P, DegreeFilter filter, std::size_t d) {
  MultilinearPolynomial out(P.n(), P.size());
  for (const auto& [sigma, c] : P.coeffs()) {
    std::size_t s = support_size(sigma);
    bool keep = filter == DegreeFilter::above ? s > d : filter == DegreeFilter::at_most ? s <= d : s >= d;
    if (keep) out.set(sigma, c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ensembles and sampling

EnsembleSequence EnsembleSequence::discrete(OrthonormalBasis basis, std::size_t n) {
  std::size_t size = basis.size();
  return {Kind::discrete, n, size, std::move(basis)};
}

EnsembleSequence EnsembleSequence::gaussian(std::size_t n, std::size_t size) {
  return {Kind::gaussian, n, size, std::nullopt};
}

double EnsembleSequence::orthonormality_defect() const { return basis ? basis->orthonormality_defect() : 0.0; }

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  std::uint64_t t = index ^ a;
  state_ = splitmix64(t);
}

std::uint64_t CounterRng::next() { return splitmix64(state_); }

double CounterRng::uniform() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

double CounterRng::normal() {
  if (spare_) {
    double v = *spare_;
    spare_.reset();
    return v;
  }
  double r = std::sqrt(-2.0 * std::log(uniform()));
  double theta = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

namespace {

constexpr std::uint64_t kBlock = 4096;

// Runs sample(rng, values) for every index, with values of fixed length K, in
// blocks of kBlock samples. Block sums are merged pairwise, so the estimate
// depends only on (seed, samples).
template <class Sample>
std::vector<McEstimate> monte_carlo(const MonteCarloOptions& mc, std::size_t K, Sample&& sample) {
  if (mc.samples < 2) throw ValidationError("need at least two samples");
  std::uint64_t blocks = (mc.samples + kBlock - 1) / kBlock;
  std::vector<double> sums(blocks * K, 0.0), squares(blocks * K, 0.0);
  auto work = [&](unsigned worker, unsigned workers) {
    std::vector<double> values(K);
    for (std::uint64_t b = worker; b < blocks; b += workers) {
      std::uint64_t end = std::min(mc.samples, (b + 1) * kBlock);
      for (std::uint64_t s = b * kBlock; s < end; ++s) {
        CounterRng rng(mc.seed, s);
        sample(rng, values);
        for (std::size_t k = 0; k < K; ++k) {
          sums[b * K + k] += values[k];
          squares[b * K + k] += values[k] * values[k];
        }
      }
    }
  };
  unsigned workers = std::max(1u, mc.threads);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  std::vector<McEstimate> out(K);
  double N = static_cast<double>(mc.samples);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> s(blocks), q(blocks);
    for (std::uint64_t b = 0; b < blocks; ++b) {
      s[b] = sums[b * K + k];
      q[b] = squares[b * K + k];
    }
    double mean = pairwise_sum(s) / N;
    double var = std::max(0.0, (pairwise_sum(q) / N - mean * mean) * N / (N - 1));
    out[k] = {mean, std::sqrt(var / N), mc.samples};
  }
  return out;
}

// Calls visit(x, weight) for every point of supp(pi)^n.
template <class Visit>
void for_each_point(const MarginalDistribution& pi, std::size_t n, std::uint64_t budget, Visit&& visit) {
  auto support = pi.support();
  checked_power(support.size(), n, budget);
  std::vector<std::size_t> pick(n, 0), x(n);
  do {
    double w = 1;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = support[pick[i]];
      w *= pi.prob(x[i]);
    }
    visit(x, w);
  } while (next_tuple(pick, support.size()));
}

// Calls visit(xs, weight) with xs[j] the step-j string, over supp(P)^n.
template <class Visit>
void for_each_joint_point(const StepDistribution& P, std::size_t n, std::uint64_t budget, Visit&& visit) {
  const auto& support = P.support();
  checked_power(support.size(), n, budget);
  std::vector<std::vector<std::size_t>> tuples;
  for (auto idx : support) tuples.push_back(P.tuple(idx));
  std::vector<std::size_t> pick(n, 0);
  std::vector<std::vector<std::size_t>> xs(P.steps(), std::vector<std::size_t>(n));
  do {
    double w = 1;
    for (std::size_t i = 0; i < n; ++i) {
      w *= P.weight(support[pick[i]]);
      for (std::size_t j = 0; j < P.steps(); ++j) xs[j][i] = tuples[pick[i]][j];
    }
    visit(xs, w);
  } while (next_tuple(pick, support.size()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian counterpart

std::vector<std::vector<double>> GaussianCounterpart::sample(CounterRng& rng) const {
  Eigen::VectorXd h(map.cols());
  for (Eigen::Index r = 0; r < h.size(); ++r) h(r) = rng.normal();
  Eigen::VectorXd g = map * h;
  std::vector<std::vector<double>> out(bases.size());
  for (std::size_t j = 0; j < bases.size(); ++j) {
    out[j].assign(bases[j].size(), 1.0);
    for (std::size_t k = 1; k < bases[j].size(); ++k) out[j][k] = g(static_cast<Eigen::Index>(row(j, k)));
  }
  return out;
}

GaussianCounterpart gaussian_counterpart(const StepDistribution& P) {
  std::vector<OrthonormalBasis> bases;
  for (std::size_t j = 0; j < P.steps(); ++j) bases.push_back(build_basis(marginal(P, j)));
  return gaussian_counterpart(P, std::move(bases));
}

GaussianCounterpart gaussian_counterpart(const StepDistribution& P, std::vector<OrthonormalBasis> bases) {
  if (bases.size() != P.steps()) throw ValidationError("need one basis per step");
  const auto& support = P.support();
  const auto s = static_cast<Eigen::Index>(support.size());
  Eigen::VectorXd w(s);
  std::vector<std::vector<std::size_t>> tuples;
  for (Eigen::Index t = 0; t < s; ++t) {
    w(t) = P.weight(support[static_cast<std::size_t>(t)]);
    tuples.push_back(P.tuple(support[static_cast<std::size_t>(t)]));
  }
  auto inner = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) { return (w.array() * u.array() * v.array()).sum(); };

  // Orthonormal basis of L^2 over the support tuples: constant, then indicators.
  std::vector<Eigen::VectorXd> Z{Eigen::VectorXd::Ones(s)};
  for (Eigen::Index t = 0; t < s; ++t) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(s);
    v(t) = 1.0;
    for (const auto& z : Z) v -= inner(v, z) * z;
    double norm = std::sqrt(std::max(inner(v, v), 0.0));
    if (norm < 1e-9 * std::sqrt(w(t))) continue;
    Z.push_back(v / norm);
  }
  if (static_cast<Eigen::Index>(Z.size()) != s) throw ValidationError("support basis is rank-deficient");

  GaussianCounterpart G;
  std::size_t rows = 0;
  for (const auto& b : bases) {
    G.row_offset.push_back(rows);
    rows += b.size() - 1;
  }
  G.map = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), s - 1);
  std::vector<Eigen::VectorXd> X(rows);
  for (std::size_t j = 0; j < bases.size(); ++j) {
    if (bases[j].symbol_count() != P.symbol_count()) throw ValidationError("basis alphabet differs from P's");
    for (std::size_t k = 1; k < bases[j].size(); ++k) {
      Eigen::VectorXd v(s);
      for (Eigen::Index t = 0; t < s; ++t) v(t) = bases[j](k, tuples[static_cast<std::size_t>(t)][j]);
      auto r = static_cast<Eigen::Index>(G.row_offset[j] + k - 1);
      X[static_cast<std::size_t>(r)] = v;
      for (Eigen::Index c = 1; c < s; ++c) G.map(r, c - 1) = inner(v, Z[static_cast<std::size_t>(c)]);
    }
  }
  G.discrete_covariance.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
  for (std::size_t a = 0; a < rows; ++a)
    for (std::size_t b = 0; b < rows; ++b)
      G.discrete_covariance(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = inner(X[a], X[b]);
  Eigen::MatrixXd gauss = G.map * G.map.transpose();
  G.covariance_defect = rows ? (gauss - G.discrete_covariance).cwiseAbs().maxCoeff() : 0.0;
  G.bases = std::move(bases);
  if (G.covariance_defect > kStructuralTol) throw ValidationError("Gaussian counterpart covariance mismatch");
  return G;
}

// ---------------------------------------------------------------------------
// Hypercontractivity

HypercontractivityReport hypercontractivity_check(const MultilinearPolynomial& P, const EnsembleSequence& ens,
                                                  double alpha, const MonteCarloOptions& mc, std::uint64_t budget) {
  if (P.n() != ens.n || P.size() != ens.size) throw ValidationError("polynomial does not match the ensemble");
  if (!(alpha > 0 && alpha <= 1)) throw ValidationError("alpha must lie in (0, 1]");
  HypercontractivityReport rep;
  rep.rho = std::pow(alpha, 1.0 / 6.0) / 2;
  rep.degree = P.degree();
  rep.norm2 = std::sqrt(P.second_moment());
  rep.degree_bound = std::pow(2 / std::pow(alpha, 1.0 / 6.0), static_cast<double>(rep.degree)) * rep.norm2;
  auto noisy = t_rho_poly(P, rep.rho);
  double m3 = 0, m3n = 0, se = 0, se_n = 0;
  if (ens.kind == EnsembleSequence::Kind::discrete) {
    std::vector<double> a, b;
    for_each_point(ens.basis->measure(), P.n(), budget, [&](std::span<const std::size_t> x, double w) {
      auto e = discrete_ensemble(*ens.basis, x);
      a.push_back(w * std::pow(std::abs(P.evaluate(e)), 3));
      b.push_back(w * std::pow(std::abs(noisy.evaluate(e)), 3));
    });
    m3 = pairwise_sum(a);
    m3n = pairwise_sum(b);
    rep.exact = true;
  } else {
    auto est = monte_carlo(mc, 2, [&](CounterRng& rng, std::vector<double>& out) {
      std::vector<std::vector<double>> e(P.n(), std::vector<double>(P.size(), 1.0));
      for (auto& row : e)
        for (std::size_t k = 1; k < row.size(); ++k) row[k] = rng.normal();
      out[0] = std::pow(std::abs(P.evaluate(e)), 3);
      out[1] = std::pow(std::abs(noisy.evaluate(e)), 3);
    });
    m3 = est[0].mean;
    m3n = est[1].mean;
    se = est[0].std_error;
    se_n = est[1].std_error;
    rep.std_error = std::max(se, se_n);
  }
  rep.norm3 = std::cbrt(m3);
  rep.noisy_norm3 = std::cbrt(m3n);
  const double slack = 1 + 1e-12;
  rep.noise_holds = m3n - 3 * se_n <= std::pow(rep.norm2, 3) * slack + 1e-300;
  rep.degree_holds = m3 - 3 * se <= std::pow(rep.degree_bound, 3) * slack + 1e-300;
  return rep;
}

// ---------------------------------------------------------------------------
// Mollifier

namespace {

double bump(double u) {
  if (u <= -1 || u >= 1) return 0.0;
  return std::exp(-1 / ((u + 1) * (u + 1))) * std::exp(-1 / ((u - 1) * (u - 1)));
}

template <class F>
double integrate(F&& f, double a, double b) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-13);
}

}  // namespace

double clamp_unit(double x) { return std::clamp(x, 0.0, 1.0); }

double bump_constant() {
  static const double c = integrate(bump, -1.0, 1.0);
  return c;
}

double mollifier_phi(double lambda, double x) {
  if (!(lambda > 0 && lambda < 0.5)) throw ValidationError("lambda must lie in (0, 1/2)");
  // phi_lambda(x) = int psi(u) phi(x + lambda u) du, split where phi has kinks.
  std::vector<double> cuts{-1.0};
  for (double u : {-x / lambda, (1 - x) / lambda})
    if (u > -1 && u < 1) cuts.push_back(u);
  cuts.push_back(1.0);
  double total = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
    total += integrate([&](double u) { return bump(u) * clamp_unit(x + lambda * u); }, cuts[k], cuts[k + 1]);
  return total / bump_constant();
}

double mollifier_chi(double lambda, std::span<const double> x) {
  double v = 1;
  for (double xi : x) v *= mollifier_phi(lambda, xi);
  return v;
}

// ---------------------------------------------------------------------------
// Invariance and smoothing gaps

namespace {

std::vector<OrthonormalBasis> step_bases(const StepDistribution& P, std::span<const MultilinearPolynomial> polys) {
  if (polys.size() != P.steps()) throw ValidationError("need one polynomial per step");
  std::vector<OrthonormalBasis> bases;
  for (std::size_t j = 0; j < P.steps(); ++j) {
    bases.push_back(build_basis(marginal(P, j)));
    if (polys[j].size() != bases[j].size()) throw ValidationError("polynomial size differs from the step ensemble");
    if (polys[j].n() != polys[0].n()) throw ValidationError("polynomials disagree on n");
  }
  return bases;
}

}  // namespace

InvarianceGapReport invariance_gap(std::span<const MultilinearPolynomial> polys, const StepDistribution& P,
                                   double lambda, const MonteCarloOptions& mc, double C, std::uint64_t budget) {
  auto bases = step_bases(P, polys);
  const std::size_t ell = P.steps(), n = polys[0].n();
  auto Pf = P.exact() ? P.to_float() : P;
  auto counterpart = gaussian_counterpart(Pf, bases);

  InvarianceGapReport rep{};
  std::vector<double> terms;
  std::vector<double> values(ell);
  for_each_joint_point(Pf, n, budget, [&](const std::vector<std::vector<std::size_t>>& xs, double w) {
    for (std::size_t j = 0; j < ell; ++j) values[j] = polys[j].evaluate(discrete_ensemble(bases[j], xs[j]));
    terms.push_back(w * mollifier_chi(lambda, values));
  });
  rep.discrete = pairwise_sum(terms);

  rep.gaussian = monte_carlo(mc, 1, [&](CounterRng& rng, std::vector<double>& out) {
    std::vector<std::vector<std::vector<double>>> ens(ell, std::vector<std::vector<double>>(n));
    for (std::size_t i = 0; i < n; ++i) {
      auto g = counterpart.sample(rng);
      for (std::size_t j = 0; j < ell; ++j) ens[j][i] = std::move(g[j]);
    }
    std::vector<double> v(ell);
    for (std::size_t j = 0; j < ell; ++j) v[j] = polys[j].evaluate(ens[j]);
    out[0] = mollifier_chi(lambda, v);
  })[0];
  rep.gap = std::abs(rep.discrete - rep.gaussian.mean);

  rep.alpha = 1;
  rep.variance_ok = true;
  for (std::size_t j = 0; j < ell; ++j) {
    rep.alpha = std::min(rep.alpha, marginal(Pf, j).min_support_prob().value());
    rep.degree = std::max(rep.degree, polys[j].degree());
    if (polys[j].variance() > 1 + kStructuralTol) rep.variance_ok = false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (const auto& p : polys) s += p.influence(i);
    rep.tau = std::max(rep.tau, s);
  }
  double l = static_cast<double>(ell), d = static_cast<double>(rep.degree);
  double B = C / (lambda * lambda * lambda);
  rep.smooth_bound = std::pow(l, 2.5) * d * B / 3 * std::pow(8 / std::sqrt(rep.alpha), d) * std::sqrt(rep.tau);
  rep.chi_bound = C * std::pow(l, 2.5) * std::pow(rep.tau, 0.125) / std::pow(rep.alpha, 4 * d);
  rep.holds = rep.gap <= rep.smooth_bound + 3 * rep.gaussian.std_error + 1e-12;
  return rep;
}

SmoothingGapReport smoothing_gap(std::span<const MultilinearPolynomial> polys, const StepDistribution& P, double gamma,
                                 double eps, std::uint64_t budget) {
  if (!(gamma >= 0 && gamma <= 1)) throw ValidationError("gamma must lie in [0, 1]");
  if (!(eps > 0 && eps <= 0.5)) throw ValidationError("eps must lie in (0, 1/2]");
  auto bases = step_bases(P, polys);
  const std::size_t ell = P.steps(), n = polys[0].n();
  auto Pf = P.exact() ? P.to_float() : P;
  for (std::size_t j = 0; j < ell; ++j)
    for_each_point(marginal(Pf, j), n, budget, [&](std::span<const std::size_t> x, double) {
      double v = evaluate_on_symbols(polys[j], bases[j], x);
      if (v < -kStructuralTol || v > 1 + kStructuralTol) throw ValidationError("polynomial leaves [0, 1] on its ensemble");
    });
  std::vector<MultilinearPolynomial> smooth;
  for (const auto& p : polys) smooth.push_back(t_rho_poly(p, 1 - gamma));

  std::vector<double> a, b;
  for_each_joint_point(Pf, n, budget, [&](const std::vector<std::vector<std::size_t>>& xs, double w) {
    double u = w, v = w;
    for (std::size_t j = 0; j < ell; ++j) {
      auto e = discrete_ensemble(bases[j], xs[j]);
      u *= polys[j].evaluate(e);
      v *= smooth[j].evaluate(e);
    }
    a.push_back(u);
    b.push_back(v);
  });
  SmoothingGapReport rep;
  rep.original = pairwise_sum(a);
  rep.smoothed = pairwise_sum(b);
  rep.gap = std::abs(rep.original - rep.smoothed);
  double l = static_cast<double>(ell);
  double r = rho(Pf);
  rep.gamma_limit = (1 - r) * eps / (l * std::log(l / eps));
  rep.in_range = gamma <= rep.gamma_limit;
  rep.holds = !rep.in_range || rep.gap <= eps;
  return rep;
}

// ---------------------------------------------------------------------------
// Gaussian reverse hypercontractivity

GaussianRhcReport gaussian_rhc_check(const Eigen::MatrixXd& cov, std::span<const HalfLine> fns,
                                     const MonteCarloOptions& mc) {
  const auto ell = static_cast<std::size_t>(cov.rows());
  if (cov.cols() != cov.rows() || fns.size() != ell || ell == 0)
    throw ValidationError("need a square covariance with one function per step");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kStructuralTol) throw ValidationError("covariance is not symmetric");
  for (std::size_t j = 0; j < ell; ++j)
    if (std::abs(cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) - 1) > kStructuralTol)
      throw ValidationError("each step must be a standard normal");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  GaussianRhcReport rep;
  rep.min_eigenvalue = es.eigenvalues().minCoeff();
  if (rep.min_eigenvalue < -kStructuralTol) throw ValidationError("covariance is not positive semidefinite");
  Eigen::MatrixXd L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  rep.rho = 0;
  for (std::size_t j = 0; j < ell && ell > 1; ++j) {
    std::vector<Eigen::Index> rest;
    for (std::size_t r = 0; r < ell; ++r)
      if (r != j) rest.push_back(static_cast<Eigen::Index>(r));
    Eigen::MatrixXd S(rest.size(), rest.size());
    Eigen::VectorXd c(rest.size());
    for (std::size_t a = 0; a < rest.size(); ++a) {
      c(static_cast<Eigen::Index>(a)) = cov(static_cast<Eigen::Index>(j), rest[a]);
      for (std::size_t b = 0; b < rest.size(); ++b) S(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = cov(rest[a], rest[b]);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(S);
    double r2 = c.dot(cod.solve(c));
    rep.rho = std::max(rep.rho, std::sqrt(std::clamp(r2, 0.0, 1.0)));
  }
  double l = static_cast<double>(ell);
  rep.p = (1 - rep.rho * rep.rho) / l;
  rep.condition_met = rep.min_eigenvalue >= rep.p - kStructuralTol;

  auto est = monte_carlo(mc, ell + 1, [&](CounterRng& rng, std::vector<double>& out) {
    Eigen::VectorXd h(static_cast<Eigen::Index>(ell));
    for (Eigen::Index r = 0; r < h.size(); ++r) h(r) = rng.normal();
    Eigen::VectorXd z = L * h;
    double prod = 1;
    for (std::size_t j = 0; j < ell; ++j) {
      out[j + 1] = fns[j](z(static_cast<Eigen::Index>(j)));
      prod *= out[j + 1];
    }
    out[0] = prod;
  });
  rep.product = est[0];
  rep.means.assign(est.begin() + 1, est.end());
  double mu = 1, rel = 0;
  for (const auto& m : rep.means) {
    mu *= m.mean;
    if (m.mean > 0) rel += (m.std_error / m.mean) * (m.std_error / m.mean);
  }
  double expo = rep.rho < 1 ? l / (1 - rep.rho * rep.rho) : std::numeric_limits<double>::infinity();
  rep.bound = mu >= 1 ? 1.0 : std::pow(mu, expo);
  rep.bound_std_error = std::isfinite(expo) ? rep.bound * expo * std::sqrt(rel) : 0.0;
  rep.holds = rep.product.mean + 3 * rep.product.std_error >= rep.bound - 3 * rep.bound_std_error;
  return rep;
}

// ---------------------------------------------------------------------------

GammaDecayReport gamma_decay_check(const MultilinearPolynomial& P, double gamma) {
  if (!(gamma >= 0 && gamma <= 1)) throw ValidationError("gamma must lie in [0, 1]");
  GammaDecayReport rep;
  std::size_t deg = P.degree();
  rep.holds_up_to = -1;
  rep.decaying = true;
  for (std::size_t d = 0; d <= deg + 1; ++d) {
    double tail = truncate(P, DegreeFilter::at_least, d).second_moment();
    double env = std::pow(1 - gamma, static_cast<double>(d));
    rep.tail.push_back(tail);
    rep.envelope.push_back(env);
    bool ok = tail <= env * (1 + 1e-12);
    if (!ok) rep.decaying = false;
    if (rep.decaying) rep.holds_up_to = static_cast<long>(d);
  }
  return rep;
}

}  // namespace sethit
