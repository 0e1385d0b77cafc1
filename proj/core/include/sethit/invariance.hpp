#pragma once

// Multilinear polynomials over orthonormal ensembles, their Gaussian
// counterparts, and the numerical checks around the invariance principle:
// hypercontractivity, mollified indicators, smoothing and Gaussian reverse
// hypercontractivity.

#include "sethit/fourier.hpp"

#include <map>

namespace sethit {

/// sum_sigma alpha(sigma) prod_i x_{i, sigma_i}; sigma_i = 0 is the constant.
class MultilinearPolynomial {
 public:
  using Index = std::vector<std::size_t>;

  MultilinearPolynomial(std::size_t n, std::size_t size);
  static MultilinearPolynomial constant(std::size_t n, std::size_t size, double c);

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return size_; }
  const std::map<Index, double>& coeffs() const noexcept { return coeffs_; }
  double coefficient(const Index& sigma) const;
  void set(const Index& sigma, double value);

  /// Largest |sigma| with a nonzero coefficient; 0 for the zero polynomial.
  std::size_t degree() const;
  double mean() const;
  double second_moment() const;
  double variance() const;
  double influence(std::size_t i) const;
  double total_influence() const;
  /// P_S: the terms whose support is exactly S.
  MultilinearPolynomial part(std::span<const std::size_t> S) const;

  /// ensemble[i][k] is the value of x_{i,k}.
  double evaluate(const std::vector<std::vector<double>>& ensemble) const;

 private:
  void check(const Index& sigma) const;

  std::size_t n_;
  std::size_t size_;
  std::map<Index, double> coeffs_;
};

std::size_t support_size(const MultilinearPolynomial::Index& sigma);

MultilinearPolynomial poly_from_function(const FunctionSpec& f, const OrthonormalBasis& basis,
                                         std::uint64_t budget = kDefaultBudget);
/// P evaluated on the discrete ensemble at the point x.
double evaluate_on_symbols(const MultilinearPolynomial& P, const OrthonormalBasis& basis,
                           std::span<const std::size_t> x);

MultilinearPolynomial t_rho_poly(const MultilinearPolynomial& P, double rho);

enum class DegreeFilter { above, at_most, at_least };
MultilinearPolynomial truncate(const MultilinearPolynomial& P, DegreeFilter filter, std::size_t d);

/// n copies of one ensemble: the basis of pi, or independent standard normals.
struct EnsembleSequence {
  enum class Kind { discrete, gaussian };
  Kind kind;
  std::size_t n;
  std::size_t size;
  std::optional<OrthonormalBasis> basis;

  static EnsembleSequence discrete(OrthonormalBasis basis, std::size_t n);
  static EnsembleSequence gaussian(std::size_t n, std::size_t size);
  /// max |E[x_j x_k] - delta_jk|; exact zero for the Gaussian kind.
  double orthonormality_defect() const;
};

/// Counter-based generator: the stream is a pure function of (seed, index).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t index);
  std::uint64_t next();
  double uniform();  // in (0, 1]
  double normal();   // Box-Muller

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

struct McEstimate {
  double mean = 0;
  double std_error = 0;
  std::uint64_t samples = 0;
};

struct MonteCarloOptions {
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// G^(j)_{i,k} = sum_r map(row(j, k), r) H_{i,r} with H independent normals.
struct GaussianCounterpart {
  std::vector<OrthonormalBasis> bases;
  Eigen::MatrixXd map;                  // rows stacked step-major over k >= 1
  std::vector<std::size_t> row_offset;  // first row of each step
  Eigen::MatrixXd discrete_covariance;
  double covariance_defect;

  std::size_t normals() const { return static_cast<std::size_t>(map.cols()); }
  std::size_t row(std::size_t step, std::size_t k) const { return row_offset.at(step) + k - 1; }
  /// Per-coordinate ensemble values for every step from one draw of H.
  std::vector<std::vector<double>> sample(CounterRng& rng) const;
};

/// Bases default to those of the step marginals. Throws ValidationError on a
/// rank-deficient support basis or a covariance mismatch above 1e-10.
GaussianCounterpart gaussian_counterpart(const StepDistribution& P);
GaussianCounterpart gaussian_counterpart(const StepDistribution& P, std::vector<OrthonormalBasis> bases);

struct HypercontractivityReport {
  double rho;          // alpha^{1/6} / 2
  double noisy_norm3;  // E[|T_rho P|^3]^{1/3}
  double norm2;        // E[P^2]^{1/2}
  double norm3;        // E[|P|^3]^{1/3}
  double degree_bound; // (2 / alpha^{1/6})^d E[P^2]^{1/2}
  std::size_t degree;
  double std_error = 0;  // Gaussian kind only
  bool exact = false;
  bool noise_holds = false;
  bool degree_holds = false;
  bool holds() const { return noise_holds && degree_holds; }
};

/// Discrete: exhaustive over supp(pi)^n. Gaussian: Monte Carlo with 3 stderr slack.
HypercontractivityReport hypercontractivity_check(const MultilinearPolynomial& P, const EnsembleSequence& ens,
                                                  double alpha, const MonteCarloOptions& mc = {},
                                                  std::uint64_t budget = kDefaultBudget);

/// phi(x) = clamp(x, 0, 1) and its convolution with the rescaled bump.
double mollifier_phi(double lambda, double x);
double mollifier_chi(double lambda, std::span<const double> x);
double clamp_unit(double x);
/// Normalizing constant of exp(-1/(x+1)^2) exp(-1/(x-1)^2) on (-1, 1).
double bump_constant();

struct InvarianceGapReport {
  double discrete;  // exact E[chi_lambda(P(X))]
  McEstimate gaussian;
  double gap;
  double tau;       // max_i sum_j Inf_i(P^(j))
  std::size_t degree;
  double alpha;
  double smooth_bound;  // l^{5/2} d B (8/sqrt(alpha))^d sqrt(tau) / 3 with B = C / lambda^3
  double chi_bound;     // C l^{5/2} tau^{1/8} / alpha^{4d}
  bool variance_ok;     // Var[P^(j)] <= 1
  bool holds;           // gap <= smooth_bound + 3 stderr
};

InvarianceGapReport invariance_gap(std::span<const MultilinearPolynomial> polys, const StepDistribution& P,
                                   double lambda, const MonteCarloOptions& mc = {}, double C = 10.0,
                                   std::uint64_t budget = kDefaultBudget);

struct SmoothingGapReport {
  double original;  // E[prod P^(j)]
  double smoothed;  // E[prod T_{1-gamma} P^(j)]
  double gap;
  double gamma_limit;  // (1 - rho) eps / (l ln(l / eps))
  bool in_range;
  bool holds;
};

/// Throws ValidationError when some P^(j) leaves [0, 1] on its ensemble.
SmoothingGapReport smoothing_gap(std::span<const MultilinearPolynomial> polys, const StepDistribution& P,
                                 double gamma, double eps, std::uint64_t budget = kDefaultBudget);

/// 1[x > threshold] or 1[x < threshold].
struct HalfLine {
  double threshold = 0;
  bool above = true;
  double operator()(double x) const { return above ? (x > threshold ? 1.0 : 0.0) : (x < threshold ? 1.0 : 0.0); }
};

struct GaussianRhcReport {
  McEstimate product;
  std::vector<McEstimate> means;
  double rho;            // largest correlation of one step against the rest
  double min_eigenvalue;
  double p;              // (1 - rho^2) / l
  bool condition_met;    // min eigenvalue >= p
  double bound;          // (prod mu)^{l / (1 - rho^2)}
  double bound_std_error;
  bool holds;
};

/// One standard normal per step with the given correlation matrix.
GaussianRhcReport gaussian_rhc_check(const Eigen::MatrixXd& covariance, std::span<const HalfLine> fns,
                                     const MonteCarloOptions& mc = {});

struct GammaDecayReport {
  std::vector<double> tail;      // E[(P^{>=d})^2] for d = 0..deg + 1
  std::vector<double> envelope;  // (1 - gamma)^d
  long holds_up_to;              // largest d with every d' <= d within the envelope; -1 if none
  bool decaying;
};

GammaDecayReport gamma_decay_check(const MultilinearPolynomial& P, double gamma);

}  // namespace sethit
