#pragma once

// Hitting expectations E[prod_j f_j(X^(j))], the restriction loop that makes
// a function resilient, the loop that drives all influences below tau, and
// the explicit bounds and counterexample suites around them.

#include "sethit/engine.hpp"
#include "sethit/fourier.hpp"

namespace sethit {

/// E[prod_j f(X^(j))] with the same f on every step.
Number same_set_expectation(const StepDistribution& P, const FunctionSpec& f, const EngineOptions& opt = {});
/// One function per step; all share n and the alphabet of P.
Number multi_set_expectation(const StepDistribution& P, std::span<const FunctionSpec> fns,
                             const EngineOptions& opt = {});

struct IncrementStep {
  Restriction restriction;
  Number before;
  Number after;
};

struct DensityIncrementResult {
  FunctionSpec g;
  Restriction total;
  std::vector<IncrementStep> steps;
  Number mu;
  Number final_mean;
  Number eps_prime;                 // alpha(P)^k eps
  std::uint64_t iteration_bound;    // ceil(2 ln(1/mu) / eps')
  double loss_bound;                // exp(-2 ln(1/mu) / (alpha^{2k} eps))
  Number restriction_loss;          // alpha^{|R|}
  bool resilient = false;           // re-checked with is_resilient(g, eps, k)
  std::optional<Number> product_f;  // E[prod f], when it fits the budget
  std::optional<Number> product_g;
  bool loss_certified = true;       // product_f >= restriction_loss * product_g
};

/// Repeatedly applies the first restriction of size <= k (canonical order)
/// with E[Rf] > (1 + eps') E[f] until none is left.
DensityIncrementResult density_increment(const StepDistribution& P, const FunctionSpec& f, const Number& eps,
                                         std::size_t k, const EngineOptions& opt = {});

struct MaxGainReport {
  Number averaged;  // sum_{y,z} q(y,z) E[M[i,y,z] f]
  Number mean;
  Number influence;
  Number gain;      // averaged - mean
  double rho;
  double bound;     // influence (1 - rho^2)
  bool exact = false;
  bool holds = false;
};

/// Averages the max operator over the double sample on `step`.
MaxGainReport max_gain_check(const StepDistribution& P, std::size_t step, std::size_t i, const FunctionSpec& f,
                             const EngineOptions& opt = {});

struct ReductionStep {
  std::size_t step;                  // j*
  std::size_t coordinate;            // i
  std::vector<std::size_t> others;   // x^(j) for j != j*, in step order
  std::size_t y;
  std::size_t z;
  Number influence;
  std::vector<Number> before;
  std::vector<Number> after;
  Number gain;
  Number floor_y;                    // P(x, y)
  Number floor_z;                    // P(x, z)
  Number product_before;
  Number product_after;
  bool gain_ok = false;
  bool floor_ok = false;
  bool product_ok = false;
  MaxGainReport max_gain;
};

struct InfluenceReductionResult {
  std::vector<FunctionSpec> g;
  std::vector<ReductionStep> steps;
  double rho;
  double tau;
  double gain_target;                // tau (1 - rho^2) / 2
  double beta_hat;                   // tau (1 - rho^2) / (2 l |Omega|^{l+1})
  std::uint64_t iteration_bound;     // floor(2 l / (tau (1 - rho^2)))
  Number max_influence;
  bool stalled = false;              // no qualifying triple was found
  bool certified() const;
};

/// Throws RefusalError when rho(P) >= 1.
InfluenceReductionResult influence_reduction(const StepDistribution& P, std::span<const FunctionSpec> fns, double tau,
                                             const EngineOptions& opt = {});

struct LowInfluenceBound {
  double lower_bound;  // (prod mu)^{l / (1 - rho^2)} - eps
  double tau;
  double log_tau;
};

LowInfluenceBound low_influence_bound(std::span<const double> mus, double rho, std::size_t ell, double eps,
                                      double alpha, double C = 10.0);

struct ExplicitCBound {
  double value;        // 1 / exp(exp(exp(u)))
  double u;            // (1/mu)^D
  double log_inverse;  // exp(exp(u)), may be +inf
  bool underflow;
};

ExplicitCBound explicit_c_bound(double alpha, double rho, std::size_t ell, double mu, double D);

struct UnequalMarginalsRow {
  std::size_t n;
  Number product;     // E[f(X^(1)) f(X^(2))]
  Number mu1;         // E[f(X^(1))]
  Number mu2;         // E[f(X^(2))]
  Number first_set;   // E[1_{S1}(X^(1))]
  Number normalized;  // product / min(mu1, mu2)^2
};

struct UnequalMarginalsReport {
  std::vector<UnequalMarginalsRow> rows;
  double decay_rate;  // least-squares slope of ln(normalized) against n
  bool strictly_decreasing = false;
};

/// P uniform on {00, 01, 11}; f the indicator of
/// {x_1 = 1, |wt - n/3| <= n/100} union {x_1 = 0, |wt - 2n/3| <= n/100}.
StepDistribution staircase_distribution();
FunctionSpec unequal_marginals_set(std::size_t n, bool first_only = false);
UnequalMarginalsReport counterexample_unequal_marginals(std::span<const std::size_t> n_list,
                                                        const EngineOptions& opt = {});

struct ThreeSetsReport {
  std::size_t n;
  Number product;
  std::vector<Number> measures;
  std::vector<Number> max_influence;
  bool product_zero = false;
};

/// Uniform on {000, 111, 222, 012, 120, 201}.
StepDistribution ap3_distribution();
/// Fewer than n/3 twos, ones, zeros for steps 0, 1, 2.
std::vector<FunctionSpec> three_sets(std::size_t n);
ThreeSetsReport counterexample_three_sets(std::size_t n, const EngineOptions& opt = {});

struct MarkovSameSetReport {
  FunctionSpec g;
  Number lhs;  // E[prod_{j<=l} f]
  Number rhs;  // E[(prod_{j<=l-2} f) g(X^(l-1))]
  bool identity_holds = false;
  bool dominated = false;  // g <= f pointwise
};

/// g(x) = f(x) E[f(X^(l)) | X^(l-1) = x]. Throws ValidationError when P is not
/// Markov-generated.
MarkovSameSetReport markov_same_set_check(const StepDistribution& P, const FunctionSpec& f,
                                          const EngineOptions& opt = {});

/// Indicators 1[#symbol >= t] for t = 0..n.
struct ThresholdFamily {
  std::size_t n = 30;
  std::size_t symbol = 0;
};

struct ExponentFit {
  std::vector<double> mu;     // achieved measures
  std::vector<double> delta;  // same-set expectations
  std::vector<std::size_t> thresholds;
  std::vector<double> residuals;
  double slope;
  double intercept;
};

/// Least-squares fit of ln delta against ln mu for two-step symmetric P.
ExponentFit estimate_hitting_exponent(const StepDistribution& P, std::span<const double> mu_grid,
                                      const ThresholdFamily& family = {}, const EngineOptions& opt = {});

}  // namespace sethit
