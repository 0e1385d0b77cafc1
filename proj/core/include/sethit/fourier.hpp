#pragma once

// Fourier analysis of f: Omega^n -> [0, 1] over a product measure pi^n:
// orthonormal bases, coefficients, influences, noise, averaging and
// resilience under restrictions.

#include "sethit/engine.hpp"
#include "sethit/function.hpp"

#include <Eigen/Dense>

namespace sethit {

/// phi_0 = 1, then Gram-Schmidt over symbol indicators in canonical order.
/// Each phi_k (k > 0) vanishes off the support and its first nonzero entry is
/// positive.
class OrthonormalBasis {
 public:
  explicit OrthonormalBasis(MarginalDistribution pi);

  const MarginalDistribution& measure() const noexcept { return pi_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(phi_.rows()); }
  std::size_t symbol_count() const noexcept { return static_cast<std::size_t>(phi_.cols()); }
  double operator()(std::size_t k, std::size_t a) const { return phi_(k, a); }
  /// Rows are basis functions, columns symbols.
  const Eigen::MatrixXd& matrix() const noexcept { return phi_; }
  /// max |E[phi_j phi_k] - delta_jk|.
  double orthonormality_defect() const;

 private:
  MarginalDistribution pi_;
  Eigen::MatrixXd phi_;
};

OrthonormalBasis build_basis(const MarginalDistribution& pi);

struct FourierExpansion {
  OrthonormalBasis basis;
  std::size_t n;
  std::vector<double> coeffs;  // dense in base basis.size(), coordinate 0 least significant

  double coefficient(std::span<const std::size_t> sigma) const;
  std::size_t degree_of(std::uint64_t index) const;
  /// Largest |sigma| with |coefficient| > tol.
  std::size_t degree(double tol = 1e-12) const;
  double squared_norm() const;
};

FourierExpansion analyze(const FunctionSpec& f, const OrthonormalBasis& basis, std::uint64_t budget = kDefaultBudget);
/// Table with values sum_sigma c_sigma phi_sigma(x), clamped into [0, 1].
FunctionSpec synthesize(const FourierExpansion& expansion);

/// Single-step quantities under pi^n. The histogram route applies to
/// anchored_symmetric and mod_linear functions.
Number expectation(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt = {});
Number second_moment(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt = {});
Number variance(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt = {});

/// E[Var[f | all coordinates but i]].
Number influence(const FunctionSpec& f, const MarginalDistribution& pi, std::size_t i, const EngineOptions& opt = {});
std::vector<Number> influences(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt = {});
Number total_influence(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt = {});
/// sum of squared coefficients with sigma_i != 0.
double influence_from_coefficients(const FourierExpansion& expansion, std::size_t i);

struct NoiseResult {
  FunctionSpec averaged;  // per-coordinate rerandomization
  double route_gap;       // max |averaged - coefficient route| on supp(pi)^n
};
NoiseResult noise_operator(const FunctionSpec& f, double rho, const MarginalDistribution& pi,
                           std::uint64_t budget = kDefaultBudget);

/// f^{subset S}(x) = E[f(x_S, X_rest)].
FunctionSpec projection_subset(const FunctionSpec& f, std::span<const std::size_t> S, const MarginalDistribution& pi,
                               std::uint64_t budget = kDefaultBudget);
/// sum of squared coefficients over sigma != 0 with supp(sigma) in S.
double projected_variance_from_coefficients(const FourierExpansion& expansion, std::span<const std::size_t> S);

struct ResilienceResult {
  bool resilient = true;
  std::optional<Restriction> witness;
  Number witness_expectation;
  Number mean;
  std::uint64_t restrictions_checked = 0;
};

/// Checks (1 - eps) E[f] <= E[Rf] <= (1 + eps) E[f] over restrictions of size
/// 0..k to supp(pi) symbols, in order of size, then coordinate set, then
/// symbols. The upper variant only checks the right inequality.
ResilienceResult is_resilient(const FunctionSpec& f, const Number& eps, std::size_t k, const MarginalDistribution& pi,
                              const EngineOptions& opt = {});
ResilienceResult is_upper_resilient(const FunctionSpec& f, const Number& eps, std::size_t k,
                                    const MarginalDistribution& pi, const EngineOptions& opt = {});

/// Calls visit(R) for every restriction of size exactly s in canonical order
/// until it returns false. Returns false if stopped early.
template <class Visit>
bool for_each_restriction(std::size_t n, std::size_t s, std::span<const std::size_t> symbols, Visit&& visit);

double low_degree_max_coefficient(const FunctionSpec& f, std::size_t k, const OrthonormalBasis& basis,
                                  std::uint64_t budget = kDefaultBudget);

struct LocalVarianceCertificate {
  bool passes;
  std::vector<std::size_t> worst_set;
  double worst_variance;
  double threshold;  // alpha(pi)^k (eps mu)^2
};
LocalVarianceCertificate resilience_from_local_variance(const FunctionSpec& f, double eps, std::size_t k,
                                                        const MarginalDistribution& pi,
                                                        std::uint64_t budget = kDefaultBudget);

/// Number of restrictions of size <= k over `symbols` choices per coordinate.
std::uint64_t restriction_count(std::size_t n, std::size_t k, std::size_t symbols);

// ---------------------------------------------------------------------------

template <class Visit>
bool for_each_restriction(std::size_t n, std::size_t s, std::span<const std::size_t> symbols, Visit&& visit) {
  if (s > n) return true;
  std::vector<std::size_t> coords(s);
  for (std::size_t k = 0; k < s; ++k) coords[k] = k;
  for (;;) {
    std::vector<std::size_t> pick(s, 0);
    for (;;) {
      Restriction R = Restriction::none(n);
      for (std::size_t k = 0; k < s; ++k) R.entries[coords[k]] = symbols[pick[k]];
      if (!visit(R)) return false;
      // Last coordinate varies fastest.
      std::size_t k = s;
      while (k > 0 && ++pick[k - 1] == symbols.size()) pick[--k] = 0;
      if (k == 0) break;
    }
    std::size_t k = s;
    while (k > 0 && coords[k - 1] == n - s + k - 1) --k;
    if (k == 0) break;
    ++coords[k - 1];
    for (std::size_t r = k; r < s; ++r) coords[r] = coords[r - 1] + 1;
  }
  return true;
}

}  // namespace sethit
