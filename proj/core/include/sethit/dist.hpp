#pragma once

// Finite l-step distributions P over Omega^l and the quantities built from
// them: marginals, alpha, beta, double-sample kernels and the correlation rho.
//
// Step and symbol indices are 0-based throughout the C++ API. Tables are laid
// out in mixed radix with step 0 as the least significant digit.

#include "sethit/numeric.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sethit {

class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<std::string> symbols);
  /// Symbols "0", "1", ..., "m-1".
  static Alphabet range(std::size_t m);

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::string& symbol(std::size_t a) const { return symbols_.at(a); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  std::optional<std::size_t> find(std::string_view token) const;
  std::size_t index_of(std::string_view token) const;

  /// Alphabet made of the listed symbols, in the given order.
  Alphabet subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

 private:
  std::vector<std::string> symbols_;
};

class MarginalDistribution {
 public:
  MarginalDistribution(Alphabet alphabet, std::vector<Rational> probs);
  MarginalDistribution(Alphabet alphabet, std::vector<double> probs);
  static MarginalDistribution uniform(Alphabet alphabet);

  const Alphabet& alphabet() const noexcept { return alphabet_; }
  std::size_t size() const noexcept { return probs_.size(); }
  bool exact() const noexcept { return exact_.has_value(); }
  const std::vector<double>& probs() const noexcept { return probs_; }
  const std::vector<Rational>& exact_probs() const;
  double prob(std::size_t a) const { return probs_.at(a); }
  Number prob_number(std::size_t a) const;

  template <class T>
  const std::vector<T>& values() const;

  /// Symbols with strictly positive probability, ascending.
  std::vector<std::size_t> support() const;
  /// min over the support of pi(x).
  Number min_support_prob() const;

 private:
  Alphabet alphabet_;
  std::vector<double> probs_;
  std::optional<std::vector<Rational>> exact_;
};

template <>
inline const std::vector<double>& MarginalDistribution::values<double>() const { return probs_; }
template <>
inline const std::vector<Rational>& MarginalDistribution::values<Rational>() const { return exact_probs(); }

class StepDistribution {
 public:
  StepDistribution(Alphabet alphabet, std::size_t steps, std::vector<Rational> weights, std::string name = {});
  StepDistribution(Alphabet alphabet, std::size_t steps, std::vector<double> weights, std::string name = {});

  const Alphabet& alphabet() const noexcept { return alphabet_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t symbol_count() const noexcept { return alphabet_.size(); }
  std::size_t size() const noexcept { return weights_.size(); }
  bool exact() const noexcept { return exact_.has_value(); }
  const std::string& name() const noexcept { return name_; }

  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Rational>& exact_weights() const;
  double weight(std::uint64_t index) const { return weights_.at(index); }
  Number weight_number(std::uint64_t index) const;

  template <class T>
  const std::vector<T>& values() const;

  std::vector<std::size_t> tuple(std::uint64_t index) const;
  std::uint64_t index(std::span<const std::size_t> symbols) const;

  /// Indices of strictly positive entries, ascending.
  const std::vector<std::uint64_t>& support() const noexcept { return support_; }

  /// Joint law of the listed steps (in the listed order).
  StepDistribution project(std::span<const std::size_t> steps) const;

  /// Same weights, recast as binary floats.
  StepDistribution to_float() const;

 private:
  void validate();

  Alphabet alphabet_;
  std::size_t steps_;
  std::vector<double> weights_;
  std::optional<std::vector<Rational>> exact_;
  std::vector<std::uint64_t> support_;
  std::string name_;
};

template <>
inline const std::vector<double>& StepDistribution::values<double>() const { return weights_; }
template <>
inline const std::vector<Rational>& StepDistribution::values<Rational>() const { return exact_weights(); }

/// Row-stochastic kernel K(y, z) on the support of its stationary law.
class MarkovKernel {
 public:
  MarkovKernel(Alphabet alphabet, Eigen::MatrixXd rows, MarginalDistribution stationary);

  const Alphabet& alphabet() const noexcept { return alphabet_; }
  const Eigen::MatrixXd& rows() const noexcept { return rows_; }
  const MarginalDistribution& stationary() const noexcept { return stationary_; }
  double operator()(std::size_t y, std::size_t z) const { return rows_(y, z); }

  /// max |pi(y)K(y,z) - pi(z)K(z,y)|.
  double reversibility_defect() const;
  bool reversible(double tol = 1e-10) const { return reversibility_defect() <= tol; }

 private:
  Alphabet alphabet_;
  Eigen::MatrixXd rows_;
  MarginalDistribution stationary_;
};

inline constexpr double kStructuralTol = 1e-10;
inline constexpr double kAgreementTol = 1e-8;

MarginalDistribution marginal(const StepDistribution& P, std::size_t step);
bool equal_marginals(const StepDistribution& P, double tol = 1e-12);

/// min over symbols in the union of marginal supports of P(x, ..., x).
Number alpha(const StepDistribution& P);
/// min of P over the product of the per-step marginal supports.
Number beta(const StepDistribution& P);

/// Joint law of (Y, Z) for a double sample on `step`, over the full alphabet.
/// Entry y + m*z is sum over the other steps of P(x, y) P(x, z) / P(x).
template <class T>
std::vector<T> double_sample_joint(const StepDistribution& P, std::size_t step);

MarkovKernel double_sample_kernel(const StepDistribution& P, std::size_t step);
double kernel_second_eigenvalue(const MarkovKernel& K);

/// rho(P, S, T) as the second singular value of the normalized joint table.
double maximal_correlation(const StepDistribution& P, std::span<const std::size_t> S,
                           std::span<const std::size_t> T);

/// sqrt(lambda_2) of each step's double-sample kernel.
std::vector<double> rho_per_step(const StepDistribution& P);
double rho(const StepDistribution& P);
/// Same quantity through maximal_correlation(P, {j}, rest).
double rho_via_svd(const StepDistribution& P);

struct MarkovCheck {
  bool generated = false;
  /// transitions[j] is the matrix Pr[X^(j+1) = z | X^(j) = y]; rows of symbols
  /// with zero mass at step j are left zero.
  std::vector<Eigen::MatrixXd> transitions;
};
MarkovCheck is_markov_generated(const StepDistribution& P, double tol = 1e-12);

struct EdgeVarianceReport {
  Number lhs;  // E[(f(Y) - f(Z))^2]
  double rhs;  // 2 (1 - rho^2) Var[f(Y)]
  Number variance;
  double rho;
  bool holds;
};
EdgeVarianceReport check_edge_variance(const StepDistribution& P, std::size_t step, std::span<const double> f);
EdgeVarianceReport check_edge_variance(const StepDistribution& P, std::size_t step, std::span<const Rational> f);

}  // namespace sethit
