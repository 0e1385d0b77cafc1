#include "sethit/fourier.hpp"

#include <algorithm>
#include <cmath>

namespace sethit {

// ---------------------------------------------------------------------------
// Dense tensors over Omega^n with axis 0 least significant.

namespace {

template <class T>
struct Tensor {
  std::vector<std::size_t> dims;
  std::vector<T> data;
};

/// Applies the row-major matrix A (out x in) along `axis`.
template <class T>
void apply_axis(Tensor<T>& t, std::size_t axis, const std::vector<T>& A, std::size_t out) {
  std::size_t in = t.dims[axis];
  std::size_t inner = 1, outer = 1;
  for (std::size_t k = 0; k < axis; ++k) inner *= t.dims[k];
  for (std::size_t k = axis + 1; k < t.dims.size(); ++k) outer *= t.dims[k];
  std::vector<T> next(inner * out * outer, T(0));
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t b = 0; b < out; ++b)
      for (std::size_t a = 0; a < in; ++a) {
        const T& coef = A[b * in + a];
        if (coef == 0) continue;
        const T* src = &t.data[inner * (a + in * o)];
        T* dst = &next[inner * (b + out * o)];
        for (std::size_t r = 0; r < inner; ++r) dst[r] += coef * src[r];
      }
  t.data = std::move(next);
  t.dims[axis] = out;
}

template <class T>
Tensor<T> function_tensor(const FunctionSpec& f, std::uint64_t budget) {
  return {std::vector<std::size_t>(f.n(), f.symbol_count()), f.tabulate<T>(budget)};
}

/// Row vector pi as a 1 x m matrix.
template <class T>
std::vector<T> expectation_row(const MarginalDistribution& pi) {
  return pi.values<T>();
}

/// m x m matrix 1 pi^T: replaces a coordinate by its average.
template <class T>
std::vector<T> averaging_matrix(const MarginalDistribution& pi) {
  std::size_t m = pi.size();
  const auto& p = pi.values<T>();
  std::vector<T> A(m * m);
  for (std::size_t b = 0; b < m; ++b)
    for (std::size_t a = 0; a < m; ++a) A[b * m + a] = p[a];
  return A;
}

template <class T>
T full_expectation(Tensor<T> t, const MarginalDistribution& pi) {
  auto row = expectation_row<T>(pi);
  for (std::size_t axis = 0; axis < t.dims.size(); ++axis)
    if (t.dims[axis] == row.size()) apply_axis(t, axis, row, 1);
  return t.data[0];
}

bool use_exact(const FunctionSpec& f, const MarginalDistribution& pi) { return f.exact() && pi.exact(); }

void check_alphabet(const FunctionSpec& f, const MarginalDistribution& pi) {
  if (f.alphabet() != pi.alphabet()) throw ValidationError("function alphabet does not match the measure");
}

bool prefer_table(const FunctionSpec& f, const EngineOptions& opt) {
  if (opt.engine == Engine::enumerate) return true;
  if (opt.engine == Engine::dp) {
    if (!f.histogram_compatible()) throw ValidationError("histogram route needs anchored_symmetric or mod_linear");
    return false;
  }
  if (!f.histogram_compatible()) return true;
  // Small tables are cheaper than spinning up the DP.
  try {
    return checked_power(f.symbol_count(), f.n(), std::min<std::uint64_t>(opt.budget, 4096)) > 0;
  } catch (const BudgetError&) {
    return false;
  }
}

StepDistribution as_one_step(const MarginalDistribution& pi) {
  if (pi.exact()) return StepDistribution(pi.alphabet(), 1, pi.exact_probs());
  return StepDistribution(pi.alphabet(), 1, pi.probs());
}

StepDistribution diagonal_coupling(const MarginalDistribution& pi) {
  std::size_t m = pi.size();
  if (pi.exact()) {
    std::vector<Rational> w(m * m, Rational(0));
    for (std::size_t a = 0; a < m; ++a) w[a + m * a] = pi.exact_probs()[a];
    return StepDistribution(pi.alphabet(), 2, std::move(w));
  }
  std::vector<double> w(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a) w[a + m * a] = pi.prob(a);
  return StepDistribution(pi.alphabet(), 2, std::move(w));
}

}  // namespace

// ---------------------------------------------------------------------------
// Basis

OrthonormalBasis::OrthonormalBasis(MarginalDistribution pi) : pi_(std::move(pi)) {
  std::size_t m = pi_.size();
  auto support = pi_.support();
  auto inner = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    double s = 0;
    for (auto a : support) s += pi_.prob(a) * u(a) * v(a);
    return s;
  };
  std::vector<Eigen::VectorXd> rows;
  rows.push_back(Eigen::VectorXd::Ones(m));
  for (auto a : support) {
    if (rows.size() == support.size()) break;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    v(a) = 1.0;
    for (const auto& r : rows) v -= inner(v, r) * r;
    double norm = std::sqrt(std::max(inner(v, v), 0.0));
    if (norm < 1e-12) continue;
    v /= norm;
    for (std::size_t b = 0; b < m; ++b)
      if (!(pi_.prob(b) > 0)) v(b) = 0.0;
    for (auto b : support)
      if (std::abs(v(b)) > 1e-14) {
        if (v(b) < 0) v = -v;
        break;
      }
    rows.push_back(v);
  }
  phi_.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < rows.size(); ++k) phi_.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
}

double OrthonormalBasis::orthonormality_defect() const {
  double worst = 0;
  for (std::size_t j = 0; j < size(); ++j)
    for (std::size_t k = 0; k < size(); ++k) {
      double s = 0;
      for (std::size_t a = 0; a < symbol_count(); ++a) s += pi_.prob(a) * phi_(j, a) * phi_(k, a);
      worst = std::max(worst, std::abs(s - (j == k ? 1.0 : 0.0)));
    }
  return worst;
}

OrthonormalBasis build_basis(const MarginalDistribution& pi) { return OrthonormalBasis(pi); }

// ---------------------------------------------------------------------------
// Expansion

double FourierExpansion::coefficient(std::span<const std::size_t> sigma) const {
  if (sigma.size() != n) throw ValidationError("multi-index has the wrong length");
  for (auto s : sigma)
    if (s >= basis.size()) throw ValidationError("multi-index entry out of range");
  return coeffs[encode_mixed_radix(sigma, basis.size())];
}

std::size_t FourierExpansion::degree_of(std::uint64_t index) const {
  std::size_t d = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (index % basis.size() != 0) ++d;
    index /= basis.size();
  }
  return d;
}

std::size_t FourierExpansion::degree(double tol) const {
  std::size_t d = 0;
  for (std::uint64_t idx = 0; idx < coeffs.size(); ++idx)
    if (std::abs(coeffs[idx]) > tol) d = std::max(d, degree_of(idx));
  return d;
}

double FourierExpansion::squared_norm() const {
  std::vector<double> sq(coeffs.size());
  for (std::size_t k = 0; k < coeffs.size(); ++k) sq[k] = coeffs[k] * coeffs[k];
  return pairwise_sum(sq);
}

FourierExpansion analyze(const FunctionSpec& f, const OrthonormalBasis& basis, std::uint64_t budget) {
  check_alphabet(f, basis.measure());
  std::size_t m = f.symbol_count(), k = basis.size();
  std::vector<double> B(k * m);
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t a = 0; a < m; ++a) B[s * m + a] = basis.measure().prob(a) * basis(s, a);
  auto t = function_tensor<double>(f, budget);
  for (std::size_t axis = 0; axis < f.n(); ++axis) apply_axis(t, axis, B, k);
  return FourierExpansion{basis, f.n(), std::move(t.data)};
}

FunctionSpec synthesize(const FourierExpansion& e) {
  std::size_t m = e.basis.symbol_count(), k = e.basis.size();
  std::vector<double> A(m * k);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t s = 0; s < k; ++s) A[a * k + s] = e.basis(s, a);
  Tensor<double> t{std::vector<std::size_t>(e.n, k), e.coeffs};
  for (std::size_t axis = 0; axis < e.n; ++axis) apply_axis(t, axis, A, m);
  for (auto& v : t.data) v = std::clamp(v, 0.0, 1.0);
  return FunctionSpec::table(e.basis.measure().alphabet(), e.n, std::move(t.data));
}

// ---------------------------------------------------------------------------
// Moments and influences

Number expectation(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt) {
  check_alphabet(f, pi);
  if (f.trivially_zero()) return pi.exact() ? Number(Rational(0)) : Number(0.0);
  if (prefer_table(f, opt)) {
    if (use_exact(f, pi)) return Number(full_expectation(function_tensor<Rational>(f, opt.budget), pi));
    return Number(full_expectation(function_tensor<double>(f, opt.budget), pi));
  }
  auto P = as_one_step(pi);
  std::vector<FunctionSpec> fns{f};
  return histogram_expectation(P, fns, opt.budget);
}

Number second_moment(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt) {
  if (f.indicator()) return expectation(f, pi, opt);
  check_alphabet(f, pi);
  if (use_exact(f, pi)) {
    auto t = function_tensor<Rational>(f, opt.budget);
    for (auto& v : t.data) v *= v;
    return Number(full_expectation(std::move(t), pi));
  }
  auto t = function_tensor<double>(f, opt.budget);
  for (auto& v : t.data) v *= v;
  return Number(full_expectation(std::move(t), pi));
}

Number variance(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt) {
  Number mean = expectation(f, pi, opt);
  return second_moment(f, pi, opt) - mean * mean;
}

namespace {

template <class T>
T table_influence(const FunctionSpec& f, const MarginalDistribution& pi, std::size_t i, std::uint64_t budget) {
  auto row = expectation_row<T>(pi);
  auto t = function_tensor<T>(f, budget);
  auto sq = t;
  for (auto& v : sq.data) v *= v;
  apply_axis(t, i, row, 1);
  apply_axis(sq, i, row, 1);
  for (std::size_t k = 0; k < t.data.size(); ++k) sq.data[k] -= t.data[k] * t.data[k];
  return full_expectation(std::move(sq), pi);
}

Number histogram_influence(const FunctionSpec& f, const MarginalDistribution& pi, std::size_t i,
                           const EngineOptions& opt) {
  // For an indicator, Inf_i = sum_a pi(a) E[f_a] - sum_{a,b} pi(a) pi(b) E[f_a f_b]
  // with f_a the restriction x_i := a.
  auto support = pi.support();
  std::vector<FunctionSpec> fa;
  for (auto a : support) {
    Restriction R = Restriction::none(f.n());
    R.entries[i] = a;
    fa.push_back(restrict(f, R));
  }
  auto P1 = as_one_step(pi);
  auto P2 = diagonal_coupling(pi);
  Number first = pi.exact() ? Number(Rational(0)) : Number(0.0);
  Number second = first;
  for (std::size_t s = 0; s < support.size(); ++s) {
    std::vector<FunctionSpec> one{fa[s]};
    first = first + pi.prob_number(support[s]) * histogram_expectation(P1, one, opt.budget);
    for (std::size_t r = 0; r < support.size(); ++r) {
      std::vector<FunctionSpec> two{fa[s], fa[r]};
      second = second + pi.prob_number(support[s]) * pi.prob_number(support[r]) *
                            histogram_expectation(P2, two, opt.budget);
    }
  }
  return first - second;
}

}  // namespace

Number influence(const FunctionSpec& f, const MarginalDistribution& pi, std::size_t i, const EngineOptions& opt) {
  check_alphabet(f, pi);
  if (i >= f.n()) throw ValidationError("coordinate out of range");
  if (prefer_table(f, opt)) {
    if (use_exact(f, pi)) return Number(table_influence<Rational>(f, pi, i, opt.budget));
    return Number(table_influence<double>(f, pi, i, opt.budget));
  }
  return histogram_influence(f, pi, i, opt);
}

std::vector<Number> influences(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt) {
  std::vector<Number> out;
  for (std::size_t i = 0; i < f.n(); ++i) out.push_back(influence(f, pi, i, opt));
  return out;
}

Number total_influence(const FunctionSpec& f, const MarginalDistribution& pi, const EngineOptions& opt) {
  auto inf = influences(f, pi, opt);
  Number total = inf[0];
  for (std::size_t i = 1; i < inf.size(); ++i) total = total + inf[i];
  return total;
}

double influence_from_coefficients(const FourierExpansion& e, std::size_t i) {
  std::uint64_t k = e.basis.size(), stride = 1;
  for (std::size_t c = 0; c < i; ++c) stride *= k;
  std::vector<double> sq;
  for (std::uint64_t idx = 0; idx < e.coeffs.size(); ++idx)
    if ((idx / stride) % k != 0) sq.push_back(e.coeffs[idx] * e.coeffs[idx]);
  return pairwise_sum(sq);
}

// ---------------------------------------------------------------------------
// Noise and averaging

NoiseResult noise_operator(const FunctionSpec& f, double rho, const MarginalDistribution& pi, std::uint64_t budget) {
  check_alphabet(f, pi);
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("noise rate must lie in [0, 1]");
  std::size_t m = f.symbol_count();
  std::vector<double> N(m * m);
  for (std::size_t b = 0; b < m; ++b)
    for (std::size_t a = 0; a < m; ++a) N[b * m + a] = (a == b ? rho : 0.0) + (1 - rho) * pi.prob(a);
  auto t = function_tensor<double>(f, budget);
  for (std::size_t axis = 0; axis < f.n(); ++axis) apply_axis(t, axis, N, m);
  for (auto& v : t.data) v = std::clamp(v, 0.0, 1.0);

  auto e = analyze(f, build_basis(pi), budget);
  for (std::uint64_t idx = 0; idx < e.coeffs.size(); ++idx)
    e.coeffs[idx] *= std::pow(rho, static_cast<double>(e.degree_of(idx)));
  auto viaCoeffs = synthesize(e);

  double gap = 0;
  auto support = pi.support();
  std::vector<std::size_t> pick(f.n(), 0), x(f.n());
  do {
    for (std::size_t c = 0; c < f.n(); ++c) x[c] = support[pick[c]];
    std::uint64_t idx = encode_mixed_radix(x, m);
    gap = std::max(gap, std::abs(t.data[idx] - viaCoeffs.table_data().values[idx]));
  } while (next_tuple(pick, support.size()));
  return {FunctionSpec::table(f.alphabet(), f.n(), std::move(t.data)), gap};
}

FunctionSpec projection_subset(const FunctionSpec& f, std::span<const std::size_t> S, const MarginalDistribution& pi,
                               std::uint64_t budget) {
  check_alphabet(f, pi);
  std::vector<bool> keep(f.n(), false);
  for (auto c : S) {
    if (c >= f.n()) throw ValidationError("coordinate out of range");
    keep[c] = true;
  }
  std::size_t m = f.symbol_count();
  if (use_exact(f, pi)) {
    auto A = averaging_matrix<Rational>(pi);
    auto t = function_tensor<Rational>(f, budget);
    for (std::size_t axis = 0; axis < f.n(); ++axis)
      if (!keep[axis]) apply_axis(t, axis, A, m);
    return FunctionSpec::table(f.alphabet(), f.n(), std::move(t.data));
  }
  auto A = averaging_matrix<double>(pi);
  auto t = function_tensor<double>(f, budget);
  for (std::size_t axis = 0; axis < f.n(); ++axis)
    if (!keep[axis]) apply_axis(t, axis, A, m);
  for (auto& v : t.data) v = std::clamp(v, 0.0, 1.0);
  return FunctionSpec::table(f.alphabet(), f.n(), std::move(t.data));
}

double projected_variance_from_coefficients(const FourierExpansion& e, std::span<const std::size_t> S) {
  std::vector<bool> keep(e.n, false);
  for (auto c : S) keep.at(c) = true;
  std::uint64_t k = e.basis.size();
  std::vector<double> sq;
  for (std::uint64_t idx = 1; idx < e.coeffs.size(); ++idx) {
    std::uint64_t rest = idx;
    bool inside = true;
    for (std::size_t c = 0; c < e.n && inside; ++c) {
      inside = keep[c] || rest % k == 0;
      rest /= k;
    }
    if (inside) sq.push_back(e.coeffs[idx] * e.coeffs[idx]);
  }
  return pairwise_sum(sq);
}

// ---------------------------------------------------------------------------
// Resilience

std::uint64_t restriction_count(std::size_t n, std::size_t k, std::size_t symbols) {
  BigInt total = 0;
  for (std::size_t s = 0; s <= std::min(k, n); ++s)
    total += binomial(static_cast<unsigned>(n), static_cast<unsigned>(s)) *
             boost::multiprecision::pow(BigInt(symbols), static_cast<unsigned>(s));
  if (total > BigInt(std::numeric_limits<std::uint64_t>::max())) return std::numeric_limits<std::uint64_t>::max();
  return total.convert_to<std::uint64_t>();
}

namespace {

Number exactify(const Number& eps, bool want_exact) {
  if (!want_exact || eps.exact()) return eps;
  return Number(exact_from_double(eps.value()));
}

ResilienceResult resilience_search(const FunctionSpec& f, const Number& eps_in, std::size_t k,
                                   const MarginalDistribution& pi, const EngineOptions& opt, bool lower) {
  check_alphabet(f, pi);
  if (k > f.n()) throw ValidationError("restriction size exceeds n");
  auto symbols = pi.support();
  if (restriction_count(f.n(), k, symbols.size()) > opt.budget)
    throw BudgetError("resilience search space exceeds budget");

  ResilienceResult res;
  res.mean = expectation(f, pi, opt);
  Number eps = exactify(eps_in, res.mean.exact());
  Number one = res.mean.exact() ? Number(Rational(1)) : Number(1.0);
  Number hi = (one + eps) * res.mean;
  Number lo = (one - eps) * res.mean;

  for (std::size_t s = 0; s <= k && res.resilient; ++s) {
    for_each_restriction(f.n(), s, symbols, [&](const Restriction& R) {
      ++res.restrictions_checked;
      Number v = expectation(restrict(f, R), pi, opt);
      bool ok = leq_with_slack(v, hi) && (!lower || leq_with_slack(lo, v));
      if (!ok) {
        res.resilient = false;
        res.witness = R;
        res.witness_expectation = v;
      }
      return ok;
    });
  }
  return res;
}

}  // namespace

ResilienceResult is_resilient(const FunctionSpec& f, const Number& eps, std::size_t k, const MarginalDistribution& pi,
                              const EngineOptions& opt) {
  return resilience_search(f, eps, k, pi, opt, true);
}

ResilienceResult is_upper_resilient(const FunctionSpec& f, const Number& eps, std::size_t k,
                                    const MarginalDistribution& pi, const EngineOptions& opt) {
  return resilience_search(f, eps, k, pi, opt, false);
}

double low_degree_max_coefficient(const FunctionSpec& f, std::size_t k, const OrthonormalBasis& basis,
                                  std::uint64_t budget) {
  auto e = analyze(f, basis, budget);
  double best = 0;
  for (std::uint64_t idx = 1; idx < e.coeffs.size(); ++idx) {
    auto d = e.degree_of(idx);
    if (d >= 1 && d <= k) best = std::max(best, std::abs(e.coeffs[idx]));
  }
  return best;
}

LocalVarianceCertificate resilience_from_local_variance(const FunctionSpec& f, double eps, std::size_t k,
                                                        const MarginalDistribution& pi, std::uint64_t budget) {
  check_alphabet(f, pi);
  if (k > f.n()) throw ValidationError("set size exceeds n");
  double a = pi.min_support_prob().value();
  double mu = expectation(f, pi, {Engine::enumerate, budget, 1}).value();
  LocalVarianceCertificate cert{true, {}, 0.0, std::pow(a, static_cast<double>(k)) * (eps * mu) * (eps * mu)};
  std::vector<std::size_t> S(k);
  for (std::size_t r = 0; r < k; ++r) S[r] = r;
  bool first = true;
  for (;;) {
    auto g = projection_subset(f, S, pi, budget);
    double v = variance(g, pi, {Engine::enumerate, budget, 1}).value();
    if (first || v > cert.worst_variance) {
      first = false;
      cert.worst_variance = v;
      cert.worst_set = S;
    }
    if (v > cert.threshold) cert.passes = false;
    std::size_t r = k;
    while (r > 0 && S[r - 1] == f.n() - k + r - 1) --r;
    if (r == 0) break;
    ++S[r - 1];
    for (std::size_t q = r; q < k; ++q) S[q] = S[q - 1] + 1;
  }
  return cert;
}

}  // namespace sethit
