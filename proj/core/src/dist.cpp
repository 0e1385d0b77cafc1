#include "sethit/dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace sethit {

// ---------------------------------------------------------------------------
// Alphabet

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw ValidationError("alphabet must be non-empty");
  std::unordered_set<std::string> seen;
  for (const auto& s : symbols_) {
    if (s.empty()) throw ValidationError("alphabet symbols must be non-empty tokens");
    if (!seen.insert(s).second) throw ValidationError("duplicate alphabet symbol '" + s + "'");
  }
}

Alphabet Alphabet::range(std::size_t m) {
  std::vector<std::string> s;
  for (std::size_t a = 0; a < m; ++a) s.push_back(std::to_string(a));
  return Alphabet(std::move(s));
}

std::optional<std::size_t> Alphabet::find(std::string_view token) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), token);
  if (it == symbols_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - symbols_.begin());
}

std::size_t Alphabet::index_of(std::string_view token) const {
  if (auto a = find(token)) return *a;
  throw ValidationError("symbol '" + std::string(token) + "' is not in the alphabet");
}

Alphabet Alphabet::subset(std::span<const std::size_t> indices) const {
  std::vector<std::string> s;
  for (auto a : indices) s.push_back(symbol(a));
  return Alphabet(std::move(s));
}

// ---------------------------------------------------------------------------
// MarginalDistribution

namespace {

template <class T>
void check_probability_vector(const std::vector<T>& p) {
  T total = 0;
  for (const auto& x : p) {
    if (x < 0) throw ValidationError("negative probability");
    total += x;
  }
  if constexpr (std::is_same_v<T, Rational>) {
    if (total != 1) throw NormalizationError("probabilities sum to " + to_string(total) + ", not 1");
  } else {
    if (!std::isfinite(total) || std::abs(total - 1.0) > 1e-12)
      throw NormalizationError("probabilities sum to " + std::to_string(total) + ", not 1");
  }
}

std::vector<double> to_doubles(const std::vector<Rational>& q) {
  std::vector<double> d(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) d[i] = to_double(q[i]);
  return d;
}

}  // namespace

MarginalDistribution::MarginalDistribution(Alphabet alphabet, std::vector<Rational> probs)
    : alphabet_(std::move(alphabet)), probs_(to_doubles(probs)), exact_(std::move(probs)) {
  if (exact_->size() != alphabet_.size()) throw ValidationError("marginal size does not match alphabet");
  check_probability_vector(*exact_);
}

MarginalDistribution::MarginalDistribution(Alphabet alphabet, std::vector<double> probs)
    : alphabet_(std::move(alphabet)), probs_(std::move(probs)) {
  if (probs_.size() != alphabet_.size()) throw ValidationError("marginal size does not match alphabet");
  check_probability_vector(probs_);
}

MarginalDistribution MarginalDistribution::uniform(Alphabet alphabet) {
  std::size_t m = alphabet.size();
  return MarginalDistribution(std::move(alphabet), std::vector<Rational>(m, Rational(1, static_cast<long>(m))));
}

const std::vector<Rational>& MarginalDistribution::exact_probs() const {
  if (!exact_) throw Error("marginal has float weights");
  return *exact_;
}

Number MarginalDistribution::prob_number(std::size_t a) const {
  if (exact_) return Number((*exact_).at(a));
  return Number(probs_.at(a));
}

std::vector<std::size_t> MarginalDistribution::support() const {
  std::vector<std::size_t> s;
  for (std::size_t a = 0; a < probs_.size(); ++a)
    if (exact_ ? (*exact_)[a] > 0 : probs_[a] > 0) s.push_back(a);
  return s;
}

Number MarginalDistribution::min_support_prob() const {
  auto s = support();
  if (exact_) {
    Rational m = (*exact_)[s.front()];
    for (auto a : s) m = std::min(m, (*exact_)[a]);
    return Number(m);
  }
  double m = probs_[s.front()];
  for (auto a : s) m = std::min(m, probs_[a]);
  return Number(m);
}

// ---------------------------------------------------------------------------
// StepDistribution

StepDistribution::StepDistribution(Alphabet alphabet, std::size_t steps, std::vector<Rational> weights,
                                   std::string name)
    : alphabet_(std::move(alphabet)), steps_(steps), weights_(to_doubles(weights)), exact_(std::move(weights)),
      name_(std::move(name)) {
  validate();
}

StepDistribution::StepDistribution(Alphabet alphabet, std::size_t steps, std::vector<double> weights,
                                   std::string name)
    : alphabet_(std::move(alphabet)), steps_(steps), weights_(std::move(weights)), name_(std::move(name)) {
  validate();
}

void StepDistribution::validate() {
  if (steps_ < 1) throw ValidationError("a distribution needs at least one step");
  auto expected = checked_power(alphabet_.size(), steps_, kDefaultBudget);
  if (weights_.size() != expected)
    throw ValidationError("weight table has " + std::to_string(weights_.size()) + " entries, expected " +
                          std::to_string(expected));
  if (exact_) {
    check_probability_vector(*exact_);
  } else {
    for (double w : weights_)
      if (!std::isfinite(w)) throw ValidationError("non-finite weight");
    check_probability_vector(weights_);
  }
  support_.clear();
  for (std::uint64_t i = 0; i < weights_.size(); ++i)
    if (exact_ ? (*exact_)[i] > 0 : weights_[i] > 0) support_.push_back(i);
}

const std::vector<Rational>& StepDistribution::exact_weights() const {
  if (!exact_) throw Error("distribution has float weights");
  return *exact_;
}

Number StepDistribution::weight_number(std::uint64_t index) const {
  if (exact_) return Number((*exact_).at(index));
  return Number(weights_.at(index));
}

std::vector<std::size_t> StepDistribution::tuple(std::uint64_t index) const {
  std::vector<std::size_t> digits(steps_);
  decode_mixed_radix(index, symbol_count(), digits);
  return digits;
}

std::uint64_t StepDistribution::index(std::span<const std::size_t> symbols) const {
  if (symbols.size() != steps_) throw ValidationError("tuple length does not match step count");
  for (auto a : symbols)
    if (a >= symbol_count()) throw ValidationError("symbol index out of range");
  return encode_mixed_radix(symbols, symbol_count());
}

namespace {

template <class T>
std::vector<T> project_table(const StepDistribution& P, std::span<const std::size_t> steps) {
  std::size_t m = P.symbol_count();
  auto size = checked_power(m, steps.size(), kDefaultBudget);
  std::vector<T> out(size, T(0));
  const auto& w = P.values<T>();
  std::vector<std::size_t> digits(P.steps()), sub(steps.size());
  for (auto idx : P.support()) {
    decode_mixed_radix(idx, m, digits);
    for (std::size_t k = 0; k < steps.size(); ++k) sub[k] = digits[steps[k]];
    out[encode_mixed_radix(sub, m)] += w[idx];
  }
  return out;
}

}  // namespace

StepDistribution StepDistribution::project(std::span<const std::size_t> steps) const {
  if (steps.empty()) throw ValidationError("projection needs at least one step");
  for (auto j : steps)
    if (j >= steps_) throw ValidationError("step index out of range");
  if (exact_) return StepDistribution(alphabet_, steps.size(), project_table<Rational>(*this, steps));
  return StepDistribution(alphabet_, steps.size(), project_table<double>(*this, steps));
}

StepDistribution StepDistribution::to_float() const { return StepDistribution(alphabet_, steps_, weights_, name_); }

// ---------------------------------------------------------------------------
// MarkovKernel

MarkovKernel::MarkovKernel(Alphabet alphabet, Eigen::MatrixXd rows, MarginalDistribution stationary)
    : alphabet_(std::move(alphabet)), rows_(std::move(rows)), stationary_(std::move(stationary)) {
  auto m = static_cast<Eigen::Index>(alphabet_.size());
  if (rows_.rows() != m || rows_.cols() != m || stationary_.size() != alphabet_.size())
    throw ValidationError("kernel dimensions do not match alphabet");
  for (Eigen::Index y = 0; y < m; ++y) {
    if ((rows_.row(y).array() < -1e-15).any()) throw ValidationError("kernel has a negative entry");
    if (std::abs(rows_.row(y).sum() - 1.0) > kStructuralTol) throw ValidationError("kernel row does not sum to 1");
  }
}

double MarkovKernel::reversibility_defect() const {
  double worst = 0.0;
  const auto& pi = stationary_.probs();
  for (Eigen::Index y = 0; y < rows_.rows(); ++y)
    for (Eigen::Index z = 0; z < rows_.cols(); ++z)
      worst = std::max(worst, std::abs(pi[y] * rows_(y, z) - pi[z] * rows_(z, y)));
  return worst;
}

// ---------------------------------------------------------------------------
// Operations

namespace {

template <class T>
std::vector<T> marginal_table(const StepDistribution& P, std::size_t step) {
  std::size_t m = P.symbol_count();
  std::vector<T> out(m, T(0));
  const auto& w = P.values<T>();
  std::vector<std::size_t> digits(P.steps());
  for (auto idx : P.support()) {
    decode_mixed_radix(idx, m, digits);
    out[digits[step]] += w[idx];
  }
  return out;
}

void check_step(const StepDistribution& P, std::size_t step) {
  if (step >= P.steps())
    throw ValidationError("step " + std::to_string(step) + " out of range for " + std::to_string(P.steps()) +
                          "-step distribution");
}

std::vector<bool> union_of_supports(const StepDistribution& P) {
  std::vector<bool> in(P.symbol_count(), false);
  std::vector<std::size_t> digits(P.steps());
  for (auto idx : P.support()) {
    decode_mixed_radix(idx, P.symbol_count(), digits);
    for (auto a : digits) in[a] = true;
  }
  return in;
}

}  // namespace

MarginalDistribution marginal(const StepDistribution& P, std::size_t step) {
  check_step(P, step);
  if (P.exact()) return MarginalDistribution(P.alphabet(), marginal_table<Rational>(P, step));
  auto probs = marginal_table<double>(P, step);
  // Rounding in the column sums can drift by a few ulps; renormalize only that.
  double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (auto& p : probs) p /= total;
  return MarginalDistribution(P.alphabet(), std::move(probs));
}

bool equal_marginals(const StepDistribution& P, double tol) {
  if (P.exact()) {
    auto first = marginal_table<Rational>(P, 0);
    for (std::size_t j = 1; j < P.steps(); ++j)
      if (marginal_table<Rational>(P, j) != first) return false;
    return true;
  }
  auto first = marginal_table<double>(P, 0);
  for (std::size_t j = 1; j < P.steps(); ++j) {
    auto other = marginal_table<double>(P, j);
    for (std::size_t a = 0; a < first.size(); ++a)
      if (std::abs(first[a] - other[a]) > tol) return false;
  }
  return true;
}

Number alpha(const StepDistribution& P) {
  auto in = union_of_supports(P);
  std::vector<std::size_t> diag(P.steps());
  std::optional<Number> best;
  for (std::size_t x = 0; x < P.symbol_count(); ++x) {
    if (!in[x]) continue;
    std::fill(diag.begin(), diag.end(), x);
    Number w = P.weight_number(P.index(diag));
    if (!best || w < *best) best = w;
  }
  return *best;
}

Number beta(const StepDistribution& P) {
  std::size_t m = P.symbol_count();
  std::vector<std::vector<bool>> in(P.steps(), std::vector<bool>(m, false));
  std::vector<std::size_t> digits(P.steps());
  for (auto idx : P.support()) {
    decode_mixed_radix(idx, m, digits);
    for (std::size_t j = 0; j < P.steps(); ++j) in[j][digits[j]] = true;
  }
  std::optional<Number> best;
  for (std::uint64_t idx = 0; idx < P.size(); ++idx) {
    decode_mixed_radix(idx, m, digits);
    bool inside = true;
    for (std::size_t j = 0; j < P.steps() && inside; ++j) inside = in[j][digits[j]];
    if (!inside) continue;
    Number w = P.weight_number(idx);
    if (!best || w < *best) best = w;
  }
  return *best;
}

template <class T>
std::vector<T> double_sample_joint(const StepDistribution& P, std::size_t step) {
  check_step(P, step);
  std::size_t m = P.symbol_count();
  const auto& w = P.values<T>();
  // Group support entries by the values of the other steps.
  std::unordered_map<std::uint64_t, std::vector<std::pair<std::size_t, T>>> groups;
  std::vector<std::size_t> digits(P.steps()), rest;
  rest.reserve(P.steps());
  for (auto idx : P.support()) {
    decode_mixed_radix(idx, m, digits);
    rest.clear();
    for (std::size_t j = 0; j < P.steps(); ++j)
      if (j != step) rest.push_back(digits[j]);
    groups[encode_mixed_radix(rest, m)].emplace_back(digits[step], w[idx]);
  }
  std::vector<T> joint(m * m, T(0));
  for (const auto& [key, entries] : groups) {
    T mass = 0;
    for (const auto& e : entries) mass += e.second;
    for (const auto& [y, wy] : entries)
      for (const auto& [z, wz] : entries) joint[y + m * z] += wy * wz / mass;
  }
  return joint;
}

template std::vector<double> double_sample_joint<double>(const StepDistribution&, std::size_t);
template std::vector<Rational> double_sample_joint<Rational>(const StepDistribution&, std::size_t);

MarkovKernel double_sample_kernel(const StepDistribution& P, std::size_t step) {
  auto pi = marginal(P, step);
  auto support = pi.support();
  std::size_t m = P.symbol_count();
  auto joint = double_sample_joint<double>(P, step);
  auto s = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd K(s, s);
  std::vector<double> pi_s(support.size());
  for (Eigen::Index a = 0; a < s; ++a) {
    double py = pi.prob(support[a]);
    if (py <= 0) throw ValidationError("zero marginal mass at retained symbol");
    pi_s[a] = py;
    for (Eigen::Index b = 0; b < s; ++b) K(a, b) = joint[support[a] + m * support[b]] / py;
    K.row(a) /= K.row(a).sum();
  }
  double total = std::accumulate(pi_s.begin(), pi_s.end(), 0.0);
  for (auto& p : pi_s) p /= total;
  auto alph = P.alphabet().subset(support);
  if (pi.exact()) {
    std::vector<Rational> exact;
    for (auto a : support) exact.push_back(pi.exact_probs()[a]);
    return MarkovKernel(alph, std::move(K), MarginalDistribution(alph, std::move(exact)));
  }
  return MarkovKernel(alph, std::move(K), MarginalDistribution(alph, std::move(pi_s)));
}

double kernel_second_eigenvalue(const MarkovKernel& K) {
  auto m = K.rows().rows();
  if (m < 2) return 0.0;
  double defect = K.reversibility_defect();
  if (defect > kStructuralTol)
    throw ValidationError("kernel is not reversible (defect " + std::to_string(defect) + ")");
  Eigen::VectorXd sqrt_pi(m);
  for (Eigen::Index a = 0; a < m; ++a) sqrt_pi(a) = std::sqrt(K.stationary().prob(static_cast<std::size_t>(a)));
  Eigen::MatrixXd S = sqrt_pi.asDiagonal() * K.rows() * sqrt_pi.cwiseInverse().asDiagonal();
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S, Eigen::EigenvaluesOnly);
  double lambda2 = solver.eigenvalues()(m - 2);
  return std::clamp(lambda2, -1.0, 1.0);
}

namespace {

std::vector<std::size_t> sorted_steps(const StepDistribution& P, std::span<const std::size_t> steps) {
  std::vector<std::size_t> s(steps.begin(), steps.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw ValidationError("repeated step in step set");
  for (auto j : s) check_step(P, j);
  return s;
}

}  // namespace

double maximal_correlation(const StepDistribution& P, std::span<const std::size_t> S_in,
                           std::span<const std::size_t> T_in) {
  if (S_in.empty() || T_in.empty()) throw ValidationError("maximal_correlation needs non-empty step sets");
  auto S = sorted_steps(P, S_in);
  auto T = sorted_steps(P, T_in);
  for (auto j : S)
    if (std::binary_search(T.begin(), T.end(), j)) throw ValidationError("step sets must be disjoint");

  std::size_t m = P.symbol_count();
  std::unordered_map<std::uint64_t, double> joint;
  std::unordered_map<std::uint64_t, double> piS, piT;
  std::vector<std::size_t> digits(P.steps()), a(S.size()), b(T.size());
  for (auto idx : P.support()) {
    decode_mixed_radix(idx, m, digits);
    for (std::size_t k = 0; k < S.size(); ++k) a[k] = digits[S[k]];
    for (std::size_t k = 0; k < T.size(); ++k) b[k] = digits[T[k]];
    auto ia = encode_mixed_radix(a, m), ib = encode_mixed_radix(b, m);
    double w = P.weight(idx);
    piS[ia] += w;
    piT[ib] += w;
    joint[ia * checked_power(m, T.size(), ~std::uint64_t{0}) + ib] += w;
  }
  std::vector<std::uint64_t> rowsS, colsT;
  for (const auto& kv : piS) rowsS.push_back(kv.first);
  for (const auto& kv : piT) colsT.push_back(kv.first);
  std::sort(rowsS.begin(), rowsS.end());
  std::sort(colsT.begin(), colsT.end());
  if (rowsS.size() < 2 || colsT.size() < 2) return 0.0;

  auto width = checked_power(m, T.size(), ~std::uint64_t{0});
  Eigen::MatrixXd M(rowsS.size(), colsT.size());
  for (std::size_t r = 0; r < rowsS.size(); ++r)
    for (std::size_t c = 0; c < colsT.size(); ++c) {
      auto it = joint.find(rowsS[r] * width + colsT[c]);
      double w = it == joint.end() ? 0.0 : it->second;
      M(r, c) = w / std::sqrt(piS[rowsS[r]] * piT[colsT[c]]);
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  return std::clamp(svd.singularValues()(1), 0.0, 1.0);
}

std::vector<double> rho_per_step(const StepDistribution& P) {
  if (P.steps() < 2) return {0.0};
  std::vector<double> out;
  for (std::size_t j = 0; j < P.steps(); ++j) {
    double lambda2 = kernel_second_eigenvalue(double_sample_kernel(P, j));
    if (lambda2 < -kStructuralTol)
      throw Error("double-sample kernel has negative second eigenvalue " + std::to_string(lambda2));
    out.push_back(std::sqrt(std::max(lambda2, 0.0)));
  }
  return out;
}

double rho(const StepDistribution& P) {
  auto r = rho_per_step(P);
  return *std::max_element(r.begin(), r.end());
}

double rho_via_svd(const StepDistribution& P) {
  if (P.steps() < 2) return 0.0;
  double best = 0.0;
  for (std::size_t j = 0; j < P.steps(); ++j) {
    std::vector<std::size_t> rest;
    for (std::size_t k = 0; k < P.steps(); ++k)
      if (k != j) rest.push_back(k);
    std::size_t S[] = {j};
    best = std::max(best, maximal_correlation(P, S, rest));
  }
  return best;
}

namespace {

template <class T>
bool markov_condition_holds(const StepDistribution& P, double tol) {
  std::size_t m = P.symbol_count();
  for (std::size_t j = 2; j < P.steps(); ++j) {
    std::vector<std::size_t> upto(j + 1), prefix(j), pair{j - 1, j}, prev{j - 1};
    std::iota(upto.begin(), upto.end(), 0);
    std::iota(prefix.begin(), prefix.end(), 0);
    auto full = project_table<T>(P, upto);
    auto pre = project_table<T>(P, prefix);
    auto two = project_table<T>(P, pair);
    auto one = project_table<T>(P, prev);
    std::vector<std::size_t> digits(j + 1);
    auto width = checked_power(m, j, ~std::uint64_t{0});
    for (std::uint64_t idx = 0; idx < full.size(); ++idx) {
      decode_mixed_radix(idx, m, digits);
      std::uint64_t pidx = idx % width;
      if (!(pre[pidx] > 0)) continue;
      std::size_t y = digits[j - 1], z = digits[j];
      const T& joint_yz = two[y + m * z];
      const T& py = one[y];
      if constexpr (std::is_same_v<T, Rational>) {
        if (full[idx] * py != pre[pidx] * joint_yz) return false;
      } else {
        if (std::abs(full[idx] / pre[pidx] - joint_yz / py) > tol) return false;
      }
    }
  }
  return true;
}

}  // namespace

MarkovCheck is_markov_generated(const StepDistribution& P, double tol) {
  if (P.steps() < 2) throw ValidationError("Markov generation needs at least two steps");
  MarkovCheck out;
  out.generated = P.exact() ? markov_condition_holds<Rational>(P, tol) : markov_condition_holds<double>(P, tol);
  if (!out.generated) return out;
  std::size_t m = P.symbol_count();
  for (std::size_t j = 0; j + 1 < P.steps(); ++j) {
    std::vector<std::size_t> pair{j, j + 1};
    auto two = project_table<double>(P, pair);
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t y = 0; y < m; ++y) {
      double row = 0;
      for (std::size_t z = 0; z < m; ++z) row += two[y + m * z];
      if (row <= 0) continue;
      for (std::size_t z = 0; z < m; ++z) T(y, z) = two[y + m * z] / row;
    }
    out.transitions.push_back(std::move(T));
  }
  return out;
}

namespace {

template <class T>
EdgeVarianceReport edge_variance(const StepDistribution& P, std::size_t step, std::span<const T> f) {
  std::size_t m = P.symbol_count();
  if (f.size() != m) throw ValidationError("function length does not match alphabet");
  auto joint = double_sample_joint<T>(P, step);
  T lhs = 0, mean = 0, second = 0;
  for (std::size_t y = 0; y < m; ++y)
    for (std::size_t z = 0; z < m; ++z) {
      const T& q = joint[y + m * z];
      if (!(q > 0)) continue;
      T d = f[y] - f[z];
      lhs += q * d * d;
      mean += q * f[y];
      second += q * f[y] * f[y];
    }
  T var = second - mean * mean;
  double r = rho(P);
  double rhs = 2.0 * (1.0 - r * r) * as_double(var);
  EdgeVarianceReport rep{make_number(lhs), rhs, make_number(var), r, false};
  rep.holds = rep.lhs.value() >= rhs - kStructuralTol;
  return rep;
}

}  // namespace

EdgeVarianceReport check_edge_variance(const StepDistribution& P, std::size_t step, std::span<const double> f) {
  return edge_variance<double>(P, step, f);
}

EdgeVarianceReport check_edge_variance(const StepDistribution& P, std::size_t step, std::span<const Rational> f) {
  if (!P.exact()) {
    std::vector<double> d(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) d[i] = to_double(f[i]);
    return edge_variance<double>(P, step, std::span<const double>(d));
  }
  return edge_variance<Rational>(P, step, f);
}

}  // namespace sethit
