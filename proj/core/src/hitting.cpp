#include "sethit/hitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sethit {

namespace {

void check_instance(const StepDistribution& P, std::span<const FunctionSpec> fns) {
  if (fns.size() != P.steps()) throw ValidationError("need one function per step");
  for (const auto& f : fns) {
    if (f.alphabet() != P.alphabet()) throw ValidationError("function alphabet differs from the distribution's");
    if (f.n() != fns.front().n()) throw ValidationError("functions disagree on n");
  }
}

Number one_like(const Number& x) { return x.exact() ? Number(Rational(1)) : Number(1.0); }

Number power(const Number& x, std::size_t k) {
  Number r = one_like(x);
  for (std::size_t t = 0; t < k; ++t) r = r * x;
  return r;
}

struct LineFit {
  double slope;
  double intercept;
  std::vector<double> residuals;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  LineFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t k = 0; k < x.size(); ++k) fit.residuals.push_back(y[k] - (fit.intercept + fit.slope * x[k]));
  return fit;
}

Restriction single(std::size_t n, std::size_t i, std::size_t a) {
  auto R = Restriction::none(n);
  R.entries[i] = a;
  return R;
}

long ceil_div(long a, long b) { return (a + b - 1) / b; }

SymmetricClause open_clause(std::size_t m, std::size_t n) {
  SymmetricClause c;
  c.windows.assign(m, CountWindow{0, static_cast<long>(n)});
  return c;
}

}  // namespace

Number same_set_expectation(const StepDistribution& P, const FunctionSpec& f, const EngineOptions& opt) {
  std::vector<FunctionSpec> fns(P.steps(), f);
  return multi_set_expectation(P, fns, opt);
}

Number multi_set_expectation(const StepDistribution& P, std::span<const FunctionSpec> fns, const EngineOptions& opt) {
  check_instance(P, fns);
  return product_expectation(P, fns, opt);
}

// ---------------------------------------------------------------------------

DensityIncrementResult density_increment(const StepDistribution& P, const FunctionSpec& f, const Number& eps,
                                         std::size_t k, const EngineOptions& opt) {
  if (f.alphabet() != P.alphabet()) throw ValidationError("function alphabet differs from the distribution's");
  auto pi = marginal(P, 0);
  Number a = alpha(P);
  if (a.value() <= 0) throw ValidationError("alpha(P) must be positive");

  DensityIncrementResult res{f, Restriction::none(f.n()), {}, expectation(f, pi, opt), {}, {}, 0, 0.0, {}, false, {}, {}, true};
  if (res.mu.value() <= 0) throw ValidationError("E[f] must be positive");
  Number e = res.mu.exact() && !eps.exact() ? Number(exact_from_double(eps.value())) : eps;
  res.eps_prime = power(a, k) * e;
  double log_inv_mu = -std::log(res.mu.value());
  res.iteration_bound = static_cast<std::uint64_t>(std::ceil(2 * log_inv_mu / res.eps_prime.value()));
  res.loss_bound = std::exp(-2 * log_inv_mu / (std::pow(a.value(), 2.0 * static_cast<double>(k)) * e.value()));

  Number mean = res.mu;
  for (;;) {
    auto scan = is_upper_resilient(res.g, res.eps_prime, k, pi, opt);
    if (scan.resilient) break;
    if (res.steps.size() > res.iteration_bound) throw Error("density increment exceeded its iteration bound");
    const Restriction& R = *scan.witness;
    for (std::size_t c = 0; c < R.entries.size(); ++c)
      if (R.entries[c] && !res.total.entries[c]) res.total.entries[c] = R.entries[c];
    res.g = restrict(res.g, R);
    res.steps.push_back({R, mean, scan.witness_expectation});
    mean = scan.witness_expectation;
  }
  res.final_mean = mean;
  res.restriction_loss = power(a, res.total.size());
  res.resilient = is_resilient(res.g, e, k, pi, opt).resilient;

  std::vector<FunctionSpec> fs(P.steps(), f), gs(P.steps(), res.g);
  try {
    res.product_f = product_expectation(P, fs, opt);
    res.product_g = product_expectation(P, gs, opt);
    res.loss_certified = leq_with_slack(res.restriction_loss * *res.product_g, *res.product_f);
  } catch (const BudgetError&) {
    res.product_f.reset();
    res.product_g.reset();
  }
  return res;
}

// ---------------------------------------------------------------------------

MaxGainReport max_gain_check(const StepDistribution& P, std::size_t step, std::size_t i, const FunctionSpec& f,
                             const EngineOptions& opt) {
  if (step >= P.steps()) throw ValidationError("step out of range");
  if (i >= f.n()) throw ValidationError("coordinate out of range");
  auto table = f.kind() == FunctionSpec::Kind::table ? f : f.to_table(opt.budget);
  auto pi = marginal(P, step);
  std::size_t m = P.symbol_count();

  MaxGainReport rep;
  rep.mean = expectation(table, pi, opt);
  rep.influence = influence(table, pi, i, opt);
  bool exact = P.exact() && table.exact();
  if (exact) {
    auto q = double_sample_joint<Rational>(P, step);
    Rational sum = 0;
    for (std::size_t y = 0; y < m; ++y)
      for (std::size_t z = 0; z < m; ++z)
        if (q[y + m * z] != 0) sum += q[y + m * z] * expectation(max_operator(table, i, y, z), pi, opt).rational();
    rep.averaged = Number(sum);
  } else {
    auto q = double_sample_joint<double>(P, step);
    std::vector<double> terms;
    for (std::size_t y = 0; y < m; ++y)
      for (std::size_t z = 0; z < m; ++z)
        if (q[y + m * z] != 0) terms.push_back(q[y + m * z] * expectation(max_operator(table, i, y, z), pi, opt).value());
    rep.averaged = Number(pairwise_sum(terms));
  }
  rep.gain = rep.averaged - rep.mean;
  rep.rho = rho(P);
  rep.bound = rep.influence.value() * (1 - rep.rho * rep.rho);
  rep.exact = rep.gain.exact();
  rep.holds = rep.gain.value() >= rep.bound - kStructuralTol;
  return rep;
}

// ---------------------------------------------------------------------------

bool InfluenceReductionResult::certified() const {
  if (stalled) return false;
  return std::all_of(steps.begin(), steps.end(), [](const ReductionStep& s) {
    return s.gain_ok && s.floor_ok && s.product_ok && s.max_gain.holds;
  });
}

InfluenceReductionResult influence_reduction(const StepDistribution& P, std::span<const FunctionSpec> fns, double tau,
                                             const EngineOptions& opt) {
  check_instance(P, fns);
  if (!(tau > 0)) throw ValidationError("tau must be positive");
  const std::size_t ell = P.steps();
  const std::size_t m = P.symbol_count();
  const std::size_t n = fns.front().n();

  InfluenceReductionResult res;
  res.rho = rho(P);
  if (res.rho >= 1 - kStructuralTol)
    throw RefusalError("rho(P) = " + std::to_string(res.rho) + ": the influence reduction needs rho < 1");
  res.tau = tau;
  double slack = 1 - res.rho * res.rho;
  res.gain_target = tau * slack / 2;
  res.beta_hat = tau * slack / (2.0 * static_cast<double>(ell) * std::pow(static_cast<double>(m), ell + 1.0));
  res.iteration_bound = static_cast<std::uint64_t>(std::floor(2.0 * static_cast<double>(ell) / (tau * slack)));

  std::vector<MarginalDistribution> pis;
  for (std::size_t j = 0; j < ell; ++j) pis.push_back(marginal(P, j));
  for (const auto& f : fns) res.g.push_back(f.kind() == FunctionSpec::Kind::table ? f : f.to_table(opt.budget));

  const std::uint64_t others_count = checked_power(m, ell - 1, opt.budget);
  for (;;) {
    // Largest influence over all steps and coordinates; first one wins ties.
    std::size_t js = 0, is = 0;
    Number best;
    bool first = true;
    for (std::size_t j = 0; j < ell; ++j) {
      auto inf = influences(res.g[j], pis[j], opt);
      for (std::size_t i = 0; i < n; ++i)
        if (first || best < inf[i]) {
          best = inf[i];
          js = j;
          is = i;
          first = false;
        }
    }
    res.max_influence = best;
    if (best.value() <= tau) break;
    if (res.steps.size() >= res.iteration_bound + 1) {
      res.stalled = true;
      break;
    }

    std::vector<Number> before;
    for (std::size_t j = 0; j < ell; ++j) before.push_back(expectation(res.g[j], pis[j], opt));
    // E[R[i, a] g_j] for j != j*, and E[M[i, y, z] g_j*].
    std::vector<std::vector<Number>> restricted(ell);
    std::vector<FunctionSpec> maxed;
    std::vector<Number> maxed_mean;
    for (std::size_t j = 0; j < ell; ++j) {
      if (j == js) continue;
      for (std::size_t a = 0; a < m; ++a) restricted[j].push_back(expectation(restrict(res.g[j], single(n, is, a)), pis[j], opt));
    }
    for (std::size_t z = 0; z < m; ++z)
      for (std::size_t y = 0; y < m; ++y) {
        maxed.push_back(max_operator(res.g[js], is, y, z));
        maxed_mean.push_back(expectation(maxed.back(), pis[js], opt));
      }

    Number sum_before = before.front();
    for (std::size_t j = 1; j < ell; ++j) sum_before = sum_before + before[j];

    std::optional<ReductionStep> chosen;
    std::vector<std::size_t> tuple(ell);
    for (std::uint64_t o = 0; o < others_count && !chosen; ++o) {
      // Earliest step is the most significant digit of the scan.
      std::vector<std::size_t> others(ell - 1);
      std::uint64_t rest = o;
      for (std::size_t k = ell - 1; k-- > 0;) {
        others[k] = static_cast<std::size_t>(rest % m);
        rest /= m;
      }
      for (std::size_t j = 0, k = 0; j < ell; ++j)
        if (j != js) tuple[j] = others[k++];
      for (std::size_t y = 0; y < m && !chosen; ++y) {
        tuple[js] = y;
        Number py = P.weight_number(P.index(tuple));
        if (py.value() < res.beta_hat) continue;
        for (std::size_t z = 0; z < m && !chosen; ++z) {
          tuple[js] = z;
          Number pz = P.weight_number(P.index(tuple));
          if (pz.value() < res.beta_hat) continue;
          Number sum_after = maxed_mean[y + m * z];
          for (std::size_t j = 0; j < ell; ++j)
            if (j != js) sum_after = sum_after + restricted[j][tuple[j]];
          Number gain = sum_after - sum_before;
          if (!leq_with_slack(Number(res.gain_target), gain)) continue;
          ReductionStep s;
          s.step = js;
          s.coordinate = is;
          s.others = others;
          s.y = y;
          s.z = z;
          s.influence = best;
          s.before = before;
          s.gain = gain;
          s.floor_y = py;
          s.floor_z = pz;
          s.gain_ok = true;
          s.floor_ok = true;
          chosen = std::move(s);
        }
      }
    }
    if (!chosen) {
      res.stalled = true;
      break;
    }

    ReductionStep& s = *chosen;
    s.max_gain = max_gain_check(P, js, is, res.g[js], opt);
    std::vector<FunctionSpec> next;
    for (std::size_t j = 0, k = 0; j < ell; ++j) {
      if (j == js) {
        next.push_back(maxed[s.y + m * s.z]);
      } else {
        next.push_back(restrict(res.g[j], single(n, is, s.others[k++])));
      }
    }
    s.product_before = product_expectation(P, res.g, opt);
    s.product_after = product_expectation(P, next, opt);
    s.product_ok = leq_with_slack(Number(res.beta_hat) * s.product_after, s.product_before);
    for (std::size_t j = 0; j < ell; ++j) s.after.push_back(expectation(next[j], pis[j], opt));
    res.g = std::move(next);
    res.steps.push_back(std::move(s));
  }
  return res;
}

// ---------------------------------------------------------------------------

LowInfluenceBound low_influence_bound(std::span<const double> mus, double rho, std::size_t ell, double eps,
                                      double alpha, double C) {
  if (!(rho < 1)) throw ValidationError("rho must be below 1");
  if (!(eps > 0 && eps <= 0.5)) throw ValidationError("eps must lie in (0, 1/2]");
  if (!(alpha > 0)) throw ValidationError("alpha must be positive");
  double prod = 1;
  for (double mu : mus) prod *= mu;
  double l = static_cast<double>(ell);
  LowInfluenceBound b;
  b.lower_bound = std::pow(prod, l / (1 - rho * rho)) - eps;
  double base = (1 - rho * rho) * eps / std::pow(l, 2.5);
  double exponent = C * l * std::log(l / eps) * std::log(1 / alpha) / ((1 - rho) * eps);
  b.log_tau = exponent * std::log(base);
  b.tau = std::exp(b.log_tau);
  return b;
}

ExplicitCBound explicit_c_bound(double /*alpha*/, double /*rho*/, std::size_t /*ell*/, double mu, double D) {
  if (!(mu > 0 && mu <= 0.99)) throw ValidationError("mu must lie in (0, 0.99]");
  if (!(D > 0)) throw ValidationError("D must be positive");
  ExplicitCBound b;
  b.u = std::pow(1 / mu, D);
  b.log_inverse = std::exp(std::exp(b.u));
  b.value = std::exp(-b.log_inverse);
  b.underflow = b.value == 0;
  return b;
}

// ---------------------------------------------------------------------------

StepDistribution staircase_distribution() {
  std::vector<Rational> w(4, Rational(0));
  w[0 + 2 * 0] = Rational(1, 3);
  w[0 + 2 * 1] = Rational(1, 3);
  w[1 + 2 * 1] = Rational(1, 3);
  return StepDistribution(Alphabet::range(2), 2, std::move(w), "staircase");
}

FunctionSpec unequal_marginals_set(std::size_t n, bool first_only) {
  if (n == 0) throw ValidationError("n must be positive");
  long N = static_cast<long>(n);
  // |wt - n/3| <= n/100 and |wt - 2n/3| <= n/100 in exact integer arithmetic.
  auto clause = [&](std::size_t anchor_symbol, long num_lo, long num_hi) {
    SymmetricClause c = open_clause(2, n);
    c.anchor = Anchor{0, anchor_symbol};
    c.windows[1] = CountWindow{ceil_div(num_lo * N, 300), num_hi * N / 300};
    return c;
  };
  std::vector<SymmetricClause> clauses{clause(1, 97, 103)};
  if (!first_only) clauses.push_back(clause(0, 197, 203));
  auto f = FunctionSpec::anchored_symmetric(Alphabet::range(2), n, std::move(clauses));
  f.set_name(first_only ? "S1" : "S1 or S2");
  return f;
}

UnequalMarginalsReport counterexample_unequal_marginals(std::span<const std::size_t> n_list, const EngineOptions& opt) {
  auto P = staircase_distribution();
  auto pi1 = marginal(P, 0), pi2 = marginal(P, 1);
  UnequalMarginalsReport rep;
  std::vector<double> xs, ys;
  for (std::size_t n : n_list) {
    if (n < 3 || n % 3 != 0) throw ValidationError("n must be a positive multiple of 3");
    auto f = unequal_marginals_set(n);
    UnequalMarginalsRow row;
    row.n = n;
    row.product = same_set_expectation(P, f, opt);
    row.mu1 = expectation(f, pi1, opt);
    row.mu2 = expectation(f, pi2, opt);
    row.first_set = expectation(unequal_marginals_set(n, true), pi1, opt);
    Number lo = row.mu1 < row.mu2 ? row.mu1 : row.mu2;
    row.normalized = row.product / (lo * lo);
    if (row.normalized.value() > 0) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(std::log(row.normalized.value()));
    }
    rep.rows.push_back(std::move(row));
  }
  rep.decay_rate = xs.size() >= 2 ? least_squares(xs, ys).slope : 0.0;
  rep.strictly_decreasing = true;
  for (std::size_t k = 1; k < rep.rows.size(); ++k)
    if (!(rep.rows[k].normalized < rep.rows[k - 1].normalized)) rep.strictly_decreasing = false;
  return rep;
}

// ---------------------------------------------------------------------------

StepDistribution ap3_distribution() {
  std::vector<Rational> w(27, Rational(0));
  for (std::size_t x = 0; x < 3; ++x) {
    w[x + 3 * x + 9 * x] = Rational(1, 6);
    w[x + 3 * ((x + 1) % 3) + 9 * ((x + 2) % 3)] = Rational(1, 6);
  }
  return StepDistribution(Alphabet::range(3), 3, std::move(w), "ap3");
}

std::vector<FunctionSpec> three_sets(std::size_t n) {
  if (n == 0) throw ValidationError("n must be positive");
  // Fewer than n/3 occurrences: count <= ceil(n/3) - 1.
  long hi = ceil_div(static_cast<long>(n), 3) - 1;
  std::vector<FunctionSpec> out;
  const std::size_t avoided[3] = {2, 1, 0};
  for (std::size_t j = 0; j < 3; ++j) {
    SymmetricClause c = open_clause(3, n);
    c.windows[avoided[j]] = CountWindow{0, hi};
    out.push_back(FunctionSpec::anchored_symmetric(Alphabet::range(3), n, {c}));
  }
  return out;
}

ThreeSetsReport counterexample_three_sets(std::size_t n, const EngineOptions& opt) {
  auto P = ap3_distribution();
  auto sets = three_sets(n);
  ThreeSetsReport rep;
  rep.n = n;
  rep.product = multi_set_expectation(P, sets, opt);
  rep.product_zero = rep.product.exact() ? rep.product.rational() == 0 : rep.product.value() == 0;
  for (std::size_t j = 0; j < 3; ++j) {
    auto pi = marginal(P, j);
    rep.measures.push_back(expectation(sets[j], pi, opt));
    // The sets are symmetric in the coordinates, so coordinate 0 attains the max.
    rep.max_influence.push_back(influence(sets[j], pi, 0, opt));
  }
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
std::vector<T> conditional_mean_next(const StepDistribution& P, const FunctionSpec& f, std::uint64_t budget) {
  const std::size_t m = P.symbol_count();
  const std::size_t ell = P.steps();
  std::size_t pair[2] = {ell - 2, ell - 1};
  auto Q = P.project(pair);
  const auto& w = Q.values<T>();
  std::vector<T> T_(m * m, T(0));
  for (std::size_t y = 0; y < m; ++y) {
    T row(0);
    for (std::size_t z = 0; z < m; ++z) row += w[y + m * z];
    if (row == 0) continue;
    for (std::size_t z = 0; z < m; ++z) T_[y + m * z] = w[y + m * z] / row;
  }
  // Apply the transition on every coordinate.
  auto h = f.tabulate<T>(budget);
  const std::size_t n = f.n();
  std::uint64_t stride = 1;
  for (std::size_t axis = 0; axis < n; ++axis, stride *= m) {
    std::vector<T> next(h.size(), T(0));
    for (std::uint64_t idx = 0; idx < h.size(); ++idx) {
      std::size_t y = static_cast<std::size_t>((idx / stride) % m);
      std::uint64_t base = idx - y * stride;
      T acc(0);
      for (std::size_t z = 0; z < m; ++z)
        if (T_[y + m * z] != 0) acc += T_[y + m * z] * h[base + z * stride];
      next[idx] = acc;
    }
    h = std::move(next);
  }
  return h;
}

template <class T>
MarkovSameSetReport markov_check(const StepDistribution& P, const FunctionSpec& f, const EngineOptions& opt) {
  auto fv = f.tabulate<T>(opt.budget);
  auto cond = conditional_mean_next<T>(P, f, opt.budget);
  std::vector<T> gv(fv.size());
  bool dominated = true;
  for (std::size_t k = 0; k < fv.size(); ++k) {
    gv[k] = fv[k] * cond[k];
    if (gv[k] > fv[k]) dominated = false;
  }
  MarkovSameSetReport rep{FunctionSpec::table(f.alphabet(), f.n(), std::move(gv)), {}, {}, false, dominated};
  rep.g.set_name("g");
  rep.lhs = same_set_expectation(P, f, opt);
  const std::size_t ell = P.steps();
  std::vector<std::size_t> head(ell - 1);
  std::iota(head.begin(), head.end(), std::size_t{0});
  auto Q = P.project(head);
  std::vector<FunctionSpec> fns(ell - 2, f);
  fns.push_back(rep.g);
  rep.rhs = product_expectation(Q, fns, opt);
  if (rep.lhs.exact() && rep.rhs.exact()) {
    rep.identity_holds = rep.lhs.rational() == rep.rhs.rational();
  } else {
    rep.identity_holds = std::abs(rep.lhs.value() - rep.rhs.value()) <= kStructuralTol;
  }
  return rep;
}

}  // namespace

MarkovSameSetReport markov_same_set_check(const StepDistribution& P, const FunctionSpec& f, const EngineOptions& opt) {
  if (P.steps() < 2) throw ValidationError("need at least two steps");
  if (f.alphabet() != P.alphabet()) throw ValidationError("function alphabet differs from the distribution's");
  if (!is_markov_generated(P).generated) throw ValidationError("distribution is not generated by a Markov chain");
  if (P.exact() && f.exact()) return markov_check<Rational>(P, f, opt);
  return markov_check<double>(P.exact() ? P.to_float() : P, f, opt);
}

// ---------------------------------------------------------------------------

ExponentFit estimate_hitting_exponent(const StepDistribution& P, std::span<const double> mu_grid,
                                      const ThresholdFamily& family, const EngineOptions& opt) {
  if (P.steps() != 2) throw ValidationError("exponent fit needs a two-step distribution");
  const std::size_t m = P.symbol_count();
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = x + 1; y < m; ++y) {
      std::uint64_t a = x + m * y, b = y + m * x;
      bool same = P.exact() ? P.exact_weights()[a] == P.exact_weights()[b]
                            : std::abs(P.weight(a) - P.weight(b)) <= kStructuralTol;
      if (!same) throw RefusalError("exponent fit needs a symmetric distribution");
    }
  if (alpha(P).value() <= 0) throw RefusalError("exponent fit needs alpha(P) > 0");
  if (family.symbol >= m) throw ValidationError("threshold symbol out of range");

  auto pi = marginal(P, 0);
  const std::size_t n = family.n;
  std::vector<FunctionSpec> members;
  std::vector<double> measures;
  for (std::size_t t = 0; t <= n; ++t) {
    SymmetricClause c = open_clause(m, n);
    c.windows[family.symbol] = CountWindow{static_cast<long>(t), static_cast<long>(n)};
    members.push_back(FunctionSpec::anchored_symmetric(P.alphabet(), n, {c}));
    measures.push_back(expectation(members.back(), pi, opt).value());
  }

  ExponentFit fit;
  std::vector<double> lx, ly;
  for (double target : mu_grid) {
    std::size_t best = n + 1;
    for (std::size_t t = 0; t <= n; ++t) {
      if (measures[t] <= 0) continue;
      if (best > n || std::abs(measures[t] - target) < std::abs(measures[best] - target)) best = t;
    }
    if (best > n) continue;
    double delta = same_set_expectation(P, members[best], opt).value();
    if (delta <= 0) continue;
    fit.thresholds.push_back(best);
    fit.mu.push_back(measures[best]);
    fit.delta.push_back(delta);
    lx.push_back(std::log(measures[best]));
    ly.push_back(std::log(delta));
  }
  if (lx.size() < 2) throw ValidationError("exponent fit needs at least two distinct grid points");
  auto line = least_squares(lx, ly);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.residuals = std::move(line.residuals);
  return fit;
}

}  // namespace sethit
