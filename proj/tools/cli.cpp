#include "cli.hpp"

#include "sethit/decompose.hpp"
#include "sethit/dist_io.hpp"
#include "sethit/hitting.hpp"
#include "sethit/invariance.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace sethit::cli {

using json = nlohmann::ordered_json;

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Numeric leaves carry their exactness.
json num(const Number& v) {
  if (v.exact()) return {{"value", v.str()}, {"exactness", "rational"}};
  return {{"value", v.value()}, {"exactness", "float"}};
}
json num(const Rational& q) { return num(Number(q)); }
json real(double v) { return {{"value", v}, {"exactness", "float"}}; }
json mc(const McEstimate& e) {
  return {{"value", e.mean}, {"std_error", e.std_error}, {"samples", e.samples}, {"exactness", "monte-carlo"}};
}
json nums(const std::vector<Number>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(num(x));
  return a;
}

// Accepts p/q, integers and plain decimals exactly.
Number parse_number(const std::string& text) {
  try {
    return parse_rational(text);
  } catch (const ParseError&) {
  }
  auto dot = text.find('.');
  if (dot != std::string::npos && text.find_first_of("eE") == std::string::npos) {
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    std::string den = "1" + std::string(text.size() - dot - 1, '0');
    try {
      return parse_rational(digits + "/" + den);
    } catch (const ParseError&) {
    }
  }
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(0, "not a number: '" + text + "'");
}

enum class Status { ok, violated, refused };

struct Options {
  std::vector<std::string> dist_paths;
  std::vector<std::string> fn_paths;
  std::optional<std::size_t> n;
  std::string engine = "auto";
  std::uint64_t seed = 1;
  std::uint64_t samples = 100000;
  std::uint64_t budget = kDefaultBudget;
  unsigned threads = 1;
  std::string tau, eps, k, gamma, lambda;
  double constant = 10.0;
  bool table = false;
  std::size_t step = 1;
  std::string mode;
  std::vector<std::size_t> n_list;
  std::vector<double> xs;
  std::vector<double> thresholds;
  std::vector<std::string> sides;
  double rho = 0.5;
  std::size_t ell = 2;
  bool gaussian = false;
};

class Context {
 public:
  explicit Context(const Options& o) : opt(o) {}

  const Options& opt;
  json inputs = json::array();
  std::string exactness = "rational";

  std::string read(const std::string& path) {
    auto text = read_text_file(path);
    inputs.push_back({{"path", path}, {"fnv1a64", fnv1a_hex(text)}});
    return text;
  }

  StepDistribution dist() {
    if (opt.dist_paths.empty()) throw ValidationError("--dist is required");
    auto P = parse_distribution(read(opt.dist_paths.front()));
    if (!P.exact()) mark("float");
    return P;
  }

  std::vector<FunctionSpec> functions(const Alphabet& alphabet) {
    if (opt.fn_paths.empty()) throw ValidationError("--fn is required");
    std::vector<FunctionSpec> out;
    for (const auto& path : opt.fn_paths) {
      auto text = read(path);
      if (opt.n) {
        json doc;
        try {
          doc = json::parse(text);
        } catch (const json::parse_error& e) {
          throw ParseError(0, std::string("invalid JSON: ") + e.what());
        }
        doc["n"] = *opt.n;
        text = doc.dump();
      }
      auto f = parse_function_spec(text);
      if (f.alphabet().symbols() != alphabet.symbols()) throw ValidationError(path + ": alphabet differs from the distribution's");
      if (!f.exact()) mark("float");
      out.push_back(std::move(f));
    }
    return out;
  }

  EngineOptions engine() const { return {parse_engine(opt.engine), opt.budget, opt.threads}; }
  MonteCarloOptions monte_carlo() const { return {opt.samples, opt.seed, opt.threads}; }

  void mark(const std::string& kind) {
    if (exactness == kind) return;
    if (exactness == "rational") {
      exactness = kind;
    } else if (kind != "rational") {
      exactness = "mixed";
    }
  }

  std::size_t step_index(const StepDistribution& P) const {
    if (opt.step < 1 || opt.step > P.steps()) throw ValidationError("--step must lie in 1.." + std::to_string(P.steps()));
    return opt.step - 1;
  }
};

struct Outcome {
  json results;
  Status status = Status::ok;
};

Status verdict(bool holds) { return holds ? Status::ok : Status::violated; }

json symbols_of(const Alphabet& a, std::span<const std::size_t> idx) {
  json s = json::array();
  for (auto i : idx) s.push_back(a.symbol(i));
  return s;
}

// ---------------------------------------------------------------------------

Outcome do_inspect(Context& ctx) {
  auto P = ctx.dist();
  json r;
  r["name"] = P.name();
  r["alphabet"] = P.alphabet().symbols();
  r["steps"] = P.steps();
  r["support_size"] = P.support().size();
  r["alpha"] = num(alpha(P));
  r["beta"] = num(beta(P));
  r["rho"] = real(rho(P));
  r["rho_svd"] = real(rho_via_svd(P));
  json per = json::array();
  for (double v : rho_per_step(P)) per.push_back(real(v));
  r["rho_per_step"] = std::move(per);
  r["equal_marginals"] = equal_marginals(P);
  r["markov_generated"] = is_markov_generated(P).generated;
  json marg = json::array();
  for (std::size_t j = 0; j < P.steps(); ++j) {
    auto pi = marginal(P, j);
    json row = json::array();
    for (std::size_t a = 0; a < pi.size(); ++a) row.push_back(num(pi.prob_number(a)));
    marg.push_back(std::move(row));
  }
  r["marginals"] = std::move(marg);
  return {r};
}

Outcome do_decompose(Context& ctx) {
  auto P = ctx.dist();
  auto dec = convex_cycle_decomposition(P);
  auto rep = decomposition_guarantees(dec, P);
  json parts = json::array();
  for (std::size_t k = 0; k < dec.parts.size(); ++k) {
    const auto& part = dec.parts[k];
    parts.push_back({{"kind", part.kind == DecompositionPart::Kind::cycle ? "cycle" : "point"},
                     {"beta", num(part.beta)},
                     {"vertices", symbols_of(P.alphabet(), part.vertices)},
                     {"p", num(part.p)},
                     {"alpha", num(rep.parts[k].alpha)},
                     {"rho", real(rep.parts[k].rho)},
                     {"alpha_ok", rep.parts[k].alpha_ok},
                     {"rho_ok", rep.parts[k].rho_ok},
                     {"p_ok", rep.parts[k].p_ok}});
  }
  json r;
  r["parts"] = std::move(parts);
  r["alpha"] = num(dec.alpha);
  r["alpha_floor"] = num(rep.alpha_floor);
  r["rho_ceiling"] = real(rep.rho_ceiling);
  r["reconstruction_exact"] = rep.reconstruction_exact;
  r["weights_sum_to_one"] = rep.weights_sum_to_one;
  r["part_count_ok"] = rep.part_count_ok;
  r["holds"] = rep.holds();
  if (!rep.parts.empty()) ctx.mark("float");
  return {r, verdict(rep.holds())};
}

Outcome do_fourier(Context& ctx) {
  auto P = ctx.dist();
  auto f = ctx.functions(P.alphabet()).front();
  auto pi = marginal(P, ctx.step_index(P));
  auto opt = ctx.engine();
  json r;
  r["step"] = ctx.opt.step;
  r["n"] = f.n();
  r["mean"] = num(expectation(f, pi, opt));
  r["variance"] = num(variance(f, pi, opt));
  r["influences"] = nums(influences(f, pi, opt));
  r["total_influence"] = num(total_influence(f, pi, opt));
  auto e = analyze(f, build_basis(pi), ctx.opt.budget);
  r["degree"] = e.degree();
  r["squared_norm"] = real(e.squared_norm());
  json coeffs = json::array();
  std::vector<std::size_t> sigma(f.n());
  for (std::uint64_t idx = 0; idx < e.coeffs.size(); ++idx) {
    if (std::abs(e.coeffs[idx]) <= 1e-12) continue;
    decode_mixed_radix(idx, e.basis.size(), sigma);
    coeffs.push_back({{"sigma", sigma}, {"coefficient", real(e.coeffs[idx])}});
  }
  r["coefficients"] = std::move(coeffs);
  ctx.mark("float");
  Status status = Status::ok;
  if (!ctx.opt.eps.empty() && !ctx.opt.k.empty()) {
    auto res = is_resilient(f, parse_number(ctx.opt.eps), std::stoul(ctx.opt.k), pi, opt);
    json jr{{"resilient", res.resilient}, {"restrictions_checked", res.restrictions_checked}};
    if (res.witness) {
      jr["witness"] = res.witness->str(P.alphabet());
      jr["witness_expectation"] = num(res.witness_expectation);
    }
    r["resilience"] = std::move(jr);
    status = verdict(res.resilient);
  }
  return {r, status};
}

Outcome do_hit(Context& ctx) {
  auto P = ctx.dist();
  auto fns = ctx.functions(P.alphabet());
  Number v;
  if (fns.size() == 1) {
    v = same_set_expectation(P, fns[0], ctx.engine());
  } else {
    v = multi_set_expectation(P, fns, ctx.engine());
  }
  if (!v.exact()) ctx.mark("float");
  json r;
  r["engine"] = ctx.opt.engine;
  r["n"] = fns[0].n();
  r["value"] = num(v);
  return {r};
}

json increment_json(const DensityIncrementResult& res, const Alphabet& alphabet) {
  json steps = json::array();
  for (const auto& s : res.steps)
    steps.push_back({{"restriction", s.restriction.str(alphabet)}, {"before", num(s.before)}, {"after", num(s.after)}});
  json r;
  r["steps"] = std::move(steps);
  r["restriction"] = res.total.str(alphabet);
  r["mu"] = num(res.mu);
  r["final_mean"] = num(res.final_mean);
  r["eps_prime"] = num(res.eps_prime);
  r["iteration_bound"] = res.iteration_bound;
  r["loss_bound"] = real(res.loss_bound);
  r["restriction_loss"] = num(res.restriction_loss);
  r["resilient"] = res.resilient;
  if (res.product_f) r["product_f"] = num(*res.product_f);
  if (res.product_g) r["product_g"] = num(*res.product_g);
  r["loss_certified"] = res.loss_certified;
  return r;
}

Outcome do_reduce(Context& ctx) {
  auto P = ctx.dist();
  auto fns = ctx.functions(P.alphabet());
  if (ctx.opt.mode == "increment") {
    if (ctx.opt.eps.empty() || ctx.opt.k.empty()) throw ValidationError("increment needs --eps and --k");
    auto res = density_increment(P, fns[0], parse_number(ctx.opt.eps), std::stoul(ctx.opt.k), ctx.engine());
    bool ok = res.resilient && res.steps.size() <= res.iteration_bound && res.final_mean >= res.mu && res.loss_certified;
    auto r = increment_json(res, P.alphabet());
    r["holds"] = ok;
    return {r, verdict(ok)};
  }
  if (ctx.opt.tau.empty()) throw ValidationError("influence reduction needs --tau");
  if (fns.size() == 1) fns.assign(P.steps(), fns[0]);
  auto res = influence_reduction(P, fns, parse_number(ctx.opt.tau).value(), ctx.engine());
  json steps = json::array();
  for (const auto& s : res.steps)
    steps.push_back({{"step", s.step + 1},
                     {"coordinate", s.coordinate + 1},
                     {"others", symbols_of(P.alphabet(), s.others)},
                     {"y", P.alphabet().symbol(s.y)},
                     {"z", P.alphabet().symbol(s.z)},
                     {"influence", num(s.influence)},
                     {"gain", num(s.gain)},
                     {"product_before", num(s.product_before)},
                     {"product_after", num(s.product_after)},
                     {"gain_ok", s.gain_ok},
                     {"floor_ok", s.floor_ok},
                     {"product_ok", s.product_ok},
                     {"max_gain_ok", s.max_gain.holds}});
  json r;
  r["rho"] = real(res.rho);
  r["tau"] = real(res.tau);
  r["gain_target"] = real(res.gain_target);
  r["beta_hat"] = real(res.beta_hat);
  r["iteration_bound"] = res.iteration_bound;
  r["iterations"] = res.steps.size();
  r["steps"] = std::move(steps);
  r["max_influence"] = num(res.max_influence);
  r["stalled"] = res.stalled;
  r["holds"] = res.certified();
  ctx.mark("float");
  return {r, verdict(res.certified())};
}

// ---------------------------------------------------------------------------

Outcome verify_counterexamples(Context& ctx) {
  auto ns = ctx.opt.n_list.empty() ? std::vector<std::size_t>{6, 9, 12} : ctx.opt.n_list;
  auto rep = counterexample_unequal_marginals(ns, ctx.engine());
  json rows = json::array();
  for (const auto& row : rep.rows)
    rows.push_back({{"n", row.n},
                    {"product", num(row.product)},
                    {"mu1", num(row.mu1)},
                    {"mu2", num(row.mu2)},
                    {"first_set", num(row.first_set)},
                    {"normalized", num(row.normalized)}});
  json r;
  r["rows"] = std::move(rows);
  r["decay_rate"] = real(rep.decay_rate);
  r["strictly_decreasing"] = rep.strictly_decreasing;
  return {r, verdict(rep.strictly_decreasing)};
}

Outcome verify_three_sets(Context& ctx) {
  auto ns = ctx.opt.n_list.empty() ? std::vector<std::size_t>{6, 12, 24} : ctx.opt.n_list;
  json rows = json::array();
  bool zero = true, decreasing = true;
  std::optional<double> prev;
  for (auto n : ns) {
    auto rep = counterexample_three_sets(n, ctx.engine());
    zero = zero && rep.product_zero;
    double mx = 0;
    for (const auto& v : rep.max_influence) mx = std::max(mx, v.value());
    if (prev && !(mx < *prev)) decreasing = false;
    prev = mx;
    rows.push_back({{"n", n}, {"product", num(rep.product)}, {"measures", nums(rep.measures)}, {"max_influence", nums(rep.max_influence)}});
  }
  json r;
  r["rows"] = std::move(rows);
  r["product_zero"] = zero;
  r["influence_decreasing"] = decreasing;
  return {r, verdict(zero && decreasing)};
}

Outcome verify_markov(Context& ctx) {
  auto P = ctx.dist();
  auto f = ctx.functions(P.alphabet()).front();
  auto rep = markov_same_set_check(P, f, ctx.engine());
  json r;
  r["lhs"] = num(rep.lhs);
  r["rhs"] = num(rep.rhs);
  r["identity_holds"] = rep.identity_holds;
  r["dominated"] = rep.dominated;
  bool ok = rep.identity_holds && rep.dominated;
  return {r, verdict(ok)};
}

Outcome verify_exponent(Context& ctx) {
  auto P = ctx.dist();
  std::vector<double> grid{0.05, 0.1, 0.2, 0.3, 0.4};
  ThresholdFamily family;
  if (ctx.opt.n) family.n = *ctx.opt.n;
  auto fit = estimate_hitting_exponent(P, grid, family, ctx.engine());
  json pts = json::array();
  for (std::size_t k = 0; k < fit.mu.size(); ++k)
    pts.push_back({{"threshold", fit.thresholds[k]}, {"mu", real(fit.mu[k])}, {"delta", real(fit.delta[k])}, {"residual", real(fit.residuals[k])}});
  json r;
  r["points"] = std::move(pts);
  r["slope"] = real(fit.slope);
  r["intercept"] = real(fit.intercept);
  ctx.mark("float");
  return {r};
}

Outcome verify_cycle_rho(Context& ctx) {
  json rows = json::array();
  bool ok = true;
  for (std::size_t s = 2; s <= 8; ++s)
    for (double p : {0.1, 0.2, 0.3, 0.4, 0.5}) {
      auto c = cycle_rho(s, p);
      bool holds = c.rho <= c.bound + kAgreementTol;
      ok = ok && holds;
      rows.push_back({{"s", s}, {"p", real(p)}, {"rho", real(c.rho)}, {"bound", real(c.bound)}, {"holds", holds}});
    }
  ctx.mark("float");
  return {{{"rows", std::move(rows)}, {"holds", ok}}, verdict(ok)};
}

Outcome do_verify(Context& ctx) {
  static const std::map<std::string, std::function<Outcome(Context&)>> suites{
      {"counterexamples", verify_counterexamples}, {"three-sets", verify_three_sets}, {"markov", verify_markov},
      {"exponent", verify_exponent},               {"cycle-rho", verify_cycle_rho},
  };
  auto out = suites.at(ctx.opt.mode)(ctx);
  json head{{"suite", ctx.opt.mode}};
  head.update(out.results);
  out.results = std::move(head);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<MultilinearPolynomial> step_polys(Context& ctx, const StepDistribution& P) {
  auto fns = ctx.functions(P.alphabet());
  if (fns.size() == 1) fns.assign(P.steps(), fns[0]);
  if (fns.size() != P.steps()) throw ValidationError("give one --fn or one per step");
  std::vector<MultilinearPolynomial> polys;
  for (std::size_t j = 0; j < P.steps(); ++j)
    polys.push_back(poly_from_function(fns[j], build_basis(marginal(P.to_float(), j)), ctx.opt.budget));
  return polys;
}

double real_option(const std::string& text, const char* flag) {
  if (text.empty()) throw ValidationError(std::string(flag) + " is required");
  return parse_number(text).value();
}

Outcome invariance_hyper(Context& ctx) {
  auto P = ctx.dist();
  auto f = ctx.functions(P.alphabet()).front();
  auto pi = marginal(P.to_float(), ctx.step_index(P));
  auto basis = build_basis(pi);
  auto poly = poly_from_function(f, basis, ctx.opt.budget);
  double a = pi.min_support_prob().value();
  auto ens = ctx.opt.gaussian ? EnsembleSequence::gaussian(f.n(), basis.size()) : EnsembleSequence::discrete(basis, f.n());
  auto rep = hypercontractivity_check(poly, ens, a, ctx.monte_carlo(), ctx.opt.budget);
  ctx.mark(rep.exact ? "float" : "monte-carlo");
  json r;
  r["ensemble"] = ctx.opt.gaussian ? "gaussian" : "discrete";
  r["alpha"] = real(a);
  r["rho"] = real(rep.rho);
  r["degree"] = rep.degree;
  r["noisy_norm3"] = real(rep.noisy_norm3);
  r["norm2"] = real(rep.norm2);
  r["norm3"] = real(rep.norm3);
  r["degree_bound"] = real(rep.degree_bound);
  if (!rep.exact) r["std_error"] = real(rep.std_error);
  r["noise_inequality"] = "E[|T_rho P|^3]^(1/3) <= E[P^2]^(1/2)";
  r["noise_holds"] = rep.noise_holds;
  r["degree_inequality"] = "E[|P|^3]^(1/3) <= (2/alpha^(1/6))^d E[P^2]^(1/2)";
  r["degree_holds"] = rep.degree_holds;
  return {r, verdict(rep.holds())};
}

Outcome invariance_gap_cmd(Context& ctx) {
  auto P = ctx.dist();
  auto polys = step_polys(ctx, P);
  double lambda = real_option(ctx.opt.lambda, "--lambda");
  auto rep = invariance_gap(polys, P, lambda, ctx.monte_carlo(), ctx.opt.constant, ctx.opt.budget);
  ctx.mark("monte-carlo");
  json r;
  r["lambda"] = real(lambda);
  r["C"] = real(ctx.opt.constant);
  r["discrete"] = real(rep.discrete);
  r["gaussian"] = mc(rep.gaussian);
  r["gap"] = real(rep.gap);
  r["tau"] = real(rep.tau);
  r["degree"] = rep.degree;
  r["alpha"] = real(rep.alpha);
  r["smooth_bound"] = real(rep.smooth_bound);
  r["chi_bound"] = real(rep.chi_bound);
  r["variance_ok"] = rep.variance_ok;
  r["inequality"] = "gap <= smooth_bound + 3 std_error (consistency with constant C)";
  r["holds"] = rep.holds;
  return {r, verdict(rep.holds)};
}

Outcome invariance_smooth(Context& ctx) {
  auto P = ctx.dist();
  auto polys = step_polys(ctx, P);
  double gamma = real_option(ctx.opt.gamma, "--gamma");
  double eps = real_option(ctx.opt.eps, "--eps");
  auto rep = smoothing_gap(polys, P, gamma, eps, ctx.opt.budget);
  ctx.mark("float");
  json r;
  r["gamma"] = real(gamma);
  r["eps"] = real(eps);
  r["original"] = real(rep.original);
  r["smoothed"] = real(rep.smoothed);
  r["gap"] = real(rep.gap);
  r["gamma_limit"] = real(rep.gamma_limit);
  r["in_range"] = rep.in_range;
  r["inequality"] = "gap <= eps when gamma <= gamma_limit";
  r["holds"] = rep.holds;
  return {r, verdict(rep.holds)};
}

Outcome invariance_rhc(Context& ctx) {
  const auto ell = ctx.opt.ell;
  if (ell == 0) throw ValidationError("--ell must be positive");
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(ell), static_cast<Eigen::Index>(ell), ctx.opt.rho);
  cov.diagonal().setOnes();
  std::vector<HalfLine> fns(ell);
  for (std::size_t j = 0; j < ell; ++j) {
    if (j < ctx.opt.thresholds.size()) fns[j].threshold = ctx.opt.thresholds[j];
    if (j < ctx.opt.sides.size()) fns[j].above = ctx.opt.sides[j] == "above";
  }
  auto rep = gaussian_rhc_check(cov, fns, ctx.monte_carlo());
  ctx.mark("monte-carlo");
  json means = json::array();
  for (const auto& m : rep.means) means.push_back(mc(m));
  json r;
  r["ell"] = ell;
  r["correlation"] = real(ctx.opt.rho);
  r["product"] = mc(rep.product);
  r["means"] = std::move(means);
  r["rho"] = real(rep.rho);
  r["min_eigenvalue"] = real(rep.min_eigenvalue);
  r["p"] = real(rep.p);
  r["condition_met"] = rep.condition_met;
  r["bound"] = real(rep.bound);
  r["bound_std_error"] = real(rep.bound_std_error);
  r["inequality"] = "E[prod f] + 3 se >= (prod mu)^(l/(1-rho^2)) - 3 se_bound";
  r["holds"] = rep.holds;
  return {r, verdict(rep.holds)};
}

Outcome invariance_mollifier(Context& ctx) {
  double lambda = real_option(ctx.opt.lambda, "--lambda");
  auto xs = ctx.opt.xs.empty() ? std::vector<double>{-1, 0, 0.5, 1, 2} : ctx.opt.xs;
  json pts = json::array();
  bool ok = true;
  for (double x : xs) {
    double v = mollifier_phi(lambda, x);
    bool within = std::abs(v - clamp_unit(x)) <= lambda;
    ok = ok && within;
    pts.push_back({{"x", real(x)}, {"phi", real(clamp_unit(x))}, {"phi_lambda", real(v)}, {"within_lambda", within}});
  }
  ctx.mark("float");
  json r;
  r["lambda"] = real(lambda);
  r["bump_constant"] = real(bump_constant());
  r["points"] = std::move(pts);
  r["holds"] = ok;
  return {r, verdict(ok)};
}

Outcome do_invariance(Context& ctx) {
  static const std::map<std::string, std::function<Outcome(Context&)>> modes{
      {"hyper", invariance_hyper}, {"gap", invariance_gap_cmd},         {"smooth", invariance_smooth},
      {"rhc", invariance_rhc},     {"mollifier", invariance_mollifier},
  };
  auto out = modes.at(ctx.opt.mode)(ctx);
  json head{{"mode", ctx.opt.mode}};
  head.update(out.results);
  out.results = std::move(head);
  return out;
}

// ---------------------------------------------------------------------------

void flatten(const json& j, const std::string& prefix, std::ostream& out) {
  if (j.is_object()) {
    if (j.contains("exactness") && j.contains("value")) {
      out << prefix << "\t" << (j["value"].is_string() ? j["value"].get<std::string>() : j["value"].dump()) << "\t"
          << j["exactness"].get<std::string>() << "\n";
      return;
    }
    for (const auto& [key, v] : j.items()) flatten(v, prefix.empty() ? key : prefix + "." + key, out);
  } else if (j.is_array()) {
    for (std::size_t k = 0; k < j.size(); ++k) flatten(j[k], prefix + "[" + std::to_string(k) + "]", out);
  } else {
    out << prefix << "\t" << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
  }
}

void collect_exactness(const json& j, std::set<std::string>& kinds) {
  if (j.is_object() && j.contains("exactness") && j.contains("value")) {
    kinds.insert(j["exactness"].get<std::string>());
    return;
  }
  if (j.is_structured())
    for (const auto& v : j) collect_exactness(v, kinds);
}

/// rational | float | monte-carlo when every numeric leaf agrees, else mixed.
std::string overall_exactness(const json& results, const std::string& fallback) {
  std::set<std::string> kinds;
  collect_exactness(results, kinds);
  if (kinds.empty()) return fallback;
  return kinds.size() == 1 ? *kinds.begin() : "mixed";
}

const char* status_name(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::violated: return "violated";
    case Status::refused: return "refused";
  }
  return "?";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Hitting-set expectations over multi-step distributions", "sethit"};
  app.require_subcommand(1);

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--budget", o.budget, "Cap on enumerated points (default 2^24)");
    sub->add_option("--threads", o.threads, "Worker count; output does not depend on it");
    sub->add_flag("--table", o.table, "Tab-separated key/value lines instead of JSON");
    sub->add_flag("--json", [&o](std::int64_t) { o.table = false; }, "JSON report (default)");
  };
  auto with_dist = [&o](CLI::App* sub) { sub->add_option("--dist", o.dist_paths, "Distribution file")->take_last(); };
  auto with_fn = [&o](CLI::App* sub) {
    sub->add_option("--fn", o.fn_paths, "Function JSON file (repeatable)");
    sub->add_option("--n", o.n, "Override the function's n");
  };
  auto with_engine = [&o](CLI::App* sub) {
    sub->add_option("--engine", o.engine, "enumerate | dp | auto")->check(CLI::IsMember({"enumerate", "dp", "auto"}));
  };
  auto with_mc = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Monte Carlo seed");
    sub->add_option("--samples", o.samples, "Monte Carlo samples");
  };

  auto* inspect = app.add_subcommand("inspect", "Structural quantities of a distribution");
  inspect->add_option("file", o.dist_paths, "Distribution file");
  with_dist(inspect);
  common(inspect);

  auto* decompose = app.add_subcommand("decompose", "Convex decomposition into cycles and point masses");
  decompose->add_option("file", o.dist_paths, "Distribution file");
  with_dist(decompose);
  common(decompose);

  auto* fourier = app.add_subcommand("fourier", "Fourier statistics of a function under one step's marginal");
  with_dist(fourier);
  with_fn(fourier);
  with_engine(fourier);
  fourier->add_option("--step", o.step, "1-based step whose marginal is used");
  fourier->add_option("--eps", o.eps, "Resilience tolerance");
  fourier->add_option("--k", o.k, "Resilience restriction size");
  common(fourier);

  auto* hit = app.add_subcommand("hit", "E[prod_j f_j(X^(j))]");
  with_dist(hit);
  with_fn(hit);
  with_engine(hit);
  common(hit);

  auto* reduce = app.add_subcommand("reduce", "Influence reduction or density increment");
  reduce->add_option("mode", o.mode, "influence | increment")->check(CLI::IsMember({"influence", "increment"}));
  o.mode = "influence";
  with_dist(reduce);
  with_fn(reduce);
  with_engine(reduce);
  reduce->add_option("--tau", o.tau, "Influence threshold");
  reduce->add_option("--eps", o.eps, "Resilience tolerance");
  reduce->add_option("--k", o.k, "Restriction size");
  common(reduce);

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("suite", o.mode, "counterexamples | three-sets | markov | exponent | cycle-rho")
      ->required()
      ->check(CLI::IsMember({"counterexamples", "three-sets", "markov", "exponent", "cycle-rho"}));
  with_dist(verify);
  verify->add_option("--fn", o.fn_paths, "Function JSON file");
  verify->add_option("--n", o.n_list, "Comma-separated n values")->delimiter(',');
  with_engine(verify);
  common(verify);

  auto* inv = app.add_subcommand("invariance", "Numerical checks around the invariance principle");
  inv->add_option("mode", o.mode, "hyper | gap | smooth | rhc | mollifier")
      ->required()
      ->check(CLI::IsMember({"hyper", "gap", "smooth", "rhc", "mollifier"}));
  with_dist(inv);
  with_fn(inv);
  with_mc(inv);
  inv->add_option("--step", o.step, "1-based step (hyper)");
  inv->add_flag("--gaussian", o.gaussian, "Gaussian ensemble (hyper)");
  inv->add_option("--lambda", o.lambda, "Mollifier width in (0, 1/2)");
  inv->add_option("--gamma", o.gamma, "Smoothing parameter");
  inv->add_option("--eps", o.eps, "Smoothing tolerance");
  inv->add_option("--C", o.constant, "Absolute constant in the reported bounds");
  inv->add_option("--rho", o.rho, "Pairwise correlation (rhc)");
  inv->add_option("--ell", o.ell, "Number of Gaussian steps (rhc)");
  inv->add_option("--threshold", o.thresholds, "Half-line thresholds (rhc)")->delimiter(',');
  inv->add_option("--side", o.sides, "above | below per step (rhc)")->delimiter(',');
  inv->add_option("--x", o.xs, "Evaluation points (mollifier)")->delimiter(',');
  common(inv);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  Context ctx(o);
  auto start = std::chrono::steady_clock::now();
  Outcome outcome;
  try {
    if (command == "inspect") outcome = do_inspect(ctx);
    else if (command == "decompose") outcome = do_decompose(ctx);
    else if (command == "fourier") outcome = do_fourier(ctx);
    else if (command == "hit") outcome = do_hit(ctx);
    else if (command == "reduce") outcome = do_reduce(ctx);
    else if (command == "verify") outcome = do_verify(ctx);
    else outcome = do_invariance(ctx);
  } catch (const RefusalError& e) {
    err << "sethit: refused: " << e.what() << "\n";
    outcome = {{{"reason", e.what()}}, Status::refused};
  } catch (const BudgetError& e) {
    err << "sethit: refused: " << e.what() << "\n";
    outcome = {{{"reason", e.what()}}, Status::refused};
  } catch (const Error& e) {
    err << "sethit: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "sethit: " << e.what() << "\n";
    return kUsage;
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json report;
  report["command"] = args;
  report["inputs"] = ctx.inputs;
  report["seed"] = o.seed;
  report["exactness"] = overall_exactness(outcome.results, ctx.exactness);
  report["status"] = status_name(outcome.status);
  report["results"] = outcome.results;
  report["wall_time_s"] = wall;
  if (o.table) {
    flatten(report, "", out);
  } else {
    out << report.dump(2) << "\n";
  }
  return outcome.status == Status::ok ? kOk : kViolated;
}

}  // namespace sethit::cli
