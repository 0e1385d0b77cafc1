#include "sethit/engine.hpp"

#include <algorithm>
#include <thread>
#include <unordered_map>

namespace sethit {

Engine parse_engine(std::string_view name) {
  if (name == "auto") return Engine::automatic;
  if (name == "enumerate") return Engine::enumerate;
  if (name == "dp") return Engine::dp;
  throw ValidationError("unknown engine '" + std::string(name) + "' (expected auto, enumerate or dp)");
}

std::string_view engine_name(Engine e) {
  switch (e) {
    case Engine::automatic: return "auto";
    case Engine::enumerate: return "enumerate";
    case Engine::dp: return "dp";
  }
  return "?";
}

namespace {

void check_instance(const StepDistribution& P, std::span<const FunctionSpec> fns) {
  if (fns.size() != P.steps())
    throw ValidationError("need one function per step (" + std::to_string(P.steps()) + "), got " + std::to_string(fns.size()));
  for (const auto& f : fns) {
    if (f.alphabet() != P.alphabet()) throw ValidationError("function alphabet does not match the distribution");
    if (f.n() != fns[0].n()) throw ValidationError("functions disagree on n");
  }
}

constexpr std::uint64_t kBlock = 4096;

template <class T>
T enumerate_block(const StepDistribution& P, std::span<const FunctionSpec> fns, std::uint64_t begin, std::uint64_t end) {
  std::size_t n = fns[0].n(), l = P.steps(), m = P.symbol_count();
  const auto& support = P.support();
  const auto& w = P.values<T>();
  std::size_t s = support.size();
  std::vector<std::vector<std::size_t>> tuples(s, std::vector<std::size_t>(l));
  for (std::size_t k = 0; k < s; ++k) decode_mixed_radix(support[k], m, tuples[k]);

  std::vector<std::size_t> pick(n);
  decode_mixed_radix(begin, s, pick);
  std::vector<std::vector<std::size_t>> x(l, std::vector<std::size_t>(n));
  std::vector<double> partial;
  T acc = 0;
  for (std::uint64_t leaf = begin; leaf < end; ++leaf) {
    T term = 1;
    for (std::size_t c = 0; c < n; ++c) {
      term *= w[support[pick[c]]];
      for (std::size_t j = 0; j < l; ++j) x[j][c] = tuples[pick[c]][j];
    }
    for (std::size_t j = 0; j < l && term != 0; ++j) term *= fns[j].value_as<T>(x[j]);
    if constexpr (std::is_same_v<T, double>) partial.push_back(term);
    else acc += term;
    next_tuple(pick, s);
  }
  if constexpr (std::is_same_v<T, double>) return pairwise_sum(partial);
  else return acc;
}

template <class T>
T enumerate_impl(const StepDistribution& P, std::span<const FunctionSpec> fns, std::uint64_t budget, unsigned threads) {
  std::size_t n = fns[0].n();
  std::uint64_t leaves = checked_power(P.support().size(), n, budget);
  std::uint64_t blocks = (leaves + kBlock - 1) / kBlock;
  std::vector<T> sums(blocks, T(0));
  auto work = [&](unsigned worker, unsigned workers) {
    for (std::uint64_t b = worker; b < blocks; b += workers)
      sums[b] = enumerate_block<T>(P, fns, b * kBlock, std::min(leaves, (b + 1) * kBlock));
  };
  unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::uint64_t>(blocks, 1))));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
    for (auto& th : pool) th.join();
  }
  if constexpr (std::is_same_v<T, double>) {
    return pairwise_sum(sums);
  } else {
    T total = 0;
    for (const auto& v : sums) total += v;
    return total;
  }
}

}  // namespace

bool histogram_compatible(std::span<const FunctionSpec> fns) {
  std::vector<std::size_t> anchors;
  for (const auto& f : fns) {
    if (!f.histogram_compatible()) return false;
    auto a = f.anchor_coordinates();
    anchors.insert(anchors.end(), a.begin(), a.end());
  }
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  return anchors.size() <= 2;
}

Number enumerate_expectation(const StepDistribution& P, std::span<const FunctionSpec> fns, std::uint64_t budget,
                             unsigned threads) {
  check_instance(P, fns);
  bool exact = P.exact() && std::all_of(fns.begin(), fns.end(), [](const FunctionSpec& f) { return f.exact(); });
  if (exact) return Number(enumerate_impl<Rational>(P, fns, budget, threads));
  return Number(enumerate_impl<double>(P, fns, budget, threads));
}

// ---------------------------------------------------------------------------
// Histogram DP

namespace {

struct Counter {
  std::size_t fn;
  std::size_t symbol;   // anchored: counted symbol
  std::uint64_t radix;  // anchored: cap + 1; mod_linear: modulus
  bool residue;
};

struct Layout {
  std::vector<Counter> counters;
  std::vector<std::size_t> anchors;      // coordinates enumerated explicitly
  std::uint64_t anchor_radix = 1;        // |supp|^|anchors|
  std::vector<std::uint64_t> stride;     // per counter
  std::uint64_t anchor_stride = 1;
};

Layout build_layout(const StepDistribution& P, std::span<const FunctionSpec> fns) {
  Layout L;
  std::size_t n = fns[0].n(), m = P.symbol_count();
  for (std::size_t j = 0; j < fns.size(); ++j) {
    const auto& f = fns[j];
    if (f.kind() == FunctionSpec::Kind::mod_linear) {
      L.counters.push_back({j, 0, static_cast<std::uint64_t>(f.mod_data().modulus), true});
      continue;
    }
    const auto& d = f.symmetric_data();
    long counted = static_cast<long>(std::count(d.ignored.begin(), d.ignored.end(), false));
    for (std::size_t a = 0; a < m; ++a) {
      bool relevant = false;
      long max_hi = -1;
      for (const auto& c : d.clauses) {
        relevant = relevant || c.windows[a].lo > 0 || c.windows[a].hi < counted;
        max_hi = std::max(max_hi, c.windows[a].hi);
      }
      if (!relevant) continue;
      long cap = std::min(max_hi, counted) + 1;
      L.counters.push_back({j, a, static_cast<std::uint64_t>(cap + 1), false});
    }
    auto anchors = f.anchor_coordinates();
    L.anchors.insert(L.anchors.end(), anchors.begin(), anchors.end());
  }
  std::sort(L.anchors.begin(), L.anchors.end());
  L.anchors.erase(std::unique(L.anchors.begin(), L.anchors.end()), L.anchors.end());
  if (L.anchors.size() > 2) throw ValidationError("histogram engine supports at most two anchor coordinates");
  L.anchor_radix = checked_power(P.support().size(), L.anchors.size(), ~std::uint64_t{0});
  (void)n;

  std::uint64_t stride = 1;
  for (const auto& c : L.counters) {
    L.stride.push_back(stride);
    if (stride > ~std::uint64_t{0} / c.radix) throw BudgetError("histogram state space does not fit in 64 bits");
    stride *= c.radix;
  }
  L.anchor_stride = stride;
  if (stride > ~std::uint64_t{0} / std::max<std::uint64_t>(L.anchor_radix, 1))
    throw BudgetError("histogram state space does not fit in 64 bits");
  return L;
}

// Effect of one coordinate on the counters, per support tuple: a list of
// (counter, amount). Empty lists everywhere mean the coordinate is inert.
using Effect = std::vector<std::vector<std::pair<std::size_t, long>>>;

Effect coordinate_effect(const Layout& L, std::span<const FunctionSpec> fns,
                         const std::vector<std::vector<std::size_t>>& tuples, std::size_t c) {
  Effect e(tuples.size());
  for (std::size_t k = 0; k < L.counters.size(); ++k) {
    const auto& ctr = L.counters[k];
    const auto& f = fns[ctr.fn];
    for (std::size_t t = 0; t < tuples.size(); ++t) {
      std::size_t a = tuples[t][ctr.fn];
      if (ctr.residue) {
        const auto& d = f.mod_data();
        long delta = (d.coefficients[c] * d.symbol_map[a]) % d.modulus;
        if (delta != 0) e[t].emplace_back(k, delta);
      } else if (!f.symmetric_data().ignored[c] && a == ctr.symbol) {
        e[t].emplace_back(k, 1);
      }
    }
  }
  return e;
}

bool inert(const Effect& e) {
  return std::all_of(e.begin(), e.end(), [](const auto& v) { return v.empty(); });
}

std::uint64_t apply_effect(const Layout& L, std::uint64_t state, const std::vector<std::pair<std::size_t, long>>& delta) {
  for (const auto& [k, amount] : delta) {
    const auto& ctr = L.counters[k];
    std::uint64_t digit = (state / L.stride[k]) % ctr.radix;
    std::uint64_t next;
    if (ctr.residue) next = (digit + static_cast<std::uint64_t>(amount)) % ctr.radix;
    else next = std::min<std::uint64_t>(digit + static_cast<std::uint64_t>(amount), ctr.radix - 1);
    state = state - digit * L.stride[k] + next * L.stride[k];
  }
  return state;
}

template <class Acc>
void add_to(std::unordered_map<std::uint64_t, Acc>& map, std::uint64_t key, const Acc& v) {
  auto [it, fresh] = map.try_emplace(key, v);
  if (!fresh) it->second += v;
}

bool accepts(const Layout& L, std::span<const FunctionSpec> fns, const std::vector<std::vector<std::size_t>>& tuples,
             std::uint64_t state) {
  std::uint64_t anchor_code = state / L.anchor_stride;
  std::vector<std::size_t> anchor_pick(L.anchors.size());
  decode_mixed_radix(anchor_code, tuples.size(), anchor_pick);
  auto digit = [&](std::size_t k) { return static_cast<long>((state / L.stride[k]) % L.counters[k].radix); };

  for (std::size_t j = 0; j < fns.size(); ++j) {
    const auto& f = fns[j];
    if (f.kind() == FunctionSpec::Kind::mod_linear) {
      for (std::size_t k = 0; k < L.counters.size(); ++k)
        if (L.counters[k].fn == j && digit(k) != f.mod_data().residue) return false;
      continue;
    }
    bool any = false;
    for (const auto& clause : f.symmetric_data().clauses) {
      if (clause.anchor) {
        auto pos = std::find(L.anchors.begin(), L.anchors.end(), clause.anchor->coordinate) - L.anchors.begin();
        if (tuples[anchor_pick[pos]][j] != clause.anchor->symbol) continue;
      }
      bool ok = true;
      for (std::size_t k = 0; k < L.counters.size() && ok; ++k) {
        if (L.counters[k].fn != j) continue;
        long v = digit(k);
        const auto& w = clause.windows[L.counters[k].symbol];
        ok = v >= w.lo && v <= w.hi;
      }
      if (ok) {
        any = true;
        break;
      }
    }
    if (!any) return false;
  }
  return true;
}

template <class Acc>
std::pair<Acc, std::size_t> histogram_run(const StepDistribution& P, std::span<const FunctionSpec> fns,
                                          const std::vector<Acc>& weight, std::uint64_t budget) {
  Layout L = build_layout(P, fns);
  std::size_t n = fns[0].n(), m = P.symbol_count();
  const auto& support = P.support();
  std::vector<std::vector<std::size_t>> tuples(support.size(), std::vector<std::size_t>(P.steps()));
  for (std::size_t k = 0; k < support.size(); ++k) decode_mixed_radix(support[k], m, tuples[k]);

  std::unordered_map<std::uint64_t, Acc> states;
  std::vector<std::size_t> pick(L.anchors.size(), 0);
  for (std::uint64_t code = 0; code < L.anchor_radix; ++code) {
    std::uint64_t state = code * L.anchor_stride;
    Acc w = 1;
    for (std::size_t p = 0; p < L.anchors.size(); ++p) {
      auto effect = coordinate_effect(L, fns, tuples, L.anchors[p]);
      state = apply_effect(L, state, effect[pick[p]]);
      w *= weight[pick[p]];
    }
    add_to(states, state, w);
    next_tuple(pick, tuples.size());
  }
  std::size_t processed = L.anchors.size();

  for (std::size_t c = 0; c < n; ++c) {
    if (std::binary_search(L.anchors.begin(), L.anchors.end(), c)) continue;
    auto effect = coordinate_effect(L, fns, tuples, c);
    if (inert(effect)) continue;
    ++processed;
    std::unordered_map<std::uint64_t, Acc> next;
    next.reserve(states.size() * 2);
    for (const auto& [state, acc] : states)
      for (std::size_t t = 0; t < tuples.size(); ++t) add_to(next, apply_effect(L, state, effect[t]), Acc(acc * weight[t]));
    states = std::move(next);
    if (states.size() > budget) throw BudgetError("histogram state count exceeds budget");
  }

  Acc total = 0;
  std::vector<std::uint64_t> keys;
  keys.reserve(states.size());
  for (const auto& kv : states) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  for (auto key : keys)
    if (accepts(L, fns, tuples, key)) total += states[key];
  return {total, processed};
}

}  // namespace

Number histogram_expectation(const StepDistribution& P, std::span<const FunctionSpec> fns, std::uint64_t budget) {
  check_instance(P, fns);
  if (!histogram_compatible(fns))
    throw ValidationError("instance is not histogram-compatible (anchored_symmetric/mod_linear with at most two anchors)");
  for (const auto& f : fns)
    if (f.trivially_zero()) return P.exact() ? Number(Rational(0)) : Number(0.0);

  if (P.exact()) {
    // Integer numerators over a common denominator keep the DP in mpz.
    BigInt D = 1;
    for (auto idx : P.support()) {
      BigInt d = denominator(P.exact_weights()[idx]);
      D = D / boost::multiprecision::gcd(D, d) * d;
    }
    std::vector<BigInt> num;
    for (auto idx : P.support()) {
      Rational scaled = P.exact_weights()[idx] * Rational(D);
      num.push_back(numerator(scaled));
    }
    auto [total, processed] = histogram_run<BigInt>(P, fns, num, budget);
    BigInt denom = boost::multiprecision::pow(D, static_cast<unsigned>(processed));
    return Number(Rational(total, denom));
  }
  std::vector<double> w;
  for (auto idx : P.support()) w.push_back(P.weight(idx));
  return Number(histogram_run<double>(P, fns, w, budget).first);
}

Number product_expectation(const StepDistribution& P, std::span<const FunctionSpec> fns, const EngineOptions& opt) {
  switch (opt.engine) {
    case Engine::enumerate:
      return enumerate_expectation(P, fns, opt.budget, opt.threads);
    case Engine::dp:
      return histogram_expectation(P, fns, opt.budget);
    case Engine::automatic:
      break;
  }
  check_instance(P, fns);
  if (histogram_compatible(fns)) return histogram_expectation(P, fns, opt.budget);
  return enumerate_expectation(P, fns, opt.budget, opt.threads);
}

}  // namespace sethit
