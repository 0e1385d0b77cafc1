#include "sethit/function.hpp"

#include "sethit/dist_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sethit {

using nlohmann::json;

std::size_t Restriction::size() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.has_value(); }));
}

std::string Restriction::str(const Alphabet& alphabet) const {
  std::string out;
  for (std::size_t c = 0; c < entries.size(); ++c) {
    if (!entries[c]) continue;
    if (!out.empty()) out += ", ";
    out += "x" + std::to_string(c + 1) + "=" + alphabet.symbol(*entries[c]);
  }
  return out.empty() ? "(none)" : out;
}

FunctionSpec::FunctionSpec(Alphabet alphabet, std::size_t n, Kind kind)
    : alphabet_(std::move(alphabet)), n_(n), kind_(kind) {
  if (n_ < 1) throw ValidationError("functions need at least one coordinate");
}

FunctionSpec FunctionSpec::table(Alphabet alphabet, std::size_t n, std::vector<double> values) {
  FunctionSpec f(std::move(alphabet), n, Kind::table);
  auto size = checked_power(f.symbol_count(), n, kDefaultBudget);
  if (values.size() != size) throw ValidationError("table has " + std::to_string(values.size()) + " values, expected " + std::to_string(size));
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("table values must lie in [0, 1]");
  f.table_.values = std::move(values);
  return f;
}

FunctionSpec FunctionSpec::table(Alphabet alphabet, std::size_t n, std::vector<Rational> values) {
  FunctionSpec f(std::move(alphabet), n, Kind::table);
  auto size = checked_power(f.symbol_count(), n, kDefaultBudget);
  if (values.size() != size) throw ValidationError("table has " + std::to_string(values.size()) + " values, expected " + std::to_string(size));
  f.table_.values.reserve(size);
  for (const auto& v : values) {
    if (v < 0 || v > 1) throw ValidationError("table values must lie in [0, 1]");
    f.table_.values.push_back(to_double(v));
  }
  f.table_.exact = std::move(values);
  return f;
}

FunctionSpec FunctionSpec::anchored_symmetric(Alphabet alphabet, std::size_t n, std::vector<SymmetricClause> clauses,
                                              std::vector<bool> ignored) {
  FunctionSpec f(std::move(alphabet), n, Kind::anchored_symmetric);
  if (ignored.empty()) ignored.assign(n, false);
  if (ignored.size() != n) throw ValidationError("ignored mask has the wrong length");
  for (const auto& c : clauses) {
    if (c.windows.size() != f.symbol_count()) throw ValidationError("a clause needs one window per symbol");
    if (c.anchor) {
      if (c.anchor->coordinate >= n || c.anchor->symbol >= f.symbol_count())
        throw ValidationError("anchor outside the domain");
      if (ignored[c.anchor->coordinate]) throw ValidationError("anchor on an ignored coordinate");
    }
  }
  f.symmetric_ = {std::move(clauses), std::move(ignored)};
  return f;
}

FunctionSpec FunctionSpec::junta(Alphabet alphabet, std::size_t n, std::vector<Anchor> constraints) {
  FunctionSpec f(std::move(alphabet), n, Kind::junta);
  for (const auto& c : constraints)
    if (c.coordinate >= n || c.symbol >= f.symbol_count()) throw ValidationError("junta constraint outside the domain");
  std::sort(constraints.begin(), constraints.end(), [](const Anchor& a, const Anchor& b) {
    return std::tie(a.coordinate, a.symbol) < std::tie(b.coordinate, b.symbol);
  });
  constraints.erase(std::unique(constraints.begin(), constraints.end()), constraints.end());
  for (std::size_t k = 1; k < constraints.size(); ++k)
    if (constraints[k].coordinate == constraints[k - 1].coordinate) f.junta_.contradictory = true;
  f.junta_.constraints = std::move(constraints);
  return f;
}

FunctionSpec FunctionSpec::mod_linear(Alphabet alphabet, std::size_t n, long modulus, std::vector<long> coefficients,
                                      long residue, std::vector<long> symbol_map) {
  FunctionSpec f(std::move(alphabet), n, Kind::mod_linear);
  if (modulus < 1) throw ValidationError("modulus must be positive");
  if (coefficients.size() != n) throw ValidationError("mod_linear needs one coefficient per coordinate");
  if (symbol_map.empty())
    for (std::size_t a = 0; a < f.symbol_count(); ++a) symbol_map.push_back(static_cast<long>(a));
  if (symbol_map.size() != f.symbol_count()) throw ValidationError("symbol map has the wrong length");
  auto reduce = [modulus](long v) { return ((v % modulus) + modulus) % modulus; };
  for (auto& c : coefficients) c = reduce(c);
  for (auto& s : symbol_map) s = reduce(s);
  f.mod_ = {modulus, std::move(coefficients), reduce(residue), std::move(symbol_map)};
  return f;
}

FunctionSpec FunctionSpec::constant(Alphabet alphabet, std::size_t n, bool one) {
  std::vector<SymmetricClause> clauses;
  if (one) clauses.push_back({std::nullopt, std::vector<CountWindow>(alphabet.size(), {0, static_cast<long>(n)})});
  return anchored_symmetric(std::move(alphabet), n, std::move(clauses));
}

FunctionSpec FunctionSpec::dictator(Alphabet alphabet, std::size_t n, std::size_t coordinate, std::size_t symbol) {
  return junta(std::move(alphabet), n, {{coordinate, symbol}});
}

bool FunctionSpec::exact() const noexcept { return kind_ != Kind::table || table_.exact.has_value(); }

const TableValues& FunctionSpec::table_data() const {
  if (kind_ != Kind::table) throw ValidationError("function is not a table");
  return table_;
}
const AnchoredSymmetric& FunctionSpec::symmetric_data() const {
  if (kind_ != Kind::anchored_symmetric) throw ValidationError("function is not anchored_symmetric");
  return symmetric_;
}
const JuntaIndicator& FunctionSpec::junta_data() const {
  if (kind_ != Kind::junta) throw ValidationError("function is not a junta");
  return junta_;
}
const ModLinear& FunctionSpec::mod_data() const {
  if (kind_ != Kind::mod_linear) throw ValidationError("function is not mod_linear");
  return mod_;
}

void FunctionSpec::check_point(std::span<const std::size_t> x) const {
  if (x.size() != n_) throw ValidationError("point has the wrong number of coordinates");
  for (auto a : x)
    if (a >= symbol_count()) throw ValidationError("symbol outside the alphabet");
}

bool FunctionSpec::indicator_value(std::span<const std::size_t> x) const {
  switch (kind_) {
    case Kind::anchored_symmetric: {
      std::vector<long> counts(symbol_count(), 0);
      for (std::size_t c = 0; c < n_; ++c)
        if (!symmetric_.ignored[c]) ++counts[x[c]];
      for (const auto& clause : symmetric_.clauses) {
        if (clause.anchor && x[clause.anchor->coordinate] != clause.anchor->symbol) continue;
        bool ok = true;
        for (std::size_t a = 0; a < counts.size() && ok; ++a)
          ok = counts[a] >= clause.windows[a].lo && counts[a] <= clause.windows[a].hi;
        if (ok) return true;
      }
      return false;
    }
    case Kind::junta:
      if (junta_.contradictory) return false;
      return std::all_of(junta_.constraints.begin(), junta_.constraints.end(),
                         [&](const Anchor& c) { return x[c.coordinate] == c.symbol; });
    case Kind::mod_linear: {
      long s = 0;
      for (std::size_t c = 0; c < n_; ++c) s = (s + mod_.coefficients[c] * mod_.symbol_map[x[c]]) % mod_.modulus;
      return s == mod_.residue;
    }
    case Kind::table:
      break;
  }
  throw Error("indicator_value on a table");
}

double FunctionSpec::value(std::span<const std::size_t> x) const {
  check_point(x);
  if (kind_ == Kind::table) return table_.values[encode_mixed_radix(x, symbol_count())];
  return indicator_value(x) ? 1.0 : 0.0;
}

Rational FunctionSpec::exact_value(std::span<const std::size_t> x) const {
  check_point(x);
  if (kind_ == Kind::table) {
    if (!table_.exact) throw Error("table has float values");
    return (*table_.exact)[encode_mixed_radix(x, symbol_count())];
  }
  return indicator_value(x) ? Rational(1) : Rational(0);
}

template <class T>
std::vector<T> FunctionSpec::tabulate(std::uint64_t budget) const {
  auto size = checked_power(symbol_count(), n_, budget);
  if (kind_ == Kind::table) {
    if constexpr (std::is_same_v<T, double>) {
      return table_.values;
    } else {
      if (!table_.exact) throw Error("table has float values");
      return *table_.exact;
    }
  }
  std::vector<T> out(size);
  std::vector<std::size_t> x(n_, 0);
  for (std::uint64_t idx = 0; idx < size; ++idx) {
    out[idx] = indicator_value(x) ? T(1) : T(0);
    next_tuple(x, symbol_count());
  }
  return out;
}

template std::vector<double> FunctionSpec::tabulate<double>(std::uint64_t) const;
template std::vector<Rational> FunctionSpec::tabulate<Rational>(std::uint64_t) const;

FunctionSpec FunctionSpec::to_table(std::uint64_t budget) const {
  FunctionSpec out = exact() ? table(alphabet_, n_, tabulate<Rational>(budget)) : table(alphabet_, n_, tabulate<double>(budget));
  out.name_ = name_;
  return out;
}

std::vector<std::size_t> FunctionSpec::anchor_coordinates() const {
  std::vector<std::size_t> out;
  if (kind_ == Kind::anchored_symmetric)
    for (const auto& c : symmetric_.clauses)
      if (c.anchor) out.push_back(c.anchor->coordinate);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool FunctionSpec::histogram_compatible() const noexcept {
  return kind_ == Kind::anchored_symmetric || kind_ == Kind::mod_linear;
}

bool FunctionSpec::trivially_zero() const noexcept {
  if (kind_ == Kind::anchored_symmetric) return symmetric_.clauses.empty();
  if (kind_ == Kind::junta) return junta_.contradictory;
  return false;
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
std::vector<T> restrict_table(const std::vector<T>& values, std::size_t m, std::size_t n, const Restriction& R) {
  std::vector<T> out(values.size());
  std::vector<std::size_t> x(n, 0), y(n);
  for (std::uint64_t idx = 0; idx < values.size(); ++idx) {
    for (std::size_t c = 0; c < n; ++c) y[c] = R.entries[c] ? *R.entries[c] : x[c];
    out[idx] = values[encode_mixed_radix(y, m)];
    next_tuple(x, m);
  }
  return out;
}

}  // namespace

FunctionSpec restrict(const FunctionSpec& f, const Restriction& R) {
  std::size_t n = f.n(), m = f.symbol_count();
  if (R.entries.size() != n) throw ValidationError("restriction length does not match n");
  for (const auto& e : R.entries)
    if (e && *e >= m) throw ValidationError("restriction symbol outside the alphabet");
  if (R.size() == 0) return f;

  FunctionSpec out = f;
  switch (f.kind()) {
    case FunctionSpec::Kind::table: {
      const auto& t = f.table_data();
      if (t.exact) out = FunctionSpec::table(f.alphabet(), n, restrict_table(*t.exact, m, n, R));
      else out = FunctionSpec::table(f.alphabet(), n, restrict_table(t.values, m, n, R));
      break;
    }
    case FunctionSpec::Kind::anchored_symmetric: {
      auto data = f.symmetric_data();
      for (std::size_t c = 0; c < n; ++c) {
        if (!R.entries[c] || data.ignored[c]) continue;
        std::size_t a = *R.entries[c];
        std::vector<SymmetricClause> kept;
        for (auto clause : data.clauses) {
          if (clause.anchor && clause.anchor->coordinate == c) {
            if (clause.anchor->symbol != a) continue;
            clause.anchor.reset();
          }
          auto& w = clause.windows[a];
          w.lo = std::max(w.lo - 1, 0L);
          w.hi -= 1;
          if (w.hi < 0) continue;
          kept.push_back(std::move(clause));
        }
        data.clauses = std::move(kept);
        data.ignored[c] = true;
      }
      out = FunctionSpec::anchored_symmetric(f.alphabet(), n, std::move(data.clauses), std::move(data.ignored));
      break;
    }
    case FunctionSpec::Kind::junta: {
      const auto& data = f.junta_data();
      std::vector<Anchor> kept;
      bool contradictory = data.contradictory;
      for (const auto& c : data.constraints) {
        if (!R.entries[c.coordinate]) kept.push_back(c);
        else if (*R.entries[c.coordinate] != c.symbol) contradictory = true;
      }
      out = FunctionSpec::junta(f.alphabet(), n, std::move(kept));
      if (contradictory) out = FunctionSpec::junta(f.alphabet(), n, {{0, 0}, {0, 1 % m}});
      if (contradictory && m == 1) out = FunctionSpec::constant(f.alphabet(), n, false);
      break;
    }
    case FunctionSpec::Kind::mod_linear: {
      auto data = f.mod_data();
      for (std::size_t c = 0; c < n; ++c) {
        if (!R.entries[c]) continue;
        data.residue -= data.coefficients[c] * data.symbol_map[*R.entries[c]];
        data.coefficients[c] = 0;
      }
      out = FunctionSpec::mod_linear(f.alphabet(), n, data.modulus, data.coefficients, data.residue, data.symbol_map);
      break;
    }
  }
  out.set_name(f.name());
  return out;
}

FunctionSpec max_operator(const FunctionSpec& f, std::size_t i, std::size_t y, std::size_t z) {
  if (f.kind() != FunctionSpec::Kind::table) throw ValidationError("max_operator needs a table function");
  std::size_t n = f.n(), m = f.symbol_count();
  if (i >= n || y >= m || z >= m) throw ValidationError("max_operator arguments out of range");
  Restriction Ry = Restriction::none(n), Rz = Restriction::none(n);
  Ry.entries[i] = y;
  Rz.entries[i] = z;
  auto fy = restrict(f, Ry), fz = restrict(f, Rz);
  if (f.exact()) {
    auto a = fy.table_data().exact.value(), b = fz.table_data().exact.value();
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::max(a[k], b[k]);
    return FunctionSpec::table(f.alphabet(), n, std::move(a));
  }
  auto a = fy.table_data().values;
  const auto& b = fz.table_data().values;
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::max(a[k], b[k]);
  return FunctionSpec::table(f.alphabet(), n, std::move(a));
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::size_t symbol_from_json(const Alphabet& alphabet, const json& j) {
  if (j.is_string()) return alphabet.index_of(j.get<std::string>());
  if (j.is_number_integer()) return alphabet.index_of(std::to_string(j.get<long>()));
  throw ParseError(0, "symbol must be a string or integer");
}

std::size_t coordinate_from_json(const json& j, std::size_t n) {
  if (!j.is_number_integer()) throw ParseError(0, "coordinate must be an integer");
  long c = j.get<long>();
  if (c < 1 || static_cast<std::size_t>(c) > n) throw ValidationError("coordinate " + std::to_string(c) + " outside 1.." + std::to_string(n));
  return static_cast<std::size_t>(c - 1);
}

Anchor anchor_from_json(const Alphabet& alphabet, const json& j, std::size_t n) {
  if (j.is_array() && j.size() == 2) return {coordinate_from_json(j[0], n), symbol_from_json(alphabet, j[1])};
  if (j.is_object()) return {coordinate_from_json(j.at("coordinate"), n), symbol_from_json(alphabet, j.at("symbol"))};
  throw ParseError(0, "anchor must be [coordinate, symbol] or {coordinate, symbol}");
}

json value_to_json(const Number& v) {
  if (v.exact()) return v.str();
  return v.value();
}

}  // namespace

FunctionSpec parse_function_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("invalid JSON: ") + e.what());
  }
  try {
    auto n = doc.at("n").get<std::size_t>();
    std::vector<std::string> symbols;
    for (const auto& s : doc.at("alphabet")) symbols.push_back(s.is_string() ? s.get<std::string>() : s.dump());
    Alphabet alphabet(std::move(symbols));
    auto kind = doc.at("kind").get<std::string>();
    std::size_t m = alphabet.size();
    FunctionSpec f = FunctionSpec::constant(alphabet, n, false);

    if (kind == "table") {
      const auto& vals = doc.at("values");
      bool exact = std::all_of(vals.begin(), vals.end(), [](const json& v) {
        return v.is_string() || v.is_number_integer();
      });
      if (exact) {
        std::vector<Rational> q;
        for (const auto& v : vals) q.push_back(v.is_string() ? parse_rational(v.get<std::string>()) : Rational(v.get<long>()));
        f = FunctionSpec::table(alphabet, n, std::move(q));
      } else {
        std::vector<double> d;
        for (const auto& v : vals) d.push_back(v.is_string() ? to_double(parse_rational(v.get<std::string>())) : v.get<double>());
        f = FunctionSpec::table(alphabet, n, std::move(d));
      }
    } else if (kind == "anchored_symmetric") {
      std::vector<SymmetricClause> clauses;
      for (const auto& c : doc.at("clauses")) {
        SymmetricClause clause{std::nullopt, std::vector<CountWindow>(m, {0, static_cast<long>(n)})};
        if (c.contains("anchor") && !c.at("anchor").is_null()) clause.anchor = anchor_from_json(alphabet, c.at("anchor"), n);
        if (c.contains("windows"))
          for (const auto& [sym, w] : c.at("windows").items())
            clause.windows[alphabet.index_of(sym)] = {w.at(0).get<long>(), w.at(1).get<long>()};
        clauses.push_back(std::move(clause));
      }
      std::vector<bool> ignored(n, false);
      if (doc.contains("ignored"))
        for (const auto& c : doc.at("ignored")) ignored[coordinate_from_json(c, n)] = true;
      f = FunctionSpec::anchored_symmetric(alphabet, n, std::move(clauses), std::move(ignored));
    } else if (kind == "junta") {
      std::vector<Anchor> constraints;
      for (const auto& c : doc.at("constraints")) constraints.push_back(anchor_from_json(alphabet, c, n));
      f = FunctionSpec::junta(alphabet, n, std::move(constraints));
    } else if (kind == "mod_linear") {
      std::vector<long> map;
      if (doc.contains("symbol_map")) {
        map.assign(m, 0);
        for (const auto& [sym, v] : doc.at("symbol_map").items()) map[alphabet.index_of(sym)] = v.get<long>();
      }
      f = FunctionSpec::mod_linear(alphabet, n, doc.at("modulus").get<long>(), doc.at("coefficients").get<std::vector<long>>(),
                                   doc.at("residue").get<long>(), std::move(map));
    } else {
      throw ParseError(0, "unknown function kind '" + kind + "'");
    }
    if (doc.contains("name")) f.set_name(doc.at("name").get<std::string>());
    return f;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed function spec: ") + e.what());
  }
}

FunctionSpec load_function_spec(const std::string& path) { return parse_function_spec(read_text_file(path)); }

std::string serialize_function_spec(const FunctionSpec& f) {
  json doc;
  if (!f.name().empty()) doc["name"] = f.name();
  doc["n"] = f.n();
  doc["alphabet"] = f.alphabet().symbols();
  const auto& alph = f.alphabet();
  switch (f.kind()) {
    case FunctionSpec::Kind::table: {
      doc["kind"] = "table";
      json vals = json::array();
      const auto& t = f.table_data();
      for (std::size_t k = 0; k < t.values.size(); ++k)
        vals.push_back(value_to_json(t.exact ? Number((*t.exact)[k]) : Number(t.values[k])));
      doc["values"] = std::move(vals);
      break;
    }
    case FunctionSpec::Kind::anchored_symmetric: {
      doc["kind"] = "anchored_symmetric";
      const auto& d = f.symmetric_data();
      json clauses = json::array();
      for (const auto& c : d.clauses) {
        json jc;
        if (c.anchor) jc["anchor"] = {c.anchor->coordinate + 1, alph.symbol(c.anchor->symbol)};
        json w = json::object();
        for (std::size_t a = 0; a < c.windows.size(); ++a) w[alph.symbol(a)] = {c.windows[a].lo, c.windows[a].hi};
        jc["windows"] = std::move(w);
        clauses.push_back(std::move(jc));
      }
      doc["clauses"] = std::move(clauses);
      json ignored = json::array();
      for (std::size_t c = 0; c < d.ignored.size(); ++c)
        if (d.ignored[c]) ignored.push_back(c + 1);
      doc["ignored"] = std::move(ignored);
      break;
    }
    case FunctionSpec::Kind::junta: {
      doc["kind"] = "junta";
      json cons = json::array();
      const auto& d = f.junta_data();
      for (const auto& c : d.constraints) cons.push_back({c.coordinate + 1, alph.symbol(c.symbol)});
      doc["constraints"] = std::move(cons);
      break;
    }
    case FunctionSpec::Kind::mod_linear: {
      doc["kind"] = "mod_linear";
      const auto& d = f.mod_data();
      doc["modulus"] = d.modulus;
      doc["coefficients"] = d.coefficients;
      doc["residue"] = d.residue;
      json map = json::object();
      for (std::size_t a = 0; a < d.symbol_map.size(); ++a) map[alph.symbol(a)] = d.symbol_map[a];
      doc["symbol_map"] = std::move(map);
      break;
    }
  }
  return doc.dump(2);
}

}  // namespace sethit
