#include "sethit/dist_io.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace sethit {

namespace {

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

bool is_decimal(const std::string& tok) {
  return tok.find_first_of(".eE") != std::string::npos && tok.find('/') == std::string::npos;
}

double parse_decimal(const std::string& tok, std::size_t line) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw ParseError(line, "bad weight '" + tok + "'");
  return v;
}

}  // namespace

StepDistribution parse_distribution(std::string_view text) {
  std::optional<Alphabet> alphabet;
  std::optional<std::size_t> steps;
  std::string name;
  struct Pending {
    std::vector<std::size_t> symbols;
    std::string weight;
    std::size_t line;
  };
  std::vector<Pending> entries;

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;

    auto hash = raw.find('#');
    if (hash != std::string_view::npos) {
      auto comment = tokenize(raw.substr(hash + 1));
      if (comment.size() >= 2 && comment[0] == "name:") {
        name = std::string(raw.substr(hash + 1));
        name = name.substr(name.find("name:") + 5);
        while (!name.empty() && name.front() == ' ') name.erase(name.begin());
        while (!name.empty() && (name.back() == ' ' || name.back() == '\r')) name.pop_back();
      }
      raw = raw.substr(0, hash);
    }
    auto tok = tokenize(raw);
    if (tok.empty()) continue;

    if (tok[0] == "alphabet") {
      if (alphabet) throw ParseError(lineno, "alphabet declared twice");
      try {
        alphabet = Alphabet(std::vector<std::string>(tok.begin() + 1, tok.end()));
      } catch (const ValidationError& e) {
        throw ParseError(lineno, e.what());
      }
    } else if (tok[0] == "steps") {
      if (steps) throw ParseError(lineno, "steps declared twice");
      if (tok.size() != 2) throw ParseError(lineno, "expected 'steps <count>'");
      char* end = nullptr;
      long v = std::strtol(tok[1].c_str(), &end, 10);
      if (*end != '\0' || v < 1) throw ParseError(lineno, "step count must be a positive integer");
      steps = static_cast<std::size_t>(v);
    } else if (tok[0] == "entry") {
      if (!alphabet || !steps) throw ParseError(lineno, "entry before alphabet and steps");
      if (tok.size() != *steps + 2)
        throw ParseError(lineno, "entry needs " + std::to_string(*steps) + " symbols and a weight");
      Pending p{{}, tok.back(), lineno};
      for (std::size_t j = 0; j < *steps; ++j) {
        auto a = alphabet->find(tok[j + 1]);
        if (!a) throw ParseError(lineno, "unknown symbol '" + tok[j + 1] + "'");
        p.symbols.push_back(*a);
      }
      entries.push_back(std::move(p));
    } else {
      throw ParseError(lineno, "unknown directive '" + tok[0] + "'");
    }
  }
  if (!alphabet) throw ParseError(0, "missing alphabet line");
  if (!steps) throw ParseError(0, "missing steps line");

  auto size = checked_power(alphabet->size(), *steps, kDefaultBudget);
  bool floating = false;
  for (const auto& e : entries) floating = floating || is_decimal(e.weight);

  std::map<std::uint64_t, std::size_t> seen;
  std::vector<Rational> exact(floating ? 0 : size, Rational(0));
  std::vector<double> approx(floating ? size : 0, 0.0);
  for (const auto& e : entries) {
    auto idx = encode_mixed_radix(e.symbols, alphabet->size());
    if (auto [it, fresh] = seen.emplace(idx, e.line); !fresh)
      throw ParseError(e.line, "duplicate entry (first on line " + std::to_string(it->second) + ")");
    if (floating) {
      approx[idx] = is_decimal(e.weight) ? parse_decimal(e.weight, e.line) : [&] {
        try {
          return to_double(parse_rational(e.weight));
        } catch (const ParseError& err) {
          throw ParseError(e.line, err.what());
        }
      }();
      if (approx[idx] < 0) throw ValidationError("line " + std::to_string(e.line) + ": negative weight");
    } else {
      try {
        exact[idx] = parse_rational(e.weight);
      } catch (const ParseError& err) {
        throw ParseError(e.line, err.what());
      }
      if (exact[idx] < 0) throw ValidationError("line " + std::to_string(e.line) + ": negative weight");
    }
  }
  if (floating) return StepDistribution(*alphabet, *steps, std::move(approx), name);
  return StepDistribution(*alphabet, *steps, std::move(exact), name);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

StepDistribution load_distribution(const std::string& path) { return parse_distribution(read_text_file(path)); }

std::string serialize_distribution(const StepDistribution& P) {
  std::ostringstream out;
  if (!P.name().empty()) out << "# name: " << P.name() << "\n";
  out << "alphabet";
  for (const auto& s : P.alphabet().symbols()) out << ' ' << s;
  out << "\nsteps " << P.steps() << "\n";
  for (auto idx : P.support()) {
    out << "entry";
    for (auto a : P.tuple(idx)) out << ' ' << P.alphabet().symbol(a);
    out << ' ' << P.weight_number(idx).str() << "\n";
  }
  return out.str();
}

}  // namespace sethit
