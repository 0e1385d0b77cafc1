#include "sethit/numeric.hpp"

#include <cctype>
#include <cmath>
#include <algorithm>
#include <limits>

namespace sethit {

namespace {

bool is_integer_literal(std::string_view s) {
  if (s.empty()) return false;
  std::size_t start = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (start == s.size()) return false;
  for (std::size_t i = start; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  auto slash = text.find('/');
  std::string_view num = text.substr(0, slash);
  std::string_view den = slash == std::string_view::npos ? std::string_view{"1"} : text.substr(slash + 1);
  if (!is_integer_literal(num) || !is_integer_literal(den) || den[0] == '-' || den[0] == '+')
    throw ParseError(0, "not a rational literal: '" + std::string(text) + "'");
  BigInt d{std::string(den)};
  if (d == 0) throw ParseError(0, "zero denominator in '" + std::string(text) + "'");
  std::string n(num);
  if (!n.empty() && n[0] == '+') n.erase(0, 1);
  return Rational(BigInt(n), d);
}

std::string to_string(const Rational& q) { return q.str(); }

double to_double(const Rational& q) { return q.convert_to<double>(); }

Rational exact_from_double(double x) {
  if (!std::isfinite(x)) throw ValidationError("non-finite value cannot be made rational");
  return Rational(x);
}

const Rational& Number::rational() const {
  if (!exact_) throw Error("Number holds a float, not an exact rational");
  return *exact_;
}

std::string Number::str() const {
  if (exact_) return to_string(*exact_);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", approx_);
  return buf;
}

bool operator==(const Number& a, const Number& b) {
  if (a.exact() && b.exact()) return a.rational() == b.rational();
  return a.value() == b.value();
}

bool operator<(const Number& a, const Number& b) {
  if (a.exact() && b.exact()) return a.rational() < b.rational();
  return a.value() < b.value();
}

Number operator+(const Number& a, const Number& b) {
  if (a.exact() && b.exact()) return Number(Rational(a.rational() + b.rational()));
  return Number(a.value() + b.value());
}

Number operator-(const Number& a, const Number& b) {
  if (a.exact() && b.exact()) return Number(Rational(a.rational() - b.rational()));
  return Number(a.value() - b.value());
}

Number operator*(const Number& a, const Number& b) {
  if (a.exact() && b.exact()) return Number(Rational(a.rational() * b.rational()));
  return Number(a.value() * b.value());
}

Number operator/(const Number& a, const Number& b) {
  if (a.exact() && b.exact()) {
    if (b.rational() == 0) throw Error("division by zero");
    return Number(Rational(a.rational() / b.rational()));
  }
  return Number(a.value() / b.value());
}

bool leq_with_slack(const Number& a, const Number& b) {
  if (a.exact() && b.exact()) return a.rational() <= b.rational();
  return a.value() <= b.value() + 1e-12 * std::max(1.0, std::abs(b.value()));
}

std::uint64_t checked_power(std::uint64_t base, std::size_t exponent, std::uint64_t budget) {
  std::uint64_t result = 1;
  for (std::size_t k = 0; k < exponent; ++k) {
    if (base != 0 && result > budget / base)
      throw BudgetError("table of " + std::to_string(base) + "^" + std::to_string(exponent) +
                        " entries exceeds budget " + std::to_string(budget));
    result *= base;
  }
  if (result > budget)
    throw BudgetError("table of " + std::to_string(result) + " entries exceeds budget " + std::to_string(budget));
  return result;
}

BigInt binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  BigInt r;
  mpz_bin_uiui(r.backend().data(), n, k);
  return r;
}

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace sethit
