#pragma once

// Numeric tower shared by every module: exact GMP rationals for measure
// quantities, doubles for spectra, and a small tagged value type used for
// results that are exact whenever the inputs were.

#include <boost/multiprecision/gmp.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sethit {

using Rational = boost::multiprecision::mpq_rational;
using BigInt = boost::multiprecision::mpz_int;

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Enumeration or search space larger than the configured budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// The operation declines to run because its guarantee does not apply
/// (e.g. rho(P) = 1 for the influence reduction).
class RefusalError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint64_t kDefaultBudget = std::uint64_t{1} << 24;

Rational parse_rational(std::string_view text);
std::string to_string(const Rational& q);
double to_double(const Rational& q);
Rational exact_from_double(double x);

/// A result value that is either an exact rational or a binary float.
class Number {
 public:
  Number() : approx_(0.0) {}
  Number(double x) : approx_(x) {}  // NOLINT(google-explicit-constructor)
  Number(Rational q) : exact_(std::move(q)) { approx_ = to_double(*exact_); }  // NOLINT

  bool exact() const noexcept { return exact_.has_value(); }
  const Rational& rational() const;
  double value() const noexcept { return approx_; }
  std::string str() const;

 private:
  std::optional<Rational> exact_;
  double approx_;
};

bool operator==(const Number& a, const Number& b);
bool operator<(const Number& a, const Number& b);
inline bool operator<=(const Number& a, const Number& b) { return !(b < a); }
inline bool operator>(const Number& a, const Number& b) { return b < a; }
inline bool operator>=(const Number& a, const Number& b) { return !(a < b); }

/// Arithmetic stays exact only when both operands are exact.
Number operator+(const Number& a, const Number& b);
Number operator-(const Number& a, const Number& b);
Number operator*(const Number& a, const Number& b);
Number operator/(const Number& a, const Number& b);

/// a <= b, exactly when both are exact, else with a relative slack of 1e-12.
bool leq_with_slack(const Number& a, const Number& b);

/// Converts a computation result of either numeric type into a Number.
inline Number make_number(const Rational& q) { return Number(q); }
inline Number make_number(double x) { return Number(x); }

template <class T>
T convert(const Rational& q);
template <>
inline Rational convert<Rational>(const Rational& q) { return q; }
template <>
inline double convert<double>(const Rational& q) { return to_double(q); }

inline double as_double(double x) { return x; }
inline double as_double(const Rational& q) { return to_double(q); }

// ---------------------------------------------------------------------------
// Mixed-radix indexing. Digit 0 is least significant everywhere (coordinate 1
// of a function table, step 1 of a distribution table).

std::uint64_t checked_power(std::uint64_t base, std::size_t exponent, std::uint64_t budget);

inline void decode_mixed_radix(std::uint64_t index, std::size_t base, std::span<std::size_t> digits) {
  for (auto& d : digits) {
    d = static_cast<std::size_t>(index % base);
    index /= base;
  }
}

inline std::uint64_t encode_mixed_radix(std::span<const std::size_t> digits, std::size_t base) {
  std::uint64_t index = 0;
  for (std::size_t k = digits.size(); k-- > 0;) index = index * base + digits[k];
  return index;
}

/// Advances digits as an odometer; returns false after the last tuple.
inline bool next_tuple(std::span<std::size_t> digits, std::size_t base) {
  for (auto& d : digits) {
    if (++d < base) return true;
    d = 0;
  }
  return false;
}

BigInt binomial(unsigned n, unsigned k);

/// Sum of doubles by pairwise recursion, independent of how callers chunk work.
double pairwise_sum(std::span<const double> xs);

}  // namespace sethit
