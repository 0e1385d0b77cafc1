#pragma once

// Functions f: Omega^n -> [0, 1] in four representations. Coordinates are
// 0-based in the C++ API; table index uses coordinate 0 as the least
// significant digit.

#include "sethit/dist.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sethit {

struct Anchor {
  std::size_t coordinate;
  std::size_t symbol;
  friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// Inclusive bounds on how many counted coordinates carry a symbol.
struct CountWindow {
  long lo;
  long hi;
  friend bool operator==(const CountWindow&, const CountWindow&) = default;
};

/// Accepts x iff the anchor (if any) matches and every symbol count lies in
/// its window.
struct SymmetricClause {
  std::optional<Anchor> anchor;
  std::vector<CountWindow> windows;  // one per alphabet symbol
};

struct AnchoredSymmetric {
  std::vector<SymmetricClause> clauses;  // disjunction; empty means f == 0
  std::vector<bool> ignored;             // coordinates left out of every count
};

struct JuntaIndicator {
  std::vector<Anchor> constraints;  // conjunction of x_c == a
  bool contradictory = false;
};

struct ModLinear {
  long modulus;
  std::vector<long> coefficients;
  long residue;
  std::vector<long> symbol_map;  // symbol index -> Z_modulus
};

struct TableValues {
  std::vector<double> values;
  std::optional<std::vector<Rational>> exact;
};

/// Partial assignment: entries[c] is the fixed symbol or nullopt for a star.
struct Restriction {
  std::vector<std::optional<std::size_t>> entries;

  static Restriction none(std::size_t n) { return {std::vector<std::optional<std::size_t>>(n)}; }
  std::size_t size() const;
  std::string str(const Alphabet& alphabet) const;  // 1-based "x1=0, x3=2"
};

class FunctionSpec {
 public:
  enum class Kind { table, anchored_symmetric, junta, mod_linear };

  static FunctionSpec table(Alphabet alphabet, std::size_t n, std::vector<double> values);
  static FunctionSpec table(Alphabet alphabet, std::size_t n, std::vector<Rational> values);
  static FunctionSpec anchored_symmetric(Alphabet alphabet, std::size_t n, std::vector<SymmetricClause> clauses,
                                         std::vector<bool> ignored = {});
  static FunctionSpec junta(Alphabet alphabet, std::size_t n, std::vector<Anchor> constraints);
  static FunctionSpec mod_linear(Alphabet alphabet, std::size_t n, long modulus, std::vector<long> coefficients,
                                 long residue, std::vector<long> symbol_map = {});
  static FunctionSpec constant(Alphabet alphabet, std::size_t n, bool one);
  /// 1[x_coordinate == symbol].
  static FunctionSpec dictator(Alphabet alphabet, std::size_t n, std::size_t coordinate, std::size_t symbol);

  Kind kind() const noexcept { return kind_; }
  std::size_t n() const noexcept { return n_; }
  const Alphabet& alphabet() const noexcept { return alphabet_; }
  std::size_t symbol_count() const noexcept { return alphabet_.size(); }
  /// Values are exact rationals (indicator kinds always are).
  bool exact() const noexcept;
  bool indicator() const noexcept { return kind_ != Kind::table; }

  const TableValues& table_data() const;
  const AnchoredSymmetric& symmetric_data() const;
  const JuntaIndicator& junta_data() const;
  const ModLinear& mod_data() const;

  double value(std::span<const std::size_t> x) const;
  Rational exact_value(std::span<const std::size_t> x) const;
  template <class T>
  T value_as(std::span<const std::size_t> x) const;

  /// Dense table over Omega^n; throws BudgetError above `budget` entries.
  template <class T>
  std::vector<T> tabulate(std::uint64_t budget = kDefaultBudget) const;
  FunctionSpec to_table(std::uint64_t budget = kDefaultBudget) const;

  /// Coordinates carrying an anchor in some clause (anchored kind only).
  std::vector<std::size_t> anchor_coordinates() const;
  /// Representable by the histogram engine.
  bool histogram_compatible() const noexcept;
  /// Known to be identically zero from its representation.
  bool trivially_zero() const noexcept;

  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

 private:
  FunctionSpec(Alphabet alphabet, std::size_t n, Kind kind);
  void check_point(std::span<const std::size_t> x) const;
  bool indicator_value(std::span<const std::size_t> x) const;

  Alphabet alphabet_;
  std::size_t n_;
  Kind kind_;
  TableValues table_;
  AnchoredSymmetric symmetric_;
  JuntaIndicator junta_;
  ModLinear mod_{};
  std::string name_;
};

template <>
inline double FunctionSpec::value_as<double>(std::span<const std::size_t> x) const { return value(x); }
template <>
inline Rational FunctionSpec::value_as<Rational>(std::span<const std::size_t> x) const { return exact_value(x); }

/// Rf on the same n coordinates; restricted coordinates become dummies.
FunctionSpec restrict(const FunctionSpec& f, const Restriction& R);

/// Pointwise max of the substitutions x_i := y and x_i := z (table kind).
FunctionSpec max_operator(const FunctionSpec& f, std::size_t i, std::size_t y, std::size_t z);

/// JSON function files use 1-based coordinates and symbol tokens.
FunctionSpec parse_function_spec(std::string_view json_text);
FunctionSpec load_function_spec(const std::string& path);
std::string serialize_function_spec(const FunctionSpec& f);

}  // namespace sethit
