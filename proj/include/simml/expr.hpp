#pragma once

// Arithmetic expressions over named symbols: the text stored in derivative,
// value, initial-condition and domain-bound elements.
//
// Grammar (Scilab/Matlab-compatible scalar subset):
//
//   expr    := term { ('+' | '-') term }
//   term    := unary { ('*' | '/' | '.*' | './') unary }
//   unary   := ('-' | '+') unary | power
//   power   := primary [ ('^' | '.^') unary ]        (right-associative)
//   primary := number | ident | ident '(' expr { ',' expr } ')' | '(' expr ')'
//
// `pi` and `e` are reserved constants.

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "simml/diagnostics.hpp"

namespace simml::expr {

enum class Op { number, symbol, constant, negate, add, sub, mul, div, pow, call };

enum class Function {
  sin, cos, tan, asin, acos, atan, sinh, cosh, tanh,
  exp, log, log10, sqrt, abs, floor, ceil, min, max,
};

struct Node {
  Op op = Op::number;
  double number = 0.0;   // literal value, or constant value
  std::string name;      // symbol, constant or function name
  Function fn = Function::sin;
  std::vector<Node> args;

  bool operator==(const Node& other) const;
};

/// Immutable parsed expression. Cheap to copy; safe to share across threads.
class Expr {
 public:
  Expr() = default;
  explicit Expr(Node root) : root_(std::make_shared<const Node>(std::move(root))) {}

  const Node& root() const { return *root_; }
  bool empty() const { return !root_; }

  friend bool operator==(const Expr& a, const Expr& b) {
    if (!a.root_ || !b.root_) return !a.root_ && !b.root_;
    return *a.root_ == *b.root_;
  }

 private:
  std::shared_ptr<const Node> root_;
};

enum class ParseErrorKind { syntax, unknown_function, arity };

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::size_t offset, const std::string& message)
      : Error("column " + std::to_string(offset + 1) + ": " + message), kind_(kind), offset_(offset) {}
  ParseErrorKind kind() const { return kind_; }
  /// 0-based byte offset into the expression text.
  std::size_t offset() const { return offset_; }

 private:
  ParseErrorKind kind_;
  std::size_t offset_;
};

class UnboundSymbolError : public Error {
 public:
  explicit UnboundSymbolError(const std::string& symbol)
      : Error("unbound symbol '" + symbol + "'"), symbol_(symbol) {}
  const std::string& symbol() const { return symbol_; }

 private:
  std::string symbol_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

Expr parse(std::string_view text);

/// Prints with the minimum parentheses needed to re-parse to an equal tree.
std::string to_string(const Expr& e);

std::set<std::string> free_symbols(const Expr& e);

bool is_reserved(std::string_view symbol);
bool is_function_name(std::string_view name);

/// Dense real array of rank 1 or 2, row-major.
struct Array {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  static Array vector(std::vector<double> v);
  std::size_t size() const { return data.size(); }
  bool operator==(const Array&) const = default;
};

using Binding = std::variant<double, Array>;

/// Symbol bindings for one evaluation. Not shared between threads.
class Context {
 public:
  /// Adds a new binding; throws if the symbol is already bound or reserved.
  void bind(const std::string& symbol, Binding value);
  /// Binds or overwrites a scalar (used for per-step locals such as ODE states).
  void set(const std::string& symbol, double value);
  void set(const std::string& symbol, Array value);
  const Binding* find(const std::string& symbol) const;
  bool contains(const std::string& symbol) const { return find(symbol) != nullptr; }

 private:
  std::unordered_map<std::string, Binding> bindings_;
};

struct ScalarResult {
  double value = 0.0;
  bool non_finite = false;
};

struct ArrayResult {
  Array values;
  std::size_t non_finite = 0;
};

/// Scalar evaluation. Throws UnboundSymbolError, or ShapeError when an array
/// binding is reached.
ScalarResult eval(const Expr& e, const Context& ctx);

/// Elementwise evaluation; scalars broadcast, arrays must share one shape.
/// `shape` fixes the output shape when every operand is scalar.
ArrayResult eval_vectorized(const Expr& e, const Context& ctx, const std::vector<std::size_t>& shape = {});

double apply(Function fn, double a, double b = 0.0);

}  // namespace simml::expr
