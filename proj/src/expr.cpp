#include "simml/expr.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>

namespace simml::expr {

namespace {

struct FunctionInfo {
  std::string_view name;
  Function fn;
  int arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"sin", Function::sin, 1},     {"cos", Function::cos, 1},     {"tan", Function::tan, 1},
    {"asin", Function::asin, 1},   {"acos", Function::acos, 1},   {"atan", Function::atan, 1},
    {"sinh", Function::sinh, 1},   {"cosh", Function::cosh, 1},   {"tanh", Function::tanh, 1},
    {"exp", Function::exp, 1},     {"log", Function::log, 1},     {"log10", Function::log10, 1},
    {"sqrt", Function::sqrt, 1},   {"abs", Function::abs, 1},     {"floor", Function::floor, 1},
    {"ceil", Function::ceil, 1},   {"min", Function::min, 2},     {"max", Function::max, 2},
};

const FunctionInfo* lookup_function(std::string_view name) {
  for (const auto& f : kFunctions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::optional<double> constant_value(std::string_view name) {
  if (name == "pi") return std::numbers::pi;
  if (name == "e") return std::numbers::e;
  return std::nullopt;
}

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Node parse_all() {
    skip();
    if (i_ >= s_.size()) fail("empty expression");
    Node n = expr();
    skip();
    if (i_ < s_.size()) fail(std::string("unexpected '") + s_[i_] + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, ParseErrorKind kind = ParseErrorKind::syntax) const {
    throw ParseError(kind, i_, msg);
  }

  void skip() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\n' || s_[i_] == '\r')) ++i_;
  }

  // Matches an operator, accepting the Scilab elementwise spelling (".*") too.
  bool accept_op(char op) {
    skip();
    if (i_ < s_.size() && s_[i_] == op) {
      ++i_;
      return true;
    }
    if (op != '+' && op != '-' && i_ + 1 < s_.size() && s_[i_] == '.' && s_[i_ + 1] == op) {
      i_ += 2;
      return true;
    }
    return false;
  }

  static Node binary(Op op, Node a, Node b) {
    Node n;
    n.op = op;
    n.args.push_back(std::move(a));
    n.args.push_back(std::move(b));
    return n;
  }

  Node expr() {
    Node lhs = term();
    for (;;) {
      if (accept_op('+')) lhs = binary(Op::add, std::move(lhs), term());
      else if (accept_op('-')) lhs = binary(Op::sub, std::move(lhs), term());
      else return lhs;
    }
  }

  Node term() {
    Node lhs = unary();
    for (;;) {
      if (accept_op('*')) lhs = binary(Op::mul, std::move(lhs), unary());
      else if (accept_op('/')) lhs = binary(Op::div, std::move(lhs), unary());
      else return lhs;
    }
  }

  Node unary() {
    if (accept_op('-')) {
      Node n;
      n.op = Op::negate;
      n.args.push_back(unary());
      return n;
    }
    if (accept_op('+')) return unary();
    return power();
  }

  Node power() {
    Node base = primary();
    if (accept_op('^')) return binary(Op::pow, std::move(base), unary());
    return base;
  }

  Node primary() {
    skip();
    if (i_ >= s_.size()) fail("unexpected end of expression");
    char c = s_[i_];
    if (digit(c) || (c == '.' && i_ + 1 < s_.size() && digit(s_[i_ + 1]))) return number();
    if (ident_start(c)) return identifier();
    if (c == '(') {
      ++i_;
      Node inner = expr();
      skip();
      if (i_ >= s_.size() || s_[i_] != ')') fail("expected ')'");
      ++i_;
      return inner;
    }
    fail(std::string("unexpected '") + c + "'");
  }

  Node number() {
    std::size_t start = i_;
    while (i_ < s_.size() && digit(s_[i_])) ++i_;
    if (i_ < s_.size() && s_[i_] == '.' && !(i_ + 1 < s_.size() && (s_[i_ + 1] == '*' || s_[i_ + 1] == '/' || s_[i_ + 1] == '^'))) {
      ++i_;
      while (i_ < s_.size() && digit(s_[i_])) ++i_;
    }
    if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E' || s_[i_] == 'd' || s_[i_] == 'D')) {
      std::size_t save = i_;
      ++i_;
      if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) ++i_;
      if (i_ < s_.size() && digit(s_[i_])) {
        while (i_ < s_.size() && digit(s_[i_])) ++i_;
      } else {
        i_ = save;
      }
    }
    std::string text(s_.substr(start, i_ - start));
    for (auto& ch : text) {
      if (ch == 'd' || ch == 'D') ch = 'e';
    }
    Node n;
    n.op = Op::number;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n.number);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      i_ = start;
      fail("malformed number '" + text + "'");
    }
    return n;
  }

  Node identifier() {
    std::size_t start = i_;
    while (i_ < s_.size() && ident_char(s_[i_])) ++i_;
    std::string name(s_.substr(start, i_ - start));
    std::size_t after_name = i_;
    skip();
    if (i_ < s_.size() && s_[i_] == '(') {
      const FunctionInfo* info = lookup_function(name);
      if (!info) {
        i_ = start;
        fail("unknown function '" + name + "'", ParseErrorKind::unknown_function);
      }
      ++i_;
      Node n;
      n.op = Op::call;
      n.name = name;
      n.fn = info->fn;
      skip();
      if (i_ < s_.size() && s_[i_] == ')') {
        ++i_;
      } else {
        for (;;) {
          n.args.push_back(expr());
          skip();
          if (i_ < s_.size() && s_[i_] == ',') {
            ++i_;
            continue;
          }
          if (i_ < s_.size() && s_[i_] == ')') {
            ++i_;
            break;
          }
          fail("expected ',' or ')' in call to '" + name + "'");
        }
      }
      if (static_cast<int>(n.args.size()) != info->arity) {
        i_ = start;
        fail("function '" + name + "' expects " + std::to_string(info->arity) + " argument" +
                 (info->arity == 1 ? "" : "s") + ", got " + std::to_string(n.args.size()),
             ParseErrorKind::arity);
      }
      return n;
    }
    i_ = after_name;
    Node n;
    if (auto v = constant_value(name)) {
      n.op = Op::constant;
      n.number = *v;
    } else {
      n.op = Op::symbol;
    }
    n.name = name;
    return n;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

int precedence(const Node& n) {
  switch (n.op) {
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::div: return 2;
    case Op::negate: return 3;
    case Op::pow: return 4;
    default: return 5;
  }
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

void print(const Node& n, std::string& out) {
  auto child = [&out](const Node& c, bool parens) {
    if (parens) out += '(';
    print(c, out);
    if (parens) out += ')';
  };
  switch (n.op) {
    case Op::number: out += format_number(n.number); break;
    case Op::symbol:
    case Op::constant: out += n.name; break;
    case Op::negate:
      out += '-';
      child(n.args[0], precedence(n.args[0]) < 3);
      break;
    case Op::pow:
      child(n.args[0], precedence(n.args[0]) < 5);
      out += '^';
      child(n.args[1], precedence(n.args[1]) < 3);
      break;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      int p = precedence(n);
      child(n.args[0], precedence(n.args[0]) < p);
      out += n.op == Op::add ? '+' : n.op == Op::sub ? '-' : n.op == Op::mul ? '*' : '/';
      child(n.args[1], precedence(n.args[1]) <= p);
      break;
    }
    case Op::call:
      out += n.name;
      out += '(';
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        if (k) out += ',';
        print(n.args[k], out);
      }
      out += ')';
      break;
  }
}

void collect(const Node& n, std::set<std::string>& out) {
  if (n.op == Op::symbol) out.insert(n.name);
  for (const auto& a : n.args) collect(a, out);
}

double binary_op(Op op, double a, double b) {
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::pow: return std::pow(a, b);
    default: return std::nan("");
  }
}

double eval_node(const Node& n, const Context& ctx) {
  switch (n.op) {
    case Op::number:
    case Op::constant: return n.number;
    case Op::symbol: {
      const Binding* b = ctx.find(n.name);
      if (!b) throw UnboundSymbolError(n.name);
      if (const double* d = std::get_if<double>(b)) return *d;
      throw ShapeError("symbol '" + n.name + "' is bound to an array in scalar evaluation");
    }
    case Op::negate: return -eval_node(n.args[0], ctx);
    case Op::call:
      return n.args.size() == 2 ? apply(n.fn, eval_node(n.args[0], ctx), eval_node(n.args[1], ctx))
                                : apply(n.fn, eval_node(n.args[0], ctx));
    default: return binary_op(n.op, eval_node(n.args[0], ctx), eval_node(n.args[1], ctx));
  }
}

// Intermediate of vectorized evaluation: scalar until an array operand shows up.
struct Value {
  bool is_array = false;
  double scalar = 0.0;
  Array array;
};

const std::vector<std::size_t>& common_shape(const Value& a, const Value& b) {
  if (a.is_array && b.is_array && a.array.shape != b.array.shape) {
    throw ShapeError("array operands have different shapes");
  }
  return a.is_array ? a.array.shape : b.array.shape;
}

template <class F>
Value map2(const Value& a, const Value& b, F f) {
  Value r;
  if (!a.is_array && !b.is_array) {
    r.scalar = f(a.scalar, b.scalar);
    return r;
  }
  r.is_array = true;
  r.array.shape = common_shape(a, b);
  std::size_t n = a.is_array ? a.array.size() : b.array.size();
  r.array.data.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    double x = a.is_array ? a.array.data[k] : a.scalar;
    double y = b.is_array ? b.array.data[k] : b.scalar;
    r.array.data[k] = f(x, y);
  }
  return r;
}

template <class F>
Value map1(Value a, F f) {
  if (!a.is_array) {
    a.scalar = f(a.scalar);
    return a;
  }
  for (auto& x : a.array.data) x = f(x);
  return a;
}

Value eval_vec(const Node& n, const Context& ctx) {
  switch (n.op) {
    case Op::number:
    case Op::constant: return Value{false, n.number, {}};
    case Op::symbol: {
      const Binding* b = ctx.find(n.name);
      if (!b) throw UnboundSymbolError(n.name);
      if (const double* d = std::get_if<double>(b)) return Value{false, *d, {}};
      return Value{true, 0.0, std::get<Array>(*b)};
    }
    case Op::negate: return map1(eval_vec(n.args[0], ctx), [](double x) { return -x; });
    case Op::call: {
      Function fn = n.fn;
      if (n.args.size() == 2) {
        return map2(eval_vec(n.args[0], ctx), eval_vec(n.args[1], ctx),
                    [fn](double x, double y) { return apply(fn, x, y); });
      }
      return map1(eval_vec(n.args[0], ctx), [fn](double x) { return apply(fn, x); });
    }
    default: {
      Op op = n.op;
      return map2(eval_vec(n.args[0], ctx), eval_vec(n.args[1], ctx),
                  [op](double x, double y) { return binary_op(op, x, y); });
    }
  }
}

}  // namespace

bool Node::operator==(const Node& o) const {
  if (op != o.op) return false;
  switch (op) {
    case Op::number: return number == o.number;
    case Op::symbol:
    case Op::constant: return name == o.name;
    case Op::call: return fn == o.fn && args == o.args;
    default: return args == o.args;
  }
}

Expr parse(std::string_view text) { return Expr(Parser(text).parse_all()); }

std::string to_string(const Expr& e) {
  std::string out;
  if (!e.empty()) print(e.root(), out);
  return out;
}

std::set<std::string> free_symbols(const Expr& e) {
  std::set<std::string> out;
  if (!e.empty()) collect(e.root(), out);
  return out;
}

bool is_reserved(std::string_view symbol) { return constant_value(symbol).has_value(); }
bool is_function_name(std::string_view name) { return lookup_function(name) != nullptr; }

Array Array::vector(std::vector<double> v) {
  Array a;
  a.shape = {v.size()};
  a.data = std::move(v);
  return a;
}

void Context::bind(const std::string& symbol, Binding value) {
  if (is_reserved(symbol)) throw Error("cannot bind reserved constant '" + symbol + "'");
  auto [it, inserted] = bindings_.emplace(symbol, std::move(value));
  if (!inserted) throw Error("symbol '" + symbol + "' is already bound");
}

void Context::set(const std::string& symbol, double value) { bindings_[symbol] = value; }
void Context::set(const std::string& symbol, Array value) { bindings_[symbol] = std::move(value); }

const Binding* Context::find(const std::string& symbol) const {
  auto it = bindings_.find(symbol);
  return it == bindings_.end() ? nullptr : &it->second;
}

double apply(Function fn, double a, double b) {
  switch (fn) {
    case Function::sin: return std::sin(a);
    case Function::cos: return std::cos(a);
    case Function::tan: return std::tan(a);
    case Function::asin: return std::asin(a);
    case Function::acos: return std::acos(a);
    case Function::atan: return std::atan(a);
    case Function::sinh: return std::sinh(a);
    case Function::cosh: return std::cosh(a);
    case Function::tanh: return std::tanh(a);
    case Function::exp: return std::exp(a);
    case Function::log: return std::log(a);
    case Function::log10: return std::log10(a);
    case Function::sqrt: return std::sqrt(a);
    case Function::abs: return std::fabs(a);
    case Function::floor: return std::floor(a);
    case Function::ceil: return std::ceil(a);
    case Function::min:
      if (std::isnan(a) || std::isnan(b)) return std::nan("");
      return b < a ? b : a;
    case Function::max:
      if (std::isnan(a) || std::isnan(b)) return std::nan("");
      return b > a ? b : a;
  }
  return std::nan("");
}

ScalarResult eval(const Expr& e, const Context& ctx) {
  ScalarResult r;
  r.value = eval_node(e.root(), ctx);
  r.non_finite = !std::isfinite(r.value);
  return r;
}

ArrayResult eval_vectorized(const Expr& e, const Context& ctx, const std::vector<std::size_t>& shape) {
  Value v = eval_vec(e.root(), ctx);
  ArrayResult r;
  if (v.is_array) {
    if (!shape.empty() && v.array.shape != shape) throw ShapeError("result shape does not match the requested shape");
    r.values = std::move(v.array);
  } else {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    r.values.shape = shape.empty() ? std::vector<std::size_t>{1} : shape;
    r.values.data.assign(n, v.scalar);
  }
  for (double x : r.values.data) {
    if (!std::isfinite(x)) ++r.non_finite;
  }
  return r;
}

}  // namespace simml::expr
