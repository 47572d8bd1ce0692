#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "doctest.h"
#include "simml/expr.hpp"

using namespace simml::expr;

namespace {

std::set<std::string> syms(std::initializer_list<const char*> names) { return {names.begin(), names.end()}; }

double value(const char* text, std::initializer_list<std::pair<const char*, double>> binds) {
  Context ctx;
  for (const auto& [k, v] : binds) ctx.bind(k, v);
  return eval(parse(text), ctx).value;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// Random expression text over x and y, bounded depth.
std::string random_expr(std::mt19937_64& rng, int depth) {
  static const char* unary[] = {"sin", "cos", "tan", "asin", "acos", "atan", "sinh", "cosh", "tanh",
                                "exp", "log", "log10", "sqrt", "abs", "floor", "ceil"};
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 8);
  switch (pick(rng)) {
    case 0: return "x";
    case 1: return "y";
    case 2: {
      std::uniform_real_distribution<double> lit(0.0, 4.0);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", lit(rng));
      return buf;
    }
    case 3: return "(" + random_expr(rng, depth - 1) + "+" + random_expr(rng, depth - 1) + ")";
    case 4: return "(" + random_expr(rng, depth - 1) + "-" + random_expr(rng, depth - 1) + ")";
    case 5: return "(" + random_expr(rng, depth - 1) + "*" + random_expr(rng, depth - 1) + ")";
    case 6: return "(" + random_expr(rng, depth - 1) + "/" + random_expr(rng, depth - 1) + ")";
    case 7: return "-" + random_expr(rng, depth - 1) + "^" + random_expr(rng, depth - 1);
    default: {
      std::uniform_int_distribution<int> f(0, 17);
      int k = f(rng);
      if (k == 16) return "min(" + random_expr(rng, depth - 1) + "," + random_expr(rng, depth - 1) + ")";
      if (k == 17) return "max(" + random_expr(rng, depth - 1) + "," + random_expr(rng, depth - 1) + ")";
      return std::string(unary[k]) + "(" + random_expr(rng, depth - 1) + ")";
    }
  }
}

}  // namespace

TEST_CASE("free symbols") {
  CHECK(free_symbols(parse("-g0/L*sin(theta)")) == syms({"g0", "L", "theta"}));
  CHECK(free_symbols(parse("theta_0*cos(sqrt(g0/L)*t)")) == syms({"theta_0", "g0", "L", "t"}));
  CHECK(free_symbols(parse("pi*r^2")) == syms({"r"}));
  CHECK(free_symbols(parse("3.14")).empty());
  CHECK(free_symbols(parse("e^x + max(a, b)")) == syms({"x", "a", "b"}));
}

TEST_CASE("precedence and associativity") {
  CHECK(value("2^3^2", {}) == 512);
  CHECK(value("-2^2", {}) == -4);
  CHECK(value("2*-3", {}) == -6);
  CHECK(value("8/4/2", {}) == 1);
  CHECK(value("10-4-3", {}) == 3);
  CHECK(value("1+2*3", {}) == 7);
  CHECK(value("2^-1", {}) == 0.5);
  CHECK(value("2.^2 .* 3 ./ 4", {}) == 3);
  CHECK(value("1e3+2.5E-1", {}) == 1000.25);
  CHECK(value("min(3, 1) + max(2, 5)", {}) == 6);
}

TEST_CASE("scalar evaluation") {
  const double pi = std::numbers::pi;
  CHECK(value("-g0/L*sin(theta)", {{"g0", 9.81}, {"L", 1}, {"theta", 0}}) == 0);
  CHECK(value("-g0/L*sin(theta)", {{"g0", 9.81}, {"L", 1}, {"theta", pi / 2}}) == doctest::Approx(-9.81).epsilon(1e-15));
  CHECK(value("theta_0*cos(sqrt(g0/L)*t)", {{"theta_0", 2}, {"g0", 9.81}, {"L", 1}, {"t", 0}}) == 2);
  CHECK(value("pi", {}) == pi);
  CHECK(value("e", {}) == std::numbers::e);
}

TEST_CASE("non-finite results are flagged") {
  Context ctx;
  ctx.bind("x", -1.0);
  auto r = eval(parse("sqrt(x)"), ctx);
  CHECK(r.non_finite);
  CHECK(std::isnan(r.value));
  CHECK(eval(parse("1/0"), ctx).non_finite);
  CHECK_FALSE(eval(parse("x*2"), ctx).non_finite);
  CHECK(std::isnan(value("min(0/0, 1)", {})));
}

TEST_CASE("parse errors") {
  auto kind_of = [](const char* text) {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  CHECK(kind_of("1 +") == static_cast<int>(ParseErrorKind::syntax));
  CHECK(kind_of("(1") == static_cast<int>(ParseErrorKind::syntax));
  CHECK(kind_of("") == static_cast<int>(ParseErrorKind::syntax));
  CHECK(kind_of("a b") == static_cast<int>(ParseErrorKind::syntax));
  CHECK(kind_of("foo(1)") == static_cast<int>(ParseErrorKind::unknown_function));
  CHECK(kind_of("sin(1, 2)") == static_cast<int>(ParseErrorKind::arity));
  CHECK(kind_of("max(1)") == static_cast<int>(ParseErrorKind::arity));
  CHECK(kind_of("x(1)") == static_cast<int>(ParseErrorKind::unknown_function));
  try {
    parse("1 + * 2");
    FAIL("expected error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("binding rules") {
  Context ctx;
  ctx.bind("a", 1.0);
  CHECK_THROWS_AS(ctx.bind("a", 2.0), simml::Error);
  CHECK_THROWS_AS(ctx.bind("pi", 2.0), simml::Error);
  ctx.set("a", 3.0);
  CHECK(std::get<double>(*ctx.find("a")) == 3.0);
  try {
    eval(parse("a + missing"), ctx);
    FAIL("expected unbound symbol");
  } catch (const UnboundSymbolError& e) {
    CHECK(e.symbol() == "missing");
  }
}

TEST_CASE("vectorized evaluation") {
  Context ctx;
  ctx.bind("x", Array::vector({0, 1, 2}));
  CHECK(eval_vectorized(parse("x^2"), ctx).values.data == std::vector<double>{0, 1, 4});

  Context ab;
  ab.bind("a", Array::vector({1, 2}));
  ab.bind("b", Array::vector({10, 20}));
  CHECK(eval_vectorized(parse("a+b"), ab).values.data == std::vector<double>{11, 22});

  Context bad;
  bad.bind("a", Array::vector({1, 2}));
  bad.bind("b", Array::vector({1, 2, 3}));
  CHECK_THROWS_AS(eval_vectorized(parse("a+b"), bad), ShapeError);

  // Oracle: per-element scalar loop.
  std::vector<double> t(100);
  for (int k = 0; k < 100; ++k) t[k] = std::numbers::pi * k / 99.0;
  Context tc;
  tc.bind("t", Array::vector(t));
  auto r = eval_vectorized(parse("sin(t)"), tc);
  double vmax = -1;
  for (std::size_t k = 0; k < t.size(); ++k) {
    Context s;
    s.bind("t", t[k]);
    CHECK(same_bits(r.values.data[k], eval(parse("sin(t)"), s).value));
    vmax = std::max(vmax, r.values.data[k]);
  }
  // With 100 points no node lands on pi/2; the largest sample is cos(pi/198).
  CHECK(vmax == doctest::Approx(std::cos(std::numbers::pi / 198)).epsilon(1e-15));
  CHECK(std::abs(vmax - 1.0) < 2e-4);

  auto broadcast = eval_vectorized(parse("2*pi"), Context{}, {2, 3});
  CHECK(broadcast.values.shape == std::vector<std::size_t>{2, 3});
  CHECK(broadcast.values.size() == 6);
}

TEST_CASE("property: vectorized equals scalar loop to the last bit") {
  std::mt19937_64 rng(20261015);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int trial = 0; trial < 400; ++trial) {
    std::string text = random_expr(rng, 4);
    Expr e = parse(text);
    std::vector<double> xs(17), ys(17);
    for (auto& v : xs) v = d(rng);
    for (auto& v : ys) v = d(rng);
    Context vc;
    vc.bind("x", Array::vector(xs));
    vc.bind("y", Array::vector(ys));
    auto vr = eval_vectorized(e, vc, {xs.size()});
    std::size_t non_finite = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      Context sc;
      sc.bind("x", xs[k]);
      sc.bind("y", ys[k]);
      auto sr = eval(e, sc);
      non_finite += sr.non_finite;
      bool ok = same_bits(vr.values.data[k], sr.value) || (std::isnan(vr.values.data[k]) && std::isnan(sr.value));
      if (!ok) FAIL_CHECK(text << " differs at element " << k);
    }
    CHECK(vr.non_finite == non_finite);
  }
}

TEST_CASE("property: print then parse yields an equal tree") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    Expr e = parse(random_expr(rng, 5));
    std::string printed = to_string(e);
    Expr back = parse(printed);
    if (!(back == e)) FAIL_CHECK(printed);
    CHECK(to_string(back) == printed);
  }
  CHECK(to_string(parse("(a-b)-(c-d)")) == "a-b-(c-d)");
  CHECK(to_string(parse("(2^3)^2")) == "(2^3)^2");
  CHECK(to_string(parse("2^(3^2)")) == "2^3^2");
  CHECK(to_string(parse("-(a+b)")) == "-(a+b)");
  CHECK(to_string(parse("1e-14*x")) == "1e-14*x");
}
