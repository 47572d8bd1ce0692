#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "simml/runtime.hpp"

using namespace simml;
using namespace simml::rt;

namespace {

ir::ComputeIR compile(const std::string& name) {
  auto out = load_document(std::string(SIMML_CORPUS_DIR) + "/" + name);
  REQUIRE(out.doc);
  return ir::lower(resolve_language(*out.doc, std::nullopt)).compute;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Plain pendulum right-hand side, independent of the IR.
OdeRhs pendulum_rhs(double g0, double L) {
  return [=](double, const std::vector<double>& y, std::vector<double>& dy) {
    dy.resize(2);
    dy[0] = y[1];
    dy[1] = -g0 / L * std::sin(y[0]);
  };
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ir::Axis axis(const std::string& sym, const std::string& lo, const std::string& hi, int n) {
  return ir::Axis{sym, expr::parse(lo), expr::parse(hi), n, Spacing::linear};
}

}  // namespace

TEST_CASE("discretize: linear, log and degenerate intervals") {
  auto t = discretize(0, 2, 200, Spacing::linear);
  REQUIRE(t.size() == 200);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 2.0);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] - t[i - 1] == doctest::Approx(2.0 / 199).epsilon(1e-12));

  CHECK(discretize(1, 100, 3, Spacing::log) == std::vector<double>{1, 10, 100});

  for (auto [lo, hi] : {std::pair{5.0, 5.0}, std::pair{6.0, 5.0}}) {
    try {
      discretize(lo, hi, 10, Spacing::linear);
      FAIL("expected an error");
    } catch (const RunError& e) {
      CHECK(e.code() == "bad-interval");
    }
  }
  CHECK_THROWS_AS(discretize(0, 10, 5, Spacing::log), RunError);
  CHECK_THROWS_AS(discretize(0, 1, 1, Spacing::linear), RunError);
}

TEST_CASE("ode: exponential decay reaches 1/e") {
  OdeRhs f = [](double, const std::vector<double>& y, std::vector<double>& dy) { dy = {-y[0]}; };
  auto sol = integrate_ode(f, {1.0}, discretize(0, 1, 11, Spacing::linear));
  REQUIRE_FALSE(sol.failure);
  CHECK(std::abs(sol.states[0].back() - std::exp(-1.0)) <= 1e-6);
  // dense output at interior grid points too
  for (std::size_t i = 0; i <= 10; ++i) CHECK(std::abs(sol.states[0][i] - std::exp(-0.1 * i)) <= 1e-7);
}

TEST_CASE("ode: fixed-step order is five") {
  OdeRhs f = [](double, const std::vector<double>& y, std::vector<double>& dy) { dy = {-y[0]}; };
  const double exact = std::exp(-2.0);
  const double coarse = std::abs(integrate_fixed(f, {1.0}, 0, 2, 8)[0] - exact);
  const double fine = std::abs(integrate_fixed(f, {1.0}, 0, 2, 16)[0] - exact);
  const double ratio = coarse / fine;
  MESSAGE("fixed-step error ratio " << ratio);
  CHECK(ratio >= 24);
  CHECK(ratio <= 40);
}

TEST_CASE("ode: pendulum small-angle agreement") {
  const auto ir = compile("pendulum.xml");
  auto v = default_valuation(ir);
  v["theta_0"] = 0.1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run(ir, v);
  const double elapsed = seconds_since(t0);
  REQUIRE(r.ok());
  const auto& theta = r.series.at("theta");
  REQUIRE(theta.y.size() == 200);

  // reference integration of the plain system at a much tighter tolerance
  OdeConfig tight{1e-12, 1e-14, 1000000};
  auto ref = integrate_ode(pendulum_rhs(9.81, 1.0), {0.1, 0.0}, theta.x, tight);
  REQUIRE_FALSE(ref.failure);
  CHECK(max_abs_diff(theta.y, ref.states[0]) <= 1e-6);

  double err = 0.0;
  for (std::size_t i = 0; i < theta.x.size(); ++i) {
    err = std::max(err, std::abs(theta.y[i] - 0.1 * std::cos(std::sqrt(9.81) * theta.x[i])));
  }
  MESSAGE("small-angle deviation " << err << ", run " << elapsed << " s");
  CHECK(err <= 2e-3);
  CHECK(elapsed < 1.0);
  // the emitted harmonic output is that same formula
  CHECK(max_abs_diff(r.series.at("theta_lin").y, [&] {
          std::vector<double> h;
          for (double t : theta.x) h.push_back(0.1 * std::cos(std::sqrt(9.81 / 1.0) * t));
          return h;
        }()) <= 1e-15);
}

TEST_CASE("ode: pendulum energy is conserved") {
  const auto ir = compile("pendulum.xml");
  auto v = default_valuation(ir);
  v["theta_0"] = 2.0;
  v["tf"] = 10.0;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run(ir, v);
  const double elapsed = seconds_since(t0);
  REQUIRE(r.ok());
  const auto& th = r.series.at("theta").y;
  const auto& om = r.series.at("theta_dot").y;
  const double g_over_l = 9.81 / 1.0;
  const double e0 = 0.5 * om[0] * om[0] - g_over_l * std::cos(th[0]);
  double drift = 0.0;
  for (std::size_t i = 0; i < th.size(); ++i) {
    drift = std::max(drift, std::abs(0.5 * om[i] * om[i] - g_over_l * std::cos(th[i]) - e0));
  }
  MESSAGE("energy drift " << drift << ", run " << elapsed << " s");
  CHECK(drift <= 1e-4);
  CHECK(elapsed < 1.0);
}

TEST_CASE("ode: pendulum time symmetry") {
  auto fwd_grid = discretize(0, 3, 61, Spacing::linear);
  std::vector<double> bwd_grid;
  for (double t : fwd_grid) bwd_grid.push_back(-t);
  for (double theta0 : {0.3, 1.0, 2.5}) {
    auto fwd = integrate_ode(pendulum_rhs(9.81, 1.0), {theta0, 0.0}, fwd_grid);
    auto bwd = integrate_ode(pendulum_rhs(9.81, 1.0), {theta0, 0.0}, bwd_grid);
    REQUIRE_FALSE(fwd.failure);
    REQUIRE_FALSE(bwd.failure);
    CHECK(max_abs_diff(fwd.states[0], bwd.states[0]) <= 1e-6);
  }
}

TEST_CASE("ode: step limit returns partial results") {
  OdeRhs f = [](double, const std::vector<double>& y, std::vector<double>& dy) { dy = {-y[0]}; };
  OdeConfig cfg;
  cfg.max_steps = 3;
  auto sol = integrate_ode(f, {1.0}, discretize(0, 100, 101, Spacing::linear), cfg);
  REQUIRE(sol.failure);
  CHECK(sol.failure->code() == "max-steps");
  CHECK(sol.states[0][0] == 1.0);
  CHECK(std::isnan(sol.states[0].back()));
}

TEST_CASE("run: pendulum defaults and equilibrium") {
  const auto ir = compile("pendulum.xml");
  auto r = run(ir, default_valuation(ir));
  REQUIRE(r.ok());
  for (const char* s : {"theta", "theta_dot", "theta_lin"}) {
    REQUIRE(r.series.count(s));
    CHECK(r.series.at(s).y.size() == 200);
    CHECK(r.series.at(s).abscissa == "t");
  }
  CHECK(r.series.at("theta").y.front() == 2.0);
  CHECK(r.points.at("point0") == std::vector<Point2>{{0.0, 2.0}});

  auto v = default_valuation(ir);
  v["theta_0"] = 0.0;
  r = run(ir, v);
  REQUIRE(r.ok());
  for (double y : r.series.at("theta").y) CHECK(std::abs(y) <= 1e-12);
}

TEST_CASE("run: unbound parameter names the symbol") {
  const auto ir = compile("pendulum.xml");
  auto v = default_valuation(ir);
  v.erase("g0");
  auto r = run(ir, v);
  REQUIRE_FALSE(r.ok());
  CHECK(r.diagnostics.error_code == "unbound-parameter");
  CHECK(r.diagnostics.error->find("'g0'") != std::string::npos);
}

TEST_CASE("run: constrained point is projected before the tasks") {
  const auto ir = compile("pendulum.xml");
  auto v = default_valuation(ir);
  v["zero"] = 1.0;
  v["theta_0"] = 0.5;
  auto r = run(ir, v);
  REQUIRE(r.ok());
  CHECK(r.points.at("point0") == std::vector<Point2>{{0.0, 0.5}});
  project_points(ir, v);
  CHECK(std::get<double>(v.at("zero")) == 0.0);
  v["theta_0"] = 5.0;
  project_points(ir, v);
  CHECK(std::get<double>(v.at("theta_0")) == 3.14);
}

TEST_CASE("valuation: bounded values are clamped with a warning") {
  const auto ir = compile("pendulum.xml");
  auto v = default_valuation(ir);
  auto w = set_param(ir, v, "tf", 50.0);
  REQUIRE(w);
  CHECK(w->find("tf") != std::string::npos);
  CHECK(std::get<double>(v.at("tf")) == 10.0);
  CHECK_FALSE(set_param(ir, v, "tf", 3.0));
  CHECK(std::get<double>(v.at("tf")) == 3.0);
  CHECK_THROWS_AS(set_param(ir, v, "nope", 1.0), RunError);
  CHECK_THROWS_AS(set_param(ir, v, "tf", Matrix{1, 1, {1}}), RunError);

  // out-of-range values smuggled into run() are clamped there as well
  v["tf"] = -4.0;
  auto r = run(ir, v);
  CHECK_FALSE(r.ok());  // tf clamps to its minimum 0, a degenerate interval
  CHECK(r.diagnostics.warnings.size() == 1);
  CHECK(r.diagnostics.error_code == "bad-interval");
}

TEST_CASE("newton: reference systems") {
  auto sq = solve_newton([](const std::vector<double>& x, std::vector<double>& r) { r = {x[0] * x[0] - 4}; }, {3.0});
  CHECK(std::abs(sq.x[0] - 2.0) <= 1e-10);

  auto lin = solve_newton(
      [](const std::vector<double>& x, std::vector<double>& r) { r = {x[0] + x[1] - 3, x[0] - x[1] - 1}; }, {0.0, 0.0});
  CHECK(std::abs(lin.x[0] - 2.0) <= 1e-10);
  CHECK(std::abs(lin.x[1] - 1.0) <= 1e-10);

  try {
    solve_newton([](const std::vector<double>& x, std::vector<double>& r) { r = {x[0] * x[0] + 1}; }, {1.0});
    FAIL("expected no convergence");
  } catch (const RunError& e) {
    CHECK(e.code() == "no-convergence");
  }

  try {
    solve_newton([](const std::vector<double>& x, std::vector<double>& r) { r = {x[0] + x[1] - 1, 2 * x[0] + 2 * x[1]}; },
                 {0.0, 0.0});
    FAIL("expected singular Jacobian");
  } catch (const RunError& e) {
    CHECK(e.code() == "singular-jacobian");
  }
}

TEST_CASE("run: titration initial pH against bisection") {
  const auto ir = compile("titration.xml");
  for (int acid = 0; acid < 3; ++acid) {
    auto v = default_valuation(ir);
    v["acid"] = static_cast<double>(acid);
    auto r = run(ir, v);
    REQUIRE(r.ok());
    const double pka = std::array{4.76, 3.75, 9.25}[acid];
    auto g = [&](double ph) { return ph + std::log10(0.1 / (1 + std::pow(10.0, pka - ph)) + 1e-14 * std::pow(10.0, ph)); };
    double lo = 0, hi = 14;
    for (int k = 0; k < 200; ++k) {
      const double mid = (lo + hi) / 2;
      (g(mid) > 0 ? hi : lo) = mid;
    }
    CHECK(std::abs(r.scalars.at("pH0") - lo) <= 1e-9);
    CHECK_FALSE(r.traces.at("titration").empty());
  }
}

TEST_CASE("marching squares: reference level sets") {
  SUBCASE("unit circle") {
    auto xs = discretize(-2, 2, 128, Spacing::linear);
    std::vector<double> f;
    for (double x : xs)
      for (double y : xs) f.push_back(x * x + y * y - 1);
    auto segs = marching_squares(xs, xs, f);
    REQUIRE_FALSE(segs.empty());
    const double h = xs[1] - xs[0], diag = std::sqrt(2.0) * h;
    for (const auto& s : segs) {
      CHECK(std::abs(std::hypot(s.x0, s.y0) - 1) <= diag);
      CHECK(std::abs(std::hypot(s.x1, s.y1) - 1) <= diag);
    }
  }
  SUBCASE("constant") {
    auto xs = discretize(0, 1, 10, Spacing::linear);
    CHECK(marching_squares(xs, xs, std::vector<double>(100, 1.0)).empty());
  }
  SUBCASE("diagonal") {
    auto xs = discretize(0, 1, 33, Spacing::linear);
    std::vector<double> f;
    for (double x : xs)
      for (double y : xs) f.push_back(x - y);
    auto segs = marching_squares(xs, xs, f);
    CHECK(segs.size() == 32);
    for (const auto& s : segs) {
      CHECK(std::abs(s.x0 - s.y0) <= 1e-12);
      CHECK(std::abs(s.x1 - s.y1) <= 1e-12);
    }
  }
  SUBCASE("orientation keeps the increasing side on the left") {
    auto xs = discretize(-1, 1, 21, Spacing::linear);
    std::vector<double> f;
    for (double x : xs)
      for (double y : xs) f.push_back(x * x + y * y - 0.5);
    // f grows outward, so the circle is traversed clockwise: negative signed area
    double area = 0.0;
    for (const auto& s : marching_squares(xs, xs, f)) area += s.x0 * s.y1 - s.x1 * s.y0;
    CHECK(area < 0);
  }
  SUBCASE("saddle resolved by the centre value") {
    std::vector<double> xs{0, 1};
    // corners: (0,0)=1, (0,1)=-1, (1,0)=-1, (1,1)=1.5 -> centre positive
    auto segs = marching_squares(xs, xs, {1, -1, -1, 1.5});
    REQUIRE(segs.size() == 2);
    // each segment isolates one negative corner
    for (const auto& s : segs) {
      const double mx = (s.x0 + s.x1) / 2, my = (s.y0 + s.y1) / 2;
      CHECK(((mx > 0.5 && my < 0.5) || (mx < 0.5 && my > 0.5)));
    }
  }
}

TEST_CASE("marching squares: vertices sit on cell edges between bracketing values (property)") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    // separable and monotone along every grid line, so the edge restriction
    // of f never overshoots its endpoint values
    const double a = 0.5 + 1.5 * std::abs(u(rng)), c = 0.1 + std::abs(u(rng)), k = 2 * u(rng);
    const double sx = trial % 2 ? 1.0 : -1.0;
    auto f = [&](double x, double y) { return sx * std::exp(a * x) + y * y * y + c * y - k; };
    auto xs = discretize(-1.5, 1.5, 40 + trial % 7, Spacing::linear);
    auto ys = discretize(-1.2, 1.3, 35 + trial % 5, Spacing::linear);
    std::vector<double> vals;
    for (double x : xs)
      for (double y : ys) vals.push_back(f(x, y));
    for (const auto& s : marching_squares(xs, ys, vals)) {
      for (auto [px, py] : {std::pair{s.x0, s.y0}, std::pair{s.x1, s.y1}}) {
        const auto ix = std::find(xs.begin(), xs.end(), px);
        const auto iy = std::find(ys.begin(), ys.end(), py);
        REQUIRE((ix != xs.end() || iy != ys.end()));
        double fa, fb;
        if (ix != xs.end()) {
          auto j = std::upper_bound(ys.begin(), ys.end(), py) - ys.begin();
          if (j == static_cast<long>(ys.size())) --j;
          fa = f(px, ys[j - 1]);
          fb = f(px, ys[j]);
        } else {
          auto i = std::upper_bound(xs.begin(), xs.end(), px) - xs.begin();
          if (i == static_cast<long>(xs.size())) --i;
          fa = f(xs[i - 1], py);
          fb = f(xs[i], py);
        }
        CHECK(std::abs(f(px, py)) <= std::max(std::abs(fa), std::abs(fb)));
      }
    }
  }
}

namespace {

struct Manufactured {
  std::vector<double> u, exact;
};

// P = [[p11, p12], [p12, p22]] constant, u = sin(pi x) sin(pi y), Dirichlet 0.
Manufactured poisson(std::size_t n, double p11 = 1, double p12 = 0, double p22 = 1) {
  const double pi = std::numbers::pi;
  PdeGridProblem pb;
  pb.x = discretize(0, 1, static_cast<int>(n), Spacing::linear);
  pb.y = pb.x;
  Manufactured m;
  for (double x : pb.x) {
    for (double y : pb.y) {
      pb.p11.push_back(p11);
      pb.p12.push_back(p12);
      pb.p21.push_back(p12);
      pb.p22.push_back(p22);
      pb.c.push_back(0);
      pb.f.push_back((p11 + p22) * pi * pi * std::sin(pi * x) * std::sin(pi * y) -
                     2 * p12 * pi * pi * std::cos(pi * x) * std::cos(pi * y));
      m.exact.push_back(std::sin(pi * x) * std::sin(pi * y));
    }
  }
  pb.left.value.assign(n, 0.0);
  pb.right.value.assign(n, 0.0);
  pb.bottom.value.assign(n, 0.0);
  pb.top.value.assign(n, 0.0);
  m.u = solve_pde_rect(pb);
  return m;
}

double linf(const Manufactured& m) { return max_abs_diff(m.u, m.exact); }

}  // namespace

TEST_CASE("pde: zero data gives zero") {
  PdeGridProblem pb;
  pb.x = discretize(0, 1, 9, Spacing::linear);
  pb.y = discretize(0, 2, 7, Spacing::linear);
  const std::size_t total = 63;
  pb.p11.assign(total, 1);
  pb.p22.assign(total, 1);
  pb.p12.assign(total, 0);
  pb.p21.assign(total, 0);
  pb.c.assign(total, 0);
  pb.f.assign(total, 0);
  pb.left.value.assign(7, 0);
  pb.right.value.assign(7, 0);
  pb.bottom.value.assign(9, 0);
  pb.top.value.assign(9, 0);
  for (double u : solve_pde_rect(pb)) CHECK(u == 0.0);
}

TEST_CASE("pde: manufactured Poisson problem converges at second order") {
  const auto t0 = std::chrono::steady_clock::now();
  const double e33 = linf(poisson(33)), e65 = linf(poisson(65));
  const double elapsed = seconds_since(t0);
  MESSAGE("errors " << e33 << " / " << e65 << " ratio " << e33 / e65 << ", " << elapsed << " s");
  CHECK(e65 <= 2e-3);
  CHECK(e33 / e65 >= 3.5);
  CHECK(e33 / e65 <= 4.5);
  CHECK(elapsed < 5.0);
}

TEST_CASE("pde: anisotropic diffusion with a cross term converges at second order") {
  const double e1 = linf(poisson(21, 2, 0.5, 1)), e2 = linf(poisson(41, 2, 0.5, 1));
  CHECK(e2 <= 2e-3);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e1 / e2 <= 4.5);
}

TEST_CASE("pde: Neumann edges converge at second order") {
  // u = sin(pi x) (y^2 + 1); flux data on bottom and top, Dirichlet left/right
  const double pi = std::numbers::pi;
  auto solve = [&](std::size_t n) {
    PdeGridProblem pb;
    pb.x = discretize(0, 1, static_cast<int>(n), Spacing::linear);
    pb.y = pb.x;
    std::vector<double> exact;
    for (double x : pb.x) {
      for (double y : pb.y) {
        pb.p11.push_back(1);
        pb.p12.push_back(0);
        pb.p21.push_back(0);
        pb.p22.push_back(1);
        pb.c.push_back(1);
        const double s = std::sin(pi * x);
        pb.f.push_back(pi * pi * s * (y * y + 1) - 2 * s + s * (y * y + 1));
        exact.push_back(s * (y * y + 1));
      }
    }
    pb.left.value.assign(n, 0.0);
    pb.right.value.assign(n, 0.0);
    pb.bottom.kind = BoundaryKind::neumann;
    pb.top.kind = BoundaryKind::neumann;
    for (double x : pb.x) {
      pb.bottom.value.push_back(0.0);                     // -u_y at y = 0
      pb.top.value.push_back(2 * std::sin(pi * x));      // u_y at y = 1
    }
    return max_abs_diff(solve_pde_rect(pb), exact);
  };
  const double e1 = solve(21), e2 = solve(41);
  MESSAGE("Neumann errors " << e1 << " / " << e2);
  CHECK(e2 <= 2e-3);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e1 / e2 <= 4.5);
}

TEST_CASE("pde: maximum principle on random boundary data (property)") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t nx = 8 + trial % 5, ny = 6 + trial % 7, total = nx * ny;
    PdeGridProblem pb;
    pb.x = discretize(0, 1 + trial % 3, static_cast<int>(nx), Spacing::linear);
    pb.y = discretize(-1, 1, static_cast<int>(ny), Spacing::linear);
    pb.p11.assign(total, 0.5 + trial % 4);
    pb.p22.assign(total, 1.0);
    pb.p12.assign(total, 0);
    pb.p21.assign(total, 0);
    pb.c.assign(total, 0);
    pb.f.assign(total, 0);
    double lo = 1e300, hi = -1e300;
    for (auto* side : {&pb.left, &pb.right, &pb.bottom, &pb.top}) {
      const std::size_t n = (side == &pb.left || side == &pb.right) ? ny : nx;
      for (std::size_t k = 0; k < n; ++k) side->value.push_back(u(rng));
    }
    auto sol = solve_pde_rect(pb);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        if (i == 0 || j == 0 || i == nx - 1 || j == ny - 1) {
          lo = std::min(lo, sol[i * ny + j]);
          hi = std::max(hi, sol[i * ny + j]);
        }
      }
    }
    for (double v : sol) {
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
  }
}

TEST_CASE("pde: invalid problems are rejected") {
  auto base = [] {
    PdeGridProblem pb;
    pb.x = discretize(0, 1, 5, Spacing::linear);
    pb.y = pb.x;
    pb.p11.assign(25, 1);
    pb.p22.assign(25, 1);
    pb.p12.assign(25, 0);
    pb.p21.assign(25, 0);
    pb.c.assign(25, 0);
    pb.f.assign(25, 1);
    for (auto* s : {&pb.left, &pb.right, &pb.bottom, &pb.top}) s->value.assign(5, 0);
    return pb;
  };
  auto code = [](const PdeGridProblem& pb) {
    try {
      solve_pde_rect(pb);
    } catch (const RunError& e) {
      return e.code();
    }
    return std::string("ok");
  };
  auto pb = base();
  CHECK(code(pb) == "ok");
  pb.p12[12] = pb.p21[12] = 2;
  CHECK(code(pb) == "non-spd-diffusion");
  pb = base();
  pb.p11[3] = -1;
  CHECK(code(pb) == "non-spd-diffusion");
  pb = base();
  pb.c[7] = -0.5;
  CHECK(code(pb) == "negative-reaction");
  pb = base();
  for (auto* s : {&pb.left, &pb.right, &pb.bottom, &pb.top}) s->kind = BoundaryKind::neumann;
  CHECK(code(pb) == "singular-system");
  pb.c.assign(25, 1.0);
  CHECK(code(pb) == "ok");
}

TEST_CASE("run: heat plate respects its boundary data") {
  const auto ir = compile("laplace.xml");
  auto r = run(ir, default_valuation(ir));
  REQUIRE(r.ok());
  const auto& f = r.fields.at("temperature");
  REQUIRE(f.nx == 41);
  REQUIRE(f.ny == 41);
  for (std::size_t i = 0; i < f.nx; ++i) {
    CHECK(std::abs(f.z[i * f.ny + f.ny - 1] - 10 * std::sin(std::numbers::pi * f.x[i])) <= 1e-12);
  }
  for (std::size_t j = 0; j + 1 < f.ny; ++j) {
    CHECK(f.z[j] == 0.0);
    CHECK(f.z[(f.nx - 1) * f.ny + j] == 0.0);
  }
  // positive source and boundary data: interior is positive
  CHECK(f.z[20 * f.ny + 20] > 0);
}

TEST_CASE("project onto a polyline") {
  std::vector<Point2> seg{{0, -3.14}, {0, 3.14}};
  CHECK(project_point_to_polyline({1, 0.5}, seg) == Point2{0, 0.5});
  CHECK(project_point_to_polyline({0.3, 5}, seg) == Point2{0, 3.14});
  CHECK(project_point_to_polyline({0, -1.25}, seg) == Point2{0, -1.25});
  // equidistant from two segments: the first wins
  std::vector<Point2> vee{{-1, 1}, {0, 0}, {1, 1}};
  auto p = project_point_to_polyline({0, 1}, vee);
  CHECK(p.x < 0);
}

TEST_CASE("sampling: curves and surfaces") {
  ir::ComputeIR c;
  c.tasks.emplace_back(ir::DiscretizeTask{"x", {axis("x", "0", "1", 5)}});
  c.tasks.emplace_back(ir::SampleTask{"sq", "x", false, false, {"x"}, {expr::parse("x^2")}});
  c.tasks.emplace_back(ir::DiscretizeTask{"t", {axis("t", "0", "2*pi", 361)}});
  c.tasks.emplace_back(ir::SampleTask{"circle", "t", false, true, {"t"}, {expr::parse("cos(t)"), expr::parse("sin(t)")}});
  c.tasks.emplace_back(ir::DiscretizeTask{"sq2", {axis("u", "0", "1", 3), axis("w", "0", "1", 3)}});
  c.tasks.emplace_back(ir::SampleTask{"plane", "sq2", true, false, {"u", "w"}, {expr::parse("u+w")}});
  auto r = run(c, {});
  REQUIRE(r.ok());
  CHECK(r.series.at("sq").y == std::vector<double>{0, 1.0 / 16, 0.25, 9.0 / 16, 1});
  for (std::size_t i = 0; i < 361; ++i) {
    CHECK(std::abs(std::hypot(r.series.at("circle").x[i], r.series.at("circle").y[i]) - 1) <= 1e-12);
  }
  const auto& z = r.fields.at("plane").z;
  CHECK(z[0] == 0);
  CHECK(z[2] == 1);
  CHECK(z[6] == 1);
  CHECK(z[8] == 2);
}

TEST_CASE("run: every corpus document executes with defaults") {
  for (const char* name : {"pendulum.xml", "lissajous.xml", "tangent.xml", "titration.xml", "surface.xml",
                           "laplace.xml", "regression.xml", "lotka_volterra.xml"}) {
    CAPTURE(name);
    const auto ir = compile(name);
    auto r = run(ir, default_valuation(ir));
    REQUIRE(r.ok());
    CHECK(r.diagnostics.warnings.empty());
    for (const auto& decl : ir.results) {
      CAPTURE(decl.symbol);
      switch (decl.role) {
        case ir::Role::series:
        case ir::Role::curve: {
          REQUIRE(r.series.count(decl.symbol));
          for (double y : r.series.at(decl.symbol).y) CHECK(std::isfinite(y));
          break;
        }
        case ir::Role::field:
        case ir::Role::mesh: {
          REQUIRE(r.fields.count(decl.symbol));
          CHECK(r.fields.at(decl.symbol).mesh == (decl.role == ir::Role::mesh));
          for (double z : r.fields.at(decl.symbol).z) CHECK(std::isfinite(z));
          break;
        }
        case ir::Role::trace: CHECK(r.traces.count(decl.symbol)); break;
        case ir::Role::scalar: CHECK(r.scalars.count(decl.symbol)); break;
        case ir::Role::point: CHECK_FALSE(r.points.at(decl.symbol).empty()); break;
      }
    }
  }
}

TEST_CASE("run: deterministic output") {
  for (const char* name : {"pendulum.xml", "titration.xml", "laplace.xml", "surface.xml"}) {
    const auto ir = compile(name);
    const auto v = default_valuation(ir);
    CHECK(to_json(run(ir, v)) == to_json(run(ir, v)));
  }
}

TEST_CASE("serialization: JSON and CSV") {
  const auto ir = compile("pendulum.xml");
  auto r = run(ir, default_valuation(ir));
  const std::string json = to_json(r);
  CHECK(json.find("\"series\"") != std::string::npos);
  CHECK(json.find("\"abscissa\": \"t\"") != std::string::npos);

  const std::string csv = to_csv(r, ir);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,theta,theta_dot,theta_lin");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 200);
  CHECK(csv.find("\n0,2,0,2\n") != std::string::npos);
}
