#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <limits>

#include "simml/runtime.hpp"

namespace simml::rt {

std::vector<double> discretize(double lower, double upper, int n, Spacing spacing) {
  if (!std::isfinite(lower) || !std::isfinite(upper)) {
    throw RunError("non-finite", "interval bounds must be finite (got " + format_real(lower) + ", " +
                                     format_real(upper) + ")");
  }
  if (n < 2) throw RunError("bad-interval", "an interval needs at least 2 points (got " + std::to_string(n) + ")");
  if (!(lower < upper)) {
    throw RunError("bad-interval", "inverted or degenerate interval [" + format_real(lower) + ", " + format_real(upper) + "]");
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  const double last = n - 1;
  if (spacing == Spacing::linear) {
    const double step = (upper - lower) / last;
    for (int k = 0; k < n; ++k) out[k] = lower + k * step;
  } else {
    if (lower <= 0.0 || upper <= 0.0) {
      throw RunError("nonpositive-log-bound", "log spacing needs positive bounds (got [" + format_real(lower) + ", " +
                                                 format_real(upper) + "])");
    }
    const double a = std::log10(lower), b = std::log10(upper);
    for (int k = 0; k < n; ++k) out[k] = std::pow(10.0, a + k * (b - a) / last);
  }
  out.front() = lower;
  out.back() = upper;
  return out;
}

// Dormand-Prince 5(4) ---------------------------------------------------

namespace {

namespace dp {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
// continuous extension
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
}  // namespace dp

using Vec = std::vector<double>;

struct Stepper {
  const OdeRhs& f;
  std::size_t n;
  Vec k2, k3, k4, k5, k6, k7, tmp, y1;

  Stepper(const OdeRhs& rhs, std::size_t size)
      : f(rhs), n(size), k2(size), k3(size), k4(size), k5(size), k6(size), k7(size), tmp(size), y1(size) {}

  // One step from (t, y) with k1 = f(t, y). Fills y1 and k7 = f(t + h, y1).
  void step(double t, const Vec& y, const Vec& k1, double h) {
    using namespace dp;
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a21 * k1[i]);
    f(t + c2 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * h, tmp, k5);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    }
    f(t + h, tmp, k6);
    for (std::size_t i = 0; i < n; ++i) {
      y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    }
    f(t + h, y1, k7);
  }

  double error_norm(const Vec& y, const Vec& k1, double h, const OdeConfig& cfg) const {
    using namespace dp;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(y1[i]));
      const double r = err / sc;
      sum += r * r;
    }
    const double norm = std::sqrt(sum / static_cast<double>(n));
    return std::isfinite(norm) ? norm : std::numeric_limits<double>::infinity();
  }
};

double rms_scaled(const Vec& v, const Vec& y, const OdeConfig& cfg) {
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = v[i] / (cfg.abs_tol + cfg.rel_tol * std::abs(y[i]));
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(v.size()));
}

// Starting step after Hairer, Norsett and Wanner.
double initial_step(const OdeRhs& f, double t0, const Vec& y0, const Vec& f0, double span, const OdeConfig& cfg) {
  const double dir = span > 0 ? 1.0 : -1.0;
  const double d0 = rms_scaled(y0, y0, cfg), d1 = rms_scaled(f0, y0, cfg);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, std::abs(span));
  Vec y1(y0.size()), f1(y0.size());
  for (std::size_t i = 0; i < y0.size(); ++i) y1[i] = y0[i] + dir * h0 * f0[i];
  f(t0 + dir * h0, y1, f1);
  Vec diff(y0.size());
  for (std::size_t i = 0; i < y0.size(); ++i) diff[i] = f1[i] - f0[i];
  const double d2 = rms_scaled(diff, y0, cfg) / h0;
  const double big = std::max(d1, d2);
  const double h1 = big <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / big, 1.0 / 5.0);
  double h = std::min({100 * h0, h1, std::abs(span)});
  if (!std::isfinite(h) || h <= 0) h = std::abs(span) * 1e-3;
  return dir * h;
}

}  // namespace

OdeSolution integrate_ode(const OdeRhs& f, const std::vector<double>& y0, const std::vector<double>& grid,
                          const OdeConfig& cfg) {
  const std::size_t n = y0.size(), m = grid.size();
  OdeSolution sol;
  sol.states.assign(n, std::vector<double>(m, std::numeric_limits<double>::quiet_NaN()));
  if (m == 0) return sol;
  for (std::size_t k = 0; k < n; ++k) sol.states[k][0] = y0[k];
  if (m == 1 || n == 0) {
    if (n == 0) sol.states.clear();
    return sol;
  }
  const double dir = grid.back() > grid.front() ? 1.0 : -1.0;
  for (std::size_t i = 1; i < m; ++i) {
    if (!(dir * (grid[i] - grid[i - 1]) > 0)) {
      sol.failure = RunError("bad-grid", "output times must be strictly monotone");
      return sol;
    }
  }

  Stepper st(f, n);
  Vec y = y0, k1(n);
  double t = grid.front();
  const double t_end = grid.back();
  f(t, y, k1);
  double h = initial_step(f, t, y, k1, t_end - t, cfg);
  bool last_rejected = false;
  std::size_t next = 1;
  std::array<Vec, 5> cont;
  for (auto& c : cont) c.resize(n);

  while (next < m) {
    if (sol.steps + sol.rejected >= cfg.max_steps) {
      sol.failure = RunError("max-steps", "step limit of " + std::to_string(cfg.max_steps) + " reached at t = " +
                                              format_real(t));
      return sol;
    }
    if (std::abs(h) <= 16 * DBL_EPSILON * std::abs(t) || t + h == t) {
      sol.failure = RunError("step-underflow", "step size underflow at t = " + format_real(t));
      return sol;
    }
    if (dir * (t + h - t_end) > 0) h = t_end - t;

    st.step(t, y, k1, h);
    const double err = st.error_norm(y, k1, h, cfg);
    if (err <= 1.0) {
      ++sol.steps;
      const double t_new = dir * (t + h - t_end) >= 0 ? t_end : t + h;
      using namespace dp;
      for (std::size_t i = 0; i < n; ++i) {
        const double ydiff = st.y1[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        cont[0][i] = y[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * st.k7[i] - bspl;
        cont[4][i] = h * (d1 * k1[i] + d3 * st.k3[i] + d4 * st.k4[i] + d5 * st.k5[i] + d6 * st.k6[i] + d7 * st.k7[i]);
      }
      while (next < m && dir * (grid[next] - t_new) <= 0) {
        if (grid[next] == t_new) {
          for (std::size_t i = 0; i < n; ++i) sol.states[i][next] = st.y1[i];
        } else {
          const double theta = (grid[next] - t) / h, theta1 = 1.0 - theta;
          for (std::size_t i = 0; i < n; ++i) {
            sol.states[i][next] =
                cont[0][i] + theta * (cont[1][i] + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])));
          }
        }
        ++next;
      }
      t = t_new;
      y = st.y1;
      k1 = st.k7;
      double fac = err == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      last_rejected = false;
    } else {
      ++sol.rejected;
      const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h *= fac;
      last_rejected = true;
    }
  }
  return sol;
}

std::vector<double> integrate_fixed(const OdeRhs& f, const std::vector<double>& y0, double t0, double t1, int steps) {
  if (steps < 1) throw RunError("bad-grid", "at least one step is required");
  Stepper st(f, y0.size());
  Vec y = y0, k1(y0.size());
  const double h = (t1 - t0) / steps;
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + s * h;
    f(t, y, k1);
    st.step(t, y, k1, h);
    y = st.y1;
  }
  return y;
}

// Newton ----------------------------------------------------------------

namespace {

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    m = std::max(m, std::abs(x));
  }
  return m;
}

}  // namespace

NewtonResult solve_newton(const Residual& f, std::vector<double> x, const NewtonConfig& cfg) {
  const std::size_t n = x.size();
  std::vector<double> r(n), rp(n), xp(n);
  Eigen::MatrixXd jac(n, n);
  Eigen::VectorXd rhs(n);
  NewtonResult out;
  for (int iter = 0;; ++iter) {
    f(x, r);
    const double norm = inf_norm(r);
    if (norm <= cfg.tol) {
      out.x = x;
      out.iterations = iter;
      out.residual = norm;
      return out;
    }
    if (!std::isfinite(norm) || inf_norm(x) == std::numeric_limits<double>::infinity()) {
      throw RunError("no-convergence", "Newton iteration diverged (non-finite residual after " +
                                           std::to_string(iter) + " iterations)");
    }
    if (iter >= cfg.max_iter) {
      throw RunError("no-convergence", "Newton iteration did not converge in " + std::to_string(cfg.max_iter) +
                                           " iterations (residual " + format_real(norm) + ")");
    }
    for (std::size_t j = 0; j < n; ++j) {
      xp = x;
      const double h = cfg.fd_step * std::max(1.0, std::abs(x[j]));
      xp[j] += h;
      f(xp, rp);
      for (std::size_t i = 0; i < n; ++i) jac(i, j) = (rp[i] - r[i]) / (xp[j] - x[j]);
    }
    if (!jac.allFinite()) throw RunError("no-convergence", "Newton iteration produced a non-finite Jacobian");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      throw RunError("singular-jacobian", "singular Jacobian at iteration " + std::to_string(iter));
    }
    for (std::size_t i = 0; i < n; ++i) rhs(i) = -r[i];
    const Eigen::VectorXd dx = lu.solve(rhs);
    for (std::size_t i = 0; i < n; ++i) x[i] += dx(i);
  }
}

// Marching squares ------------------------------------------------------

std::vector<Segment> marching_squares(const std::vector<double>& x, const std::vector<double>& y,
                                      const std::vector<double>& values) {
  const std::size_t nx = x.size(), ny = y.size();
  if (values.size() != nx * ny) throw RunError("shape", "grid values do not match the axes");
  std::vector<Segment> out;
  if (nx < 2 || ny < 2) return out;
  auto at = [&](std::size_t i, std::size_t j) { return values[i * ny + j]; };

  for (std::size_t i = 0; i + 1 < nx; ++i) {
    for (std::size_t j = 0; j + 1 < ny; ++j) {
      // corners counter-clockwise from bottom-left
      const std::array<double, 4> v = {at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
      const std::array<Point2, 4> p = {Point2{x[i], y[j]}, Point2{x[i + 1], y[j]}, Point2{x[i + 1], y[j + 1]},
                                       Point2{x[i], y[j + 1]}};
      if (!std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); })) continue;
      std::array<bool, 4> pos;
      for (int k = 0; k < 4; ++k) pos[k] = v[k] >= 0.0;

      // edge k joins corner k and corner k+1
      auto crossing = [&](int k) {
        const int a = k, b = (k + 1) % 4;
        const double t = v[a] / (v[a] - v[b]);
        return Point2{p[a].x + t * (p[b].x - p[a].x), p[a].y + t * (p[b].y - p[a].y)};
      };
      std::vector<std::pair<int, int>> pairs;
      std::vector<int> edges;
      for (int k = 0; k < 4; ++k) {
        if (pos[k] != pos[(k + 1) % 4]) edges.push_back(k);
      }
      if (edges.empty()) continue;
      if (edges.size() == 2) {
        pairs.emplace_back(edges[0], edges[1]);
      } else {
        const double centre = (v[0] + v[1] + v[2] + v[3]) / 4.0;
        if ((centre >= 0.0) == pos[0]) {
          pairs.emplace_back(0, 1);  // cut off corner 1
          pairs.emplace_back(2, 3);  // cut off corner 3
        } else {
          pairs.emplace_back(3, 0);
          pairs.emplace_back(1, 2);
        }
      }

      const double hx = x[i + 1] - x[i], hy = y[j + 1] - y[j];
      for (auto [ea, eb] : pairs) {
        Point2 a = crossing(ea), b = crossing(eb);
        if (a == b) continue;
        const double u = ((a.x + b.x) / 2 - x[i]) / hx, w = ((a.y + b.y) / 2 - y[j]) / hy;
        const double gx = ((v[1] - v[0]) * (1 - w) + (v[2] - v[3]) * w) / hx;
        const double gy = ((v[3] - v[0]) * (1 - u) + (v[2] - v[1]) * u) / hy;
        if ((b.x - a.x) * gy - (b.y - a.y) * gx < 0) std::swap(a, b);
        out.push_back({a.x, a.y, b.x, b.y});
      }
    }
  }
  return out;
}

// Diffusion on a rectangle ----------------------------------------------

namespace {

// Weights of the derivative at `at` of the quadratic through three nodes.
std::array<double, 3> derivative_weights(const std::array<double, 3>& xs, double at) {
  std::array<double, 3> w{};
  for (int k = 0; k < 3; ++k) {
    double denom = 1.0;
    for (int l = 0; l < 3; ++l) {
      if (l != k) denom *= xs[k] - xs[l];
    }
    double num = 0.0;
    for (int m = 0; m < 3; ++m) {
      if (m == k) continue;
      double prod = 1.0;
      for (int l = 0; l < 3; ++l) {
        if (l != k && l != m) prod *= at - xs[l];
      }
      num += prod;
    }
    w[k] = num / denom;
  }
  return w;
}

// Three stencil indices along an axis for a derivative at index i: centred
// inside, one-sided at the ends.
std::array<std::size_t, 3> stencil(std::size_t i, std::size_t n) {
  if (i == 0) return {0, 1, 2};
  if (i == n - 1) return {n - 3, n - 2, n - 1};
  return {i - 1, i, i + 1};
}

}  // namespace

std::vector<double> solve_pde_rect(const PdeGridProblem& pb) {
  const std::size_t nx = pb.x.size(), ny = pb.y.size(), total = nx * ny;
  if (nx < 3 || ny < 3) throw RunError("bad-interval", "a diffusion problem needs at least 3 points per axis");
  for (const auto* arr : {&pb.p11, &pb.p12, &pb.p21, &pb.p22, &pb.c, &pb.f}) {
    if (arr->size() != total) throw RunError("shape", "coefficient arrays do not match the grid");
  }
  if (pb.left.value.size() != ny || pb.right.value.size() != ny || pb.bottom.value.size() != nx ||
      pb.top.value.size() != nx) {
    throw RunError("shape", "boundary arrays do not match the grid");
  }
  auto id = [ny](std::size_t i, std::size_t j) { return i * ny + j; };
  auto where = [&](std::size_t i, std::size_t j) {
    return "(" + format_real(pb.x[i]) + ", " + format_real(pb.y[j]) + ")";
  };

  bool reaction = false;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t k = id(i, j);
      for (const auto* arr : {&pb.p11, &pb.p12, &pb.p21, &pb.p22, &pb.c, &pb.f}) {
        if (!std::isfinite((*arr)[k])) throw RunError("non-finite", "non-finite coefficient at " + where(i, j));
      }
      if (!(pb.p11[k] > 0 && pb.p22[k] > 0 && pb.p11[k] * pb.p22[k] - pb.p12[k] * pb.p21[k] > 0)) {
        throw RunError("non-spd-diffusion", "diffusion matrix is not positive definite at " + where(i, j));
      }
      if (pb.c[k] < 0) throw RunError("negative-reaction", "negative reaction coefficient at " + where(i, j));
      if (pb.c[k] > 0) reaction = true;
    }
  }

  // Dirichlet nodes and their values; corners take the left/right value.
  std::vector<char> fixed(total, 0);
  std::vector<double> value(total, 0.0);
  auto fix = [&](std::size_t i, std::size_t j, double g) {
    if (fixed[id(i, j)]) return;
    if (!std::isfinite(g)) throw RunError("non-finite", "non-finite boundary value at " + where(i, j));
    fixed[id(i, j)] = 1;
    value[id(i, j)] = g;
  };
  if (pb.left.kind == BoundaryKind::dirichlet) {
    for (std::size_t j = 0; j < ny; ++j) fix(0, j, pb.left.value[j]);
  }
  if (pb.right.kind == BoundaryKind::dirichlet) {
    for (std::size_t j = 0; j < ny; ++j) fix(nx - 1, j, pb.right.value[j]);
  }
  if (pb.bottom.kind == BoundaryKind::dirichlet) {
    for (std::size_t i = 0; i < nx; ++i) fix(i, 0, pb.bottom.value[i]);
  }
  if (pb.top.kind == BoundaryKind::dirichlet) {
    for (std::size_t i = 0; i < nx; ++i) fix(i, ny - 1, pb.top.value[i]);
  }
  const bool any_fixed = std::find(fixed.begin(), fixed.end(), 1) != fixed.end();
  if (!any_fixed && !reaction) {
    throw RunError("singular-system", "pure Neumann problem without reaction term has no unique solution");
  }

  std::vector<long> unknown(total, -1);
  long count = 0;
  for (std::size_t k = 0; k < total; ++k) {
    if (!fixed[k]) unknown[k] = count++;
  }

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(count);
  long row = 0;
  auto add = [&](std::size_t i, std::size_t j, double coef) {
    const std::size_t k = id(i, j);
    if (fixed[k]) {
      rhs(row) -= coef * value[k];
    } else {
      trip.emplace_back(row, unknown[k], coef);
    }
  };
  // d/dx at node (i, j) times `scale`
  auto add_dx = [&](std::size_t i, std::size_t j, double scale) {
    const auto s = stencil(i, nx);
    const auto w = derivative_weights({pb.x[s[0]], pb.x[s[1]], pb.x[s[2]]}, pb.x[i]);
    for (int q = 0; q < 3; ++q) add(s[q], j, scale * w[q]);
  };
  auto add_dy = [&](std::size_t i, std::size_t j, double scale) {
    const auto s = stencil(j, ny);
    const auto w = derivative_weights({pb.y[s[0]], pb.y[s[1]], pb.y[s[2]]}, pb.y[j]);
    for (int q = 0; q < 3; ++q) add(i, s[q], scale * w[q]);
  };

  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t k = id(i, j);
      if (fixed[k]) continue;
      row = unknown[k];
      const bool on_x = i == 0 || i == nx - 1, on_y = j == 0 || j == ny - 1;
      if (on_x || on_y) {
        // conormal flux (P grad u).n = g on a Neumann edge
        if (on_x) {
          const double sign = i == 0 ? -1.0 : 1.0;
          add_dx(i, j, sign * pb.p11[k]);
          add_dy(i, j, sign * pb.p12[k]);
          rhs(row) += (i == 0 ? pb.left : pb.right).value[j];
        } else {
          const double sign = j == 0 ? -1.0 : 1.0;
          add_dx(i, j, sign * pb.p21[k]);
          add_dy(i, j, sign * pb.p22[k]);
          rhs(row) += (j == 0 ? pb.bottom : pb.top).value[i];
        }
        continue;
      }
      const double hxm = pb.x[i] - pb.x[i - 1], hxp = pb.x[i + 1] - pb.x[i];
      const double hym = pb.y[j] - pb.y[j - 1], hyp = pb.y[j + 1] - pb.y[j];
      const double sx = hxm + hxp, sy = hym + hyp;
      const double ap = 2 * (pb.p11[k] + pb.p11[id(i + 1, j)]) / 2 / (hxp * sx);
      const double am = 2 * (pb.p11[k] + pb.p11[id(i - 1, j)]) / 2 / (hxm * sx);
      const double bp = 2 * (pb.p22[k] + pb.p22[id(i, j + 1)]) / 2 / (hyp * sy);
      const double bm = 2 * (pb.p22[k] + pb.p22[id(i, j - 1)]) / 2 / (hym * sy);
      add(i, j, ap + am + bp + bm + pb.c[k]);
      add(i + 1, j, -ap);
      add(i - 1, j, -am);
      add(i, j + 1, -bp);
      add(i, j - 1, -bm);
      const double q = sx * sy;
      const double p12e = pb.p12[id(i + 1, j)], p12w = pb.p12[id(i - 1, j)];
      const double p21n = pb.p21[id(i, j + 1)], p21s = pb.p21[id(i, j - 1)];
      if (p12e != 0 || p12w != 0 || p21n != 0 || p21s != 0) {
        add(i + 1, j + 1, -(p12e + p21n) / q);
        add(i + 1, j - 1, (p12e + p21s) / q);
        add(i - 1, j + 1, (p12w + p21n) / q);
        add(i - 1, j - 1, -(p12w + p21s) / q);
      }
      rhs(row) += pb.f[k];
    }
  }

  Eigen::SparseMatrix<double> a(count, count);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw RunError("singular-system", "singular finite-difference system");
  const Eigen::VectorXd u = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !u.allFinite()) {
    throw RunError("singular-system", "finite-difference solve failed");
  }
  std::vector<double> out(value);
  for (std::size_t k = 0; k < total; ++k) {
    if (!fixed[k]) out[k] = u(unknown[k]);
  }
  return out;
}

// Geometry --------------------------------------------------------------

Point2 project_point_to_polyline(Point2 p, const std::vector<Point2>& poly) {
  if (poly.empty()) return p;
  if (poly.size() == 1) return poly.front();
  Point2 best = poly.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s + 1 < poly.size(); ++s) {
    const Point2 a = poly[s], b = poly[s + 1];
    const double dx = b.x - a.x, dy = b.y - a.y, len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    Point2 q;
    if (t == 0.0) {
      q = a;
    } else if (t == 1.0) {
      q = b;
    } else if ((p.x - a.x) * dy == (p.y - a.y) * dx) {
      q = p;  // already on the segment
    } else if (dx == 0.0) {
      q = {a.x, p.y};
    } else if (dy == 0.0) {
      q = {p.x, a.y};
    } else {
      q = {a.x + t * dx, a.y + t * dy};
    }
    const double d = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

}  // namespace simml::rt
