#pragma once

// Execution of a compute IR under a parameter valuation, and the numeric
// kernels it is built from.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "simml/compiler.hpp"

namespace simml::rt {

/// Runtime failure with a stable machine-readable code.
class RunError : public Error {
 public:
  RunError(std::string code, const std::string& message) : Error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

using ParamValue = std::variant<double, Matrix>;
using Valuation = std::map<std::string, ParamValue>;

struct OdeConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  long max_steps = 100000;
};

struct NewtonConfig {
  double tol = 1e-10;
  int max_iter = 50;
  double fd_step = 1e-7;  // relative forward-difference step
};

struct SolverConfig {
  OdeConfig ode;
  NewtonConfig newton;
};

// Discretization --------------------------------------------------------

/// n points from lower to upper (lower < upper), endpoints exact. Throws
/// RunError("bad-interval") or RunError("nonpositive-log-bound").
std::vector<double> discretize(double lower, double upper, int n, Spacing spacing);

// ODE -------------------------------------------------------------------

using OdeRhs = std::function<void(double t, const std::vector<double>& y, std::vector<double>& dydt)>;

struct OdeSolution {
  std::vector<std::vector<double>> states;  // states[k][i]: state k at grid point i
  long steps = 0;
  long rejected = 0;
  std::optional<RunError> failure;  // partial results up to the failure point
};

/// Adaptive Dormand-Prince 5(4) sampled on `grid` (monotone, either direction)
/// through its continuous extension. grid[0] is the initial time.
OdeSolution integrate_ode(const OdeRhs& f, const std::vector<double>& y0, const std::vector<double>& grid,
                          const OdeConfig& cfg = {});

/// Same scheme with `steps` equal steps and no error control.
std::vector<double> integrate_fixed(const OdeRhs& f, const std::vector<double>& y0, double t0, double t1, int steps);

// Nonlinear systems -----------------------------------------------------

using Residual = std::function<void(const std::vector<double>& x, std::vector<double>& r)>;

struct NewtonResult {
  std::vector<double> x;
  int iterations = 0;
  double residual = 0.0;  // infinity norm at x
};

/// Newton iteration with a forward-difference Jacobian. Throws RunError
/// ("singular-jacobian", "no-convergence").
NewtonResult solve_newton(const Residual& f, std::vector<double> x0, const NewtonConfig& cfg = {});

// Contours --------------------------------------------------------------

struct Segment {
  double x0, y0, x1, y1;
  bool operator==(const Segment&) const = default;
};

/// Zero level set of a grid function. values[i * y.size() + j] = f(x[i], y[j]).
/// Saddle cells are resolved by the cell-centre average; each segment is
/// oriented so the increasing side of f lies to its left.
std::vector<Segment> marching_squares(const std::vector<double>& x, const std::vector<double>& y,
                                      const std::vector<double>& values);

// Rectangular diffusion problems ----------------------------------------

/// Nodal data for -div(P grad u) + c u = f. Arrays are indexed i * ny + j.
struct PdeGridProblem {
  std::vector<double> x, y;
  std::vector<double> p11, p12, p21, p22, c, f;
  struct Side {
    BoundaryKind kind = BoundaryKind::dirichlet;
    std::vector<double> value;  // along the edge, in increasing coordinate order
  };
  Side left, right, bottom, top;
};

/// Second-order finite differences, direct sparse solve. Returns u on the full
/// grid (i * ny + j). Throws RunError ("non-spd-diffusion", "negative-reaction",
/// "singular-system").
std::vector<double> solve_pde_rect(const PdeGridProblem& problem);

// Geometry --------------------------------------------------------------

struct Point2 {
  double x = 0.0, y = 0.0;
  bool operator==(const Point2&) const = default;
};

/// Nearest point on the polyline; ties go to the lowest segment index.
Point2 project_point_to_polyline(Point2 p, const std::vector<Point2>& polyline);

// Whole-plan execution --------------------------------------------------

struct Series {
  std::string abscissa;  // domain symbol
  std::vector<double> x;
  std::vector<double> y;
};

/// Values over a tensor grid (i * y.size() + j), or a parametric mesh when
/// `mesh` is set (x, y, z all nu * nv).
struct Field {
  bool mesh = false;
  std::size_t nx = 0, ny = 0;
  std::vector<double> x, y, z;
};

struct RunDiagnostics {
  std::vector<std::string> warnings;
  std::optional<std::string> error;
  std::optional<std::string> error_code;
  std::map<std::string, double> stats;
};

struct RunResult {
  std::map<std::string, Series> series;
  std::map<std::string, Field> fields;
  std::map<std::string, std::vector<Point2>> points;
  std::map<std::string, std::vector<Segment>> traces;
  std::map<std::string, double> scalars;
  RunDiagnostics diagnostics;

  bool ok() const { return !diagnostics.error.has_value(); }
};

/// Defaults of every declared parameter.
Valuation default_valuation(const ir::ComputeIR& ir);

/// Stores one value, clamping bounded scalars. Returns a warning when clamped.
/// Throws RunError("unknown-parameter") / RunError("bad-value").
std::optional<std::string> set_param(const ir::ComputeIR& ir, Valuation& v, const std::string& symbol,
                                     const ParamValue& value);

/// Projects constrained points onto their curves in place.
void project_points(const ir::ComputeIR& ir, Valuation& v);

RunResult run(const ir::ComputeIR& ir, const Valuation& v, const SolverConfig& cfg = {});

/// Canonical JSON (sorted keys); series as parallel arrays.
std::string to_json(const RunResult& r);
/// One column per series, abscissa first; shorter columns padded with empty cells.
std::string to_csv(const RunResult& r, const ir::ComputeIR& ir);

}  // namespace simml::rt
