#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "simml/runtime.hpp"

namespace simml::rt {

namespace {

using expr::Array;
using Json = nlohmann::json;

double as_scalar(const ParamValue& v, const std::string& symbol) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw RunError("bad-value", "parameter '" + symbol + "' expects a number, got a matrix");
}

double clamp_scalar(const ir::ParamDecl& p, double value, std::vector<std::string>* warnings) {
  double out = value;
  if (p.min && out < *p.min) out = *p.min;
  if (p.max && out > *p.max) out = *p.max;
  if (out != value && warnings) {
    warnings->push_back("value " + format_real(value) + " for '" + p.symbol + "' clamped to " + format_real(out));
  }
  return out;
}

std::size_t selector_index(const ir::ParamDecl& p, double value, std::vector<std::string>* warnings) {
  const double last = p.table.empty() ? 0.0 : static_cast<double>(p.table.size() - 1);
  const double idx = std::clamp(std::round(value), 0.0, last);
  if (idx != value && warnings) {
    warnings->push_back("selection " + format_real(value) + " for '" + p.symbol + "' clamped to " + format_real(idx));
  }
  return static_cast<std::size_t>(idx);
}

Array to_array(const Matrix& m) { return Array{{m.rows, m.cols}, m.data}; }

double eval_scalar(const expr::Expr& e, const expr::Context& ctx, const std::string& what) {
  const auto r = expr::eval(e, ctx);
  if (r.non_finite) throw RunError("non-finite", what + " evaluates to a non-finite value");
  return r.value;
}

// Binds every declared parameter. Values are clamped into their bounds.
void bind_params(const ir::ComputeIR& ir, const Valuation& val, expr::Context& ctx, std::vector<std::string>* warnings) {
  for (const auto& p : ir.params) {
    auto it = val.find(p.symbol);
    if (it == val.end()) throw RunError("unbound-parameter", "no value for parameter '" + p.symbol + "'");
    switch (p.kind) {
      case ir::ParamKind::scalar:
      case ir::ParamKind::coordinate:
        ctx.set(p.symbol, clamp_scalar(p, as_scalar(it->second, p.symbol), warnings));
        break;
      case ir::ParamKind::matrix: {
        const Matrix* m = std::get_if<Matrix>(&it->second);
        if (!m) throw RunError("bad-value", "parameter '" + p.symbol + "' expects a matrix");
        ctx.set(p.symbol, to_array(*m));
        break;
      }
      case ir::ParamKind::selector: {
        const std::size_t idx = selector_index(p, as_scalar(it->second, p.symbol), warnings);
        ctx.set(p.symbol, static_cast<double>(idx));
        for (std::size_t c = 0; c < p.members.size(); ++c) ctx.set(p.members[c], p.table.at(idx).at(c));
        break;
      }
    }
  }
}

std::vector<Point2> polyline_points(const ir::PolylineDecl& pl, const expr::Context& ctx) {
  std::vector<Point2> out;
  for (const auto& [x, y] : pl.vertices) {
    out.push_back({eval_scalar(x, ctx, "vertex of '" + pl.label + "'"), eval_scalar(y, ctx, "vertex of '" + pl.label + "'")});
  }
  return out;
}

const ir::PolylineDecl* find_polyline(const ir::ComputeIR& ir, const std::string& label) {
  for (const auto& pl : ir.polylines) {
    if (pl.label == label) return &pl;
  }
  return nullptr;
}

// Projects constrained points; returns every point's final position.
std::map<std::string, Point2> place_points(const ir::ComputeIR& ir, expr::Context& ctx) {
  std::map<std::string, Point2> out;
  for (const auto& pt : ir.points) {
    Point2 p{eval_scalar(expr::parse(pt.x_symbol), ctx, pt.x_symbol),
             eval_scalar(expr::parse(pt.y_symbol), ctx, pt.y_symbol)};
    if (pt.constraint) {
      const ir::PolylineDecl* pl = find_polyline(ir, *pt.constraint);
      if (!pl) throw RunError("unresolved", "point '" + pt.label + "' is constrained to unknown curve '" + *pt.constraint + "'");
      p = project_point_to_polyline(p, polyline_points(*pl, ctx));
      ctx.set(pt.x_symbol, p.x);
      ctx.set(pt.y_symbol, p.y);
    }
    out[pt.label] = p;
  }
  return out;
}

// Executes a lowered function body with positional vector arguments.
class FunctionCall {
 public:
  FunctionCall(const ir::FunctionDef& def, expr::Context ctx) : def_(def), ctx_(std::move(ctx)) {
    for (const auto& a : def_.body) {
      if (a.kind == ir::Assign::Kind::stack) continue;
      auto it = std::find(def_.inputs.begin(), def_.inputs.end(), a.source);
      if (it == def_.inputs.end()) throw RunError("bad-function", def_.name + ": unknown input '" + a.source + "'");
      source_.push_back(static_cast<std::size_t>(it - def_.inputs.begin()));
    }
  }

  void operator()(const std::vector<const std::vector<double>*>& args, std::vector<double>& out) {
    std::size_t s = 0;
    for (const auto& a : def_.body) {
      switch (a.kind) {
        case ir::Assign::Kind::alias: ctx_.set(a.lhs, (*args[source_[s++]])[0]); break;
        case ir::Assign::Kind::select: ctx_.set(a.lhs, (*args[source_[s++]])[a.row - 1]); break;
        case ir::Assign::Kind::stack:
          out.resize(a.items.size());
          for (std::size_t k = 0; k < a.items.size(); ++k) out[k] = expr::eval(a.items[k], ctx_).value;
          break;
      }
    }
  }

 private:
  const ir::FunctionDef& def_;
  expr::Context ctx_;
  std::vector<std::size_t> source_;
};

struct Domain {
  std::vector<std::string> symbols;
  std::vector<std::vector<double>> axes;
};

class Runner {
 public:
  Runner(const ir::ComputeIR& ir, const SolverConfig& cfg, RunResult& res) : ir_(ir), cfg_(cfg), res_(res) {}

  void start(const Valuation& val) {
    bind_params(ir_, val, ctx_, &res_.diagnostics.warnings);
    for (const auto& [label, p] : place_points(ir_, ctx_)) res_.points[label] = {p};
    for (const auto& r : ir_.results) {
      if (r.role != ir::Role::point) continue;
      const ir::ParamDecl* p = ir_.param(r.symbol);
      if (!p || p->kind != ir::ParamKind::matrix) continue;
      const Matrix& m = std::get<Matrix>(val.at(r.symbol));
      auto& pts = res_.points[r.symbol];
      for (std::size_t row = 0; row < m.rows && m.cols >= 2; ++row) pts.push_back({m.at(row, 0), m.at(row, 1)});
    }
  }

  void task(const ir::DiscretizeTask& t) {
    Domain d;
    for (const auto& a : t.axes) {
      const double lo = eval_scalar(a.lower, ctx_, "lower bound of '" + a.symbol + "'");
      const double hi = eval_scalar(a.upper, ctx_, "upper bound of '" + a.symbol + "'");
      try {
        d.axes.push_back(discretize(lo, hi, a.n_points, a.spacing));
      } catch (const RunError& e) {
        throw RunError(e.code(), "'" + a.symbol + "': " + e.what());
      }
      d.symbols.push_back(a.symbol);
    }
    if (d.axes.size() == 1) ctx_.set(d.symbols[0], Array::vector(d.axes[0]));
    domains_[t.label] = std::move(d);
  }

  void task(const ir::OdeSolveTask& t) {
    const auto& grid = domain(t.time).axes.at(0);
    std::vector<double> y0;
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      y0.push_back(eval_scalar(t.initial[k], ctx_, "initial value of '" + t.states[k] + "'"));
    }
    FunctionCall rhs(function(t.function), ctx_);
    std::vector<double> tbox(1);
    OdeRhs f = [&](double time, const std::vector<double>& y, std::vector<double>& dy) {
      tbox[0] = time;
      rhs({&tbox, &y}, dy);
    };
    OdeSolution sol = integrate_ode(f, y0, grid, cfg_.ode);
    res_.diagnostics.stats[t.label + ".steps"] = static_cast<double>(sol.steps);
    res_.diagnostics.stats[t.label + ".rejected"] = static_cast<double>(sol.rejected);
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      ctx_.set(t.states[k], Array::vector(sol.states[k]));
      res_.series[t.states[k]] = Series{t.time, grid, sol.states[k]};
    }
    if (sol.failure) throw *sol.failure;
  }

  void task(const ir::OutputEvalTask& t) {
    const auto& grid = domain(t.time).axes.at(0);
    auto r = expr::eval_vectorized(t.value, ctx_, {grid.size()});
    note_non_finite(t.symbol, r.non_finite);
    ctx_.set(t.symbol, r.values);
    res_.series[t.symbol] = Series{t.time, grid, std::move(r.values.data)};
  }

  void task(const ir::NewtonTask& t) {
    std::vector<double> x0;
    for (std::size_t k = 0; k < t.unknowns.size(); ++k) {
      x0.push_back(eval_scalar(t.initial[k], ctx_, "initial guess of '" + t.unknowns[k] + "'"));
    }
    FunctionCall residual(function(t.function), ctx_);
    Residual f = [&](const std::vector<double>& x, std::vector<double>& r) { residual({&x}, r); };
    NewtonResult sol = solve_newton(f, x0, cfg_.newton);
    res_.diagnostics.stats[t.label + ".iterations"] = sol.iterations;
    for (std::size_t k = 0; k < t.unknowns.size(); ++k) {
      ctx_.set(t.unknowns[k], sol.x[k]);
      res_.scalars[t.unknowns[k]] = sol.x[k];
    }
  }

  void task(const ir::ImplicitTraceTask& t) {
    const Domain& d = domain(t.domain);
    expr::Context local = grid_context(d);
    auto r = expr::eval_vectorized(t.f, local, {d.axes[0].size(), d.axes[1].size()});
    note_non_finite(t.label, r.non_finite);
    res_.traces[t.label] = marching_squares(d.axes[0], d.axes[1], r.values.data);
  }

  void task(const ir::SampleTask& t) {
    const Domain& d = domain(t.domain);
    if (!t.surface) {
      const auto& grid = d.axes.at(0);
      std::vector<std::vector<double>> cols;
      for (const auto& e : t.exprs) {
        auto r = expr::eval_vectorized(e, ctx_, {grid.size()});
        note_non_finite(t.label, r.non_finite);
        cols.push_back(std::move(r.values.data));
      }
      res_.series[t.label] = t.parametric ? Series{d.symbols[0], cols.at(0), cols.at(1)} : Series{d.symbols[0], grid, cols.at(0)};
      return;
    }
    expr::Context local = grid_context(d);
    const std::size_t nx = d.axes[0].size(), ny = d.axes[1].size();
    std::vector<std::vector<double>> cols;
    for (const auto& e : t.exprs) {
      auto r = expr::eval_vectorized(e, local, {nx, ny});
      note_non_finite(t.label, r.non_finite);
      cols.push_back(std::move(r.values.data));
    }
    Field f;
    f.nx = nx;
    f.ny = ny;
    if (t.parametric) {
      f.mesh = true;
      f.x = cols.at(0);
      f.y = cols.at(1);
      f.z = cols.at(2);
    } else {
      f.x = d.axes[0];
      f.y = d.axes[1];
      f.z = cols.at(0);
    }
    res_.fields[t.label] = std::move(f);
  }

  void task(const ir::PdeTask& t) {
    const Domain& d = domain(t.domain);
    expr::Context local = grid_context(d);
    const std::size_t nx = d.axes[0].size(), ny = d.axes[1].size();
    auto grid_values = [&](const expr::Expr& e) { return expr::eval_vectorized(e, local, {nx, ny}).values.data; };
    PdeGridProblem pb;
    pb.x = d.axes[0];
    pb.y = d.axes[1];
    pb.p11 = grid_values(t.p11);
    pb.p12 = grid_values(t.p12);
    pb.p21 = grid_values(t.p21);
    pb.p22 = grid_values(t.p22);
    pb.c = grid_values(t.c);
    pb.f = grid_values(t.f);
    for (const auto& b : t.boundary) {
      const auto all = grid_values(b.value);
      PdeGridProblem::Side side{b.kind, {}};
      switch (b.edge) {
        case Edge::left:
          for (std::size_t j = 0; j < ny; ++j) side.value.push_back(all[j]);
          pb.left = side;
          break;
        case Edge::right:
          for (std::size_t j = 0; j < ny; ++j) side.value.push_back(all[(nx - 1) * ny + j]);
          pb.right = side;
          break;
        case Edge::bottom:
          for (std::size_t i = 0; i < nx; ++i) side.value.push_back(all[i * ny]);
          pb.bottom = side;
          break;
        case Edge::top:
          for (std::size_t i = 0; i < nx; ++i) side.value.push_back(all[i * ny + ny - 1]);
          pb.top = side;
          break;
      }
    }
    Field f;
    f.nx = nx;
    f.ny = ny;
    f.x = pb.x;
    f.y = pb.y;
    f.z = solve_pde_rect(pb);
    res_.fields[t.label] = std::move(f);
  }

 private:
  const Domain& domain(const std::string& label) const {
    auto it = domains_.find(label);
    if (it == domains_.end()) throw RunError("unresolved", "domain '" + label + "' has not been discretized");
    return it->second;
  }

  const ir::FunctionDef& function(const std::string& name) const {
    const ir::FunctionDef* f = ir_.function(name);
    if (!f) throw RunError("unresolved", "function '" + name + "' is not defined");
    return *f;
  }

  // The outer context with the two axes replaced by ndgrid arrays.
  expr::Context grid_context(const Domain& d) const {
    if (d.axes.size() != 2) throw RunError("unresolved", "a two-dimensional domain is required");
    const std::size_t nx = d.axes[0].size(), ny = d.axes[1].size();
    Array gx{{nx, ny}, std::vector<double>(nx * ny)}, gy{{nx, ny}, std::vector<double>(nx * ny)};
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        gx.data[i * ny + j] = d.axes[0][i];
        gy.data[i * ny + j] = d.axes[1][j];
      }
    }
    expr::Context local = ctx_;
    local.set(d.symbols[0], std::move(gx));
    local.set(d.symbols[1], std::move(gy));
    return local;
  }

  void note_non_finite(const std::string& label, std::size_t count) {
    if (count) res_.diagnostics.warnings.push_back(std::to_string(count) + " non-finite values in '" + label + "'");
  }

  const ir::ComputeIR& ir_;
  const SolverConfig& cfg_;
  RunResult& res_;
  expr::Context ctx_;
  std::map<std::string, Domain> domains_;
};

std::string task_label(const ir::Task& t) {
  return std::visit(
      [](const auto& v) -> std::string {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ir::OutputEvalTask>) {
          return v.symbol;
        } else {
          return v.label;
        }
      },
      t);
}

Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double d : v) a.push_back(std::isfinite(d) ? Json(d) : Json(nullptr));
  return a;
}

}  // namespace

Valuation default_valuation(const ir::ComputeIR& ir) {
  Valuation v;
  for (const auto& p : ir.params) {
    if (p.kind == ir::ParamKind::matrix) {
      v[p.symbol] = p.default_matrix;
    } else {
      v[p.symbol] = p.default_value;
    }
  }
  return v;
}

std::optional<std::string> set_param(const ir::ComputeIR& ir, Valuation& v, const std::string& symbol,
                                     const ParamValue& value) {
  const ir::ParamDecl* p = ir.param(symbol);
  if (!p) throw RunError("unknown-parameter", "unknown parameter '" + symbol + "'");
  std::vector<std::string> warnings;
  if (p->kind == ir::ParamKind::matrix) {
    const Matrix* m = std::get_if<Matrix>(&value);
    if (!m) throw RunError("bad-value", "parameter '" + symbol + "' expects a matrix");
    if (m->data.size() != m->rows * m->cols) throw RunError("bad-value", "malformed matrix for '" + symbol + "'");
    for (double d : m->data) {
      if (!std::isfinite(d)) throw RunError("bad-value", "non-finite entry in '" + symbol + "'");
    }
    v[symbol] = *m;
    return std::nullopt;
  }
  const double d = as_scalar(value, symbol);
  if (!std::isfinite(d)) throw RunError("bad-value", "non-finite value for '" + symbol + "'");
  if (p->kind == ir::ParamKind::selector) {
    v[symbol] = static_cast<double>(selector_index(*p, d, &warnings));
  } else {
    v[symbol] = clamp_scalar(*p, d, &warnings);
  }
  if (warnings.empty()) return std::nullopt;
  return warnings.front();
}

void project_points(const ir::ComputeIR& ir, Valuation& v) {
  expr::Context ctx;
  bind_params(ir, v, ctx, nullptr);
  for (const auto& [label, p] : place_points(ir, ctx)) {
    for (const auto& pt : ir.points) {
      if (pt.label != label || !pt.constraint) continue;
      v[pt.x_symbol] = p.x;
      v[pt.y_symbol] = p.y;
    }
  }
}

RunResult run(const ir::ComputeIR& ir, const Valuation& v, const SolverConfig& cfg) {
  RunResult res;
  Runner runner(ir, cfg, res);
  auto fail = [&](const std::string& where, const std::string& code, const std::string& msg) {
    res.diagnostics.error = where.empty() ? msg : where + ": " + msg;
    res.diagnostics.error_code = code;
  };
  try {
    runner.start(v);
  } catch (const RunError& e) {
    fail("", e.code(), e.what());
    return res;
  } catch (const Error& e) {
    fail("", "evaluation", e.what());
    return res;
  }
  for (const auto& t : ir.tasks) {
    try {
      std::visit([&](const auto& task) { runner.task(task); }, t);
    } catch (const RunError& e) {
      fail(task_label(t), e.code(), e.what());
      return res;
    } catch (const expr::UnboundSymbolError& e) {
      fail(task_label(t), "unbound-symbol", e.what());
      return res;
    } catch (const Error& e) {
      fail(task_label(t), "evaluation", e.what());
      return res;
    }
  }
  return res;
}

std::string to_json(const RunResult& r) {
  Json j;
  j["series"] = Json::object();
  for (const auto& [k, s] : r.series) j["series"][k] = {{"abscissa", s.abscissa}, {"x", numbers(s.x)}, {"y", numbers(s.y)}};
  j["fields"] = Json::object();
  for (const auto& [k, f] : r.fields) {
    j["fields"][k] = {{"mesh", f.mesh}, {"nx", f.nx}, {"ny", f.ny},
                      {"x", numbers(f.x)}, {"y", numbers(f.y)}, {"z", numbers(f.z)}};
  }
  j["points"] = Json::object();
  for (const auto& [k, pts] : r.points) {
    Json a = Json::array();
    for (const auto& p : pts) a.push_back({p.x, p.y});
    j["points"][k] = a;
  }
  j["traces"] = Json::object();
  for (const auto& [k, segs] : r.traces) {
    Json a = Json::array();
    for (const auto& s : segs) a.push_back({s.x0, s.y0, s.x1, s.y1});
    j["traces"][k] = a;
  }
  j["scalars"] = Json::object();
  for (const auto& [k, v] : r.scalars) j["scalars"][k] = std::isfinite(v) ? Json(v) : Json(nullptr);
  Json d;
  d["warnings"] = r.diagnostics.warnings;
  d["error"] = r.diagnostics.error ? Json(*r.diagnostics.error) : Json(nullptr);
  d["errorCode"] = r.diagnostics.error_code ? Json(*r.diagnostics.error_code) : Json(nullptr);
  d["stats"] = r.diagnostics.stats;
  j["diagnostics"] = d;
  return j.dump(2) + "\n";
}

std::string to_csv(const RunResult& r, const ir::ComputeIR& ir) {
  // Series grouped by abscissa in result-declaration order.
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  std::map<std::string, bool> seen_abscissa;
  for (const auto& decl : ir.results) {
    auto it = r.series.find(decl.symbol);
    if (it == r.series.end()) continue;
    const Series& s = it->second;
    if (decl.role == ir::Role::curve) {
      cols.emplace_back(decl.symbol + "_x", s.x);
      cols.emplace_back(decl.symbol + "_y", s.y);
      continue;
    }
    if (!seen_abscissa[s.abscissa]) {
      seen_abscissa[s.abscissa] = true;
      cols.emplace_back(s.abscissa, s.x);
    }
    cols.emplace_back(decl.symbol, s.y);
  }
  std::ostringstream out;
  std::size_t rows = 0;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out << (c ? "," : "") << cols[c].first;
    rows = std::max(rows, cols[c].second.size());
  }
  out << "\n";
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out << ",";
      if (i < cols[c].second.size() && std::isfinite(cols[c].second[i])) out << format_real(cols[c].second[i]);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace simml::rt
