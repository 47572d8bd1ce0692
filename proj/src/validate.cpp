#include <algorithm>
#include <map>
#include <set>

#include "simml/document.hpp"

namespace simml {

namespace {

enum class LabelKind {
  scalar, matrix, point, coordinate, database, member, domain1d, domain2d, axis,
  ode, state, output, nonlinear, unknown, implicit, curve, surface, pde, polyline,
};

struct LabelInfo {
  LabelKind kind;
  SourcePos pos;
};

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto start = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!start(s[0])) return false;
  return std::all_of(s.begin() + 1, s.end(), [&](char c) { return start(c) || (c >= '0' && c <= '9'); });
}

class Validator {
 public:
  explicit Validator(const SimulationDoc& doc) : doc_(doc) {}

  ValidationReport run() {
    collect_labels();
    parameters();
    compute();
    graphs();
    display();
    localized_texts();
    return std::move(report_);
  }

 private:
  void error(SourcePos pos, std::string code, std::string message) {
    report_.errors.push_back({Severity::error, std::move(code), std::move(message), pos});
  }
  void warning(SourcePos pos, std::string code, std::string message) {
    report_.warnings.push_back({Severity::warning, std::move(code), std::move(message), pos});
  }

  void define(const std::string& label, LabelKind kind, SourcePos pos) {
    if (label.empty()) return;  // missing attribute already reported by the parser
    if (!is_identifier(label)) {
      error(pos, "bad-label", "label '" + label + "' is not a valid identifier");
      return;
    }
    if (expr::is_reserved(label)) {
      error(pos, "reserved-symbol", "label '" + label + "' is a reserved constant");
      return;
    }
    if (!labels_.emplace(label, LabelInfo{kind, pos}).second) {
      error(pos, "duplicate-label", "label '" + label + "' is already defined at " + labels_.at(label).pos.str());
    }
  }

  void collect_labels() {
    for (const auto& section : doc_.parameters) {
      for (const auto& item : section.items) {
        if (const auto* s = std::get_if<ScalarParam>(&item)) {
          define(s->label, LabelKind::scalar, s->pos);
          globals_.insert(s->label);
        } else if (const auto* m = std::get_if<MatrixParam>(&item)) {
          define(m->label, LabelKind::matrix, m->pos);
          globals_.insert(m->label);
        } else if (const auto* p = std::get_if<PointParam>(&item)) {
          define(p->label, LabelKind::point, p->pos);
          define(p->x1.label, LabelKind::coordinate, p->x1.pos);
          define(p->x2.label, LabelKind::coordinate, p->x2.pos);
          globals_.insert(p->x1.label);
          globals_.insert(p->x2.label);
        } else if (const auto* d = std::get_if<ParamDatabase>(&item)) {
          define(d->label, LabelKind::database, d->pos);
          if (!d->instances.empty()) {
            for (const auto& [label, value] : d->instances.front().values) {
              define(label, LabelKind::member, d->instances.front().pos);
              globals_.insert(label);
            }
          }
        }
      }
    }
    parameter_symbols_ = globals_;
    for (const auto& item : doc_.compute) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Domain1D>) {
              define(v.interval.label, LabelKind::domain1d, v.interval.pos);
            } else if constexpr (std::is_same_v<T, Domain2D>) {
              define(v.label, LabelKind::domain2d, v.pos);
              define(v.x.label, LabelKind::axis, v.x.pos);
              define(v.y.label, LabelKind::axis, v.y.pos);
            } else if constexpr (std::is_same_v<T, OdeDef>) {
              define(v.label, LabelKind::ode, v.pos);
              for (const auto& s : v.states) define(s.label, LabelKind::state, s.pos);
              for (const auto& o : v.outputs) define(o.label, LabelKind::output, o.pos);
            } else if constexpr (std::is_same_v<T, NonlinearSystemDef>) {
              define(v.label, LabelKind::nonlinear, v.pos);
              for (const auto& u : v.unknowns) {
                define(u.label, LabelKind::unknown, u.pos);
                globals_.insert(u.label);
              }
            } else if constexpr (std::is_same_v<T, ImplicitCurveDef>) {
              define(v.label, LabelKind::implicit, v.pos);
            } else if constexpr (std::is_same_v<T, CurveDef>) {
              define(v.label, LabelKind::curve, v.pos);
            } else if constexpr (std::is_same_v<T, SurfaceDef>) {
              define(v.label, LabelKind::surface, v.pos);
            } else if constexpr (std::is_same_v<T, PdeDef>) {
              define(v.label, LabelKind::pde, v.pos);
            }
          },
          item);
    }
    for (const auto& p : doc_.graphs) define(p.label, LabelKind::polyline, p.pos);
  }

  // Reports a dangling or wrongly-typed reference; returns true when it resolves.
  bool resolve(const std::string& ref, SourcePos pos, std::initializer_list<LabelKind> kinds, const char* expected) {
    auto it = labels_.find(ref);
    if (it == labels_.end()) {
      error(pos, "unresolved-reference", "reference '" + ref + "' does not match any label");
      return false;
    }
    if (std::find(kinds.begin(), kinds.end(), it->second.kind) == kinds.end()) {
      error(pos, "reference-kind", "reference '" + ref + "' must name " + std::string(expected));
      return false;
    }
    return true;
  }

  // Checks parse status and that every free symbol is in scope.
  void expression(const ExprText& e, const std::set<std::string>& locals, const std::string& where) {
    if (e.source.empty() && !e.parsed && e.error.empty()) return;  // missing; reported by the parser
    if (!e.parsed) {
      const char* code = "expression-syntax";
      if (e.error_kind == expr::ParseErrorKind::arity) code = "arity";
      else if (e.error_kind == expr::ParseErrorKind::unknown_function) code = "unknown-function";
      error(e.pos, code, where + ": " + e.error);
      return;
    }
    for (const auto& s : expr::free_symbols(*e.parsed)) {
      if (!globals_.count(s) && !locals.count(s)) {
        error(e.pos, "unbound-symbol", where + ": symbol '" + s + "' is not defined here");
      }
    }
  }

  void parameters() {
    for (const auto& section : doc_.parameters) {
      for (const auto& item : section.items) {
        if (const auto* s = std::get_if<ScalarParam>(&item)) {
          if (s->min && s->max && !(*s->min < *s->max)) {
            error(s->pos, "bounds", "parameter '" + s->label + "': min must be less than max");
          } else if ((s->min && s->default_value < *s->min) || (s->max && s->default_value > *s->max)) {
            error(s->pos, "bounds", "parameter '" + s->label + "': default value lies outside [min, max]");
          }
          if (s->increment && !(*s->increment > 0)) {
            error(s->pos, "increment", "parameter '" + s->label + "': increment must be positive");
          }
        } else if (const auto* m = std::get_if<MatrixParam>(&item)) {
          if (m->default_value.rows < 1 || m->default_value.cols < 1) {
            error(m->pos, "matrix-shape", "matrix '" + m->label + "' must have at least one row and column");
          }
        } else if (const auto* p = std::get_if<PointParam>(&item)) {
          if (!p->x1.label.empty() && p->x1.label == p->x2.label) {
            // Already a duplicate label; the dedicated code names the real mistake.
            report_.errors.erase(std::remove_if(report_.errors.begin(), report_.errors.end(),
                                                [&](const Diagnostic& d) {
                                                  return d.code == "duplicate-label" &&
                                                         d.message.find("'" + p->x2.label + "'") != std::string::npos &&
                                                         d.pos.line == p->x2.pos.line &&
                                                         d.pos.column == p->x2.pos.column;
                                                }),
                                 report_.errors.end());
            error(p->pos, "point-labels", "point '" + p->label + "': x1 and x2 need distinct labels");
          }
          if (p->constraint) resolve(*p->constraint, p->constraint_pos, {LabelKind::polyline}, "a polyline");
        } else if (const auto* d = std::get_if<ParamDatabase>(&item)) {
          if (d->instances.empty()) {
            error(d->pos, "database-members", "database '" + d->label + "' needs at least one instance");
            continue;
          }
          auto members = d->member_labels();
          std::set<std::string> expected(members.begin(), members.end());
          if (expected.size() != members.size()) {
            error(d->instances.front().pos, "database-members", "database '" + d->label + "': member set twice");
          }
          for (std::size_t k = 1; k < d->instances.size(); ++k) {
            std::set<std::string> got;
            for (const auto& [label, value] : d->instances[k].values) got.insert(label);
            if (got != expected || d->instances[k].values.size() != members.size()) {
              error(d->instances[k].pos, "database-members",
                    "database '" + d->label + "': instance '" + d->instances[k].name +
                        "' must define exactly the members of the first instance");
            }
          }
        }
      }
    }
  }

  void interval(const Interval& iv, const std::string& owner) {
    if (iv.n_points < 2) error(iv.pos, "n-points", owner + ": at least 2 discretization points are required");
    expression(iv.lower, {}, owner + " lower bound");
    expression(iv.upper, {}, owner + " upper bound");
  }

  const Domain1D* domain1d(const Reference& r) {
    if (!resolve(r.ref, r.pos, {LabelKind::domain1d}, "a 1-D domain")) return nullptr;
    for (const auto& item : doc_.compute) {
      if (const auto* d = std::get_if<Domain1D>(&item); d && d->interval.label == r.ref) return d;
    }
    return nullptr;
  }

  const Domain2D* domain2d(const Reference& r) {
    if (!resolve(r.ref, r.pos, {LabelKind::domain2d}, "a 2-D domain")) return nullptr;
    for (const auto& item : doc_.compute) {
      if (const auto* d = std::get_if<Domain2D>(&item); d && d->label == r.ref) return d;
    }
    return nullptr;
  }

  std::set<std::string> axes_of(const Domain2D* d) {
    if (!d) return {};
    return {d->x.label, d->y.label};
  }

  void compute() {
    for (const auto& item : doc_.compute) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Domain1D>) {
              interval(v.interval, "domain '" + v.interval.label + "'");
            } else if constexpr (std::is_same_v<T, Domain2D>) {
              interval(v.x, "domain '" + v.label + "'");
              interval(v.y, "domain '" + v.label + "'");
            } else if constexpr (std::is_same_v<T, OdeDef>) {
              const Domain1D* d = domain1d(v.domain);
              std::set<std::string> locals;
              if (d) locals.insert(d->interval.label);
              for (const auto& s : v.states) locals.insert(s.label);
              for (const auto& s : v.states) {
                expression(s.derivative, locals, "derivative of '" + s.label + "'");
                expression(s.initial, {}, "initial condition of '" + s.label + "'");
              }
              for (const auto& o : v.outputs) expression(o.value, locals, "output '" + o.label + "'");
            } else if constexpr (std::is_same_v<T, NonlinearSystemDef>) {
              if (v.residuals.size() != v.unknowns.size()) {
                error(v.pos, "residual-count",
                      "system '" + v.label + "' has " + std::to_string(v.residuals.size()) + " equations for " +
                          std::to_string(v.unknowns.size()) + " unknowns");
              }
              std::set<std::string> own;
              for (const auto& u : v.unknowns) own.insert(u.label);
              for (const auto& u : v.unknowns) {
                // Guesses are evaluated before the system's own unknowns exist.
                std::set<std::string> saved = globals_;
                for (const auto& o : own) globals_.erase(o);
                expression(u.initial_guess, {}, "initial guess of '" + u.label + "'");
                globals_ = std::move(saved);
              }
              for (std::size_t k = 0; k < v.residuals.size(); ++k) {
                expression(v.residuals[k], own, "equation " + std::to_string(k + 1) + " of '" + v.label + "'");
              }
            } else if constexpr (std::is_same_v<T, ImplicitCurveDef>) {
              expression(v.f, axes_of(domain2d(v.domain)), "implicit curve '" + v.label + "'");
            } else if constexpr (std::is_same_v<T, CurveDef>) {
              const Domain1D* d = domain1d(v.domain);
              std::size_t want = v.kind == GeometryKind::parametric ? 2 : 1;
              if (v.exprs.size() != want) {
                error(v.pos, "expr-count", "curve '" + v.label + "' needs " + std::to_string(want) + " expression(s)");
              }
              std::set<std::string> locals;
              if (d) locals.insert(d->interval.label);
              for (const auto& e : v.exprs) expression(e, locals, "curve '" + v.label + "'");
            } else if constexpr (std::is_same_v<T, SurfaceDef>) {
              auto locals = axes_of(domain2d(v.domain));
              std::size_t want = v.kind == GeometryKind::parametric ? 3 : 1;
              if (v.exprs.size() != want) {
                error(v.pos, "expr-count", "surface '" + v.label + "' needs " + std::to_string(want) + " expression(s)");
              }
              for (const auto& e : v.exprs) expression(e, locals, "surface '" + v.label + "'");
            } else if constexpr (std::is_same_v<T, PdeDef>) {
              pde(v);
            }
          },
          item);
    }
  }

  void pde(const PdeDef& p) {
    auto locals = axes_of(domain2d(p.domain));
    const std::string where = "pde '" + p.label + "'";
    for (const auto& d : p.diffusion) expression(d, locals, where + " diffusion");
    expression(p.c, locals, where + " coefficient c");
    expression(p.f, locals, where + " source f");
    if (p.diffusion.size() == 4 && p.diffusion[1].parsed && p.diffusion[2].parsed &&
        !(*p.diffusion[1].parsed == *p.diffusion[2].parsed)) {
      error(p.diffusion[2].pos, "pde-asymmetric", where + ": diffusion matrix must be symmetric (p12 == p21)");
    }
    std::map<Edge, int> seen;
    for (const auto& b : p.boundary) {
      if (++seen[b.edge] == 2) {
        error(b.pos, "boundary-duplicate", where + ": edge '" + std::string(to_string(b.edge)) + "' has two conditions");
      }
      expression(b.value, locals, where + " boundary '" + std::string(to_string(b.edge)) + "'");
    }
    for (Edge e : {Edge::left, Edge::right, Edge::bottom, Edge::top}) {
      if (!seen.count(e)) {
        error(p.pos, "boundary-missing", where + ": edge '" + std::string(to_string(e)) + "' has no boundary condition");
      }
    }
  }

  void graphs() {
    for (const auto& p : doc_.graphs) {
      if (p.vertices.size() < 2) error(p.pos, "polyline-vertices", "polyline '" + p.label + "' needs at least 2 vertices");
      // Constraint curves are evaluated before any compute task runs.
      std::set<std::string> saved = globals_;
      globals_ = parameter_symbols_;
      for (const auto& v : p.vertices) {
        expression(v.x1, {}, "polyline '" + p.label + "' vertex");
        expression(v.x2, {}, "polyline '" + p.label + "' vertex");
      }
      globals_ = std::move(saved);
    }
  }

  void display() {
    if (doc_.has_display && doc_.display.empty()) {
      error(doc_.pos, "display-empty", "<display> must contain at least one <window>");
    }
    for (const auto& w : doc_.display) {
      if (w.rows < 0 || w.cols < 0) error(w.pos, "layout", "window rows/cols must be positive");
      if (w.rows > 0 && w.cols > 0 && static_cast<std::size_t>(w.rows * w.cols) < w.axes.size()) {
        error(w.pos, "layout", "window layout has fewer cells than axes");
      }
      for (const auto& a : w.axes) {
        for (const auto& d : a.items) {
          switch (d.kind) {
            case DrawKind::curve2d:
              resolve(d.ref, d.pos, {LabelKind::state, LabelKind::output, LabelKind::curve, LabelKind::implicit},
                      "a state, output, curve or implicit curve");
              break;
            case DrawKind::surface:
              resolve(d.ref, d.pos, {LabelKind::surface, LabelKind::pde}, "a surface or PDE solution");
              break;
            case DrawKind::points:
              resolve(d.ref, d.pos, {LabelKind::point, LabelKind::matrix}, "a point or matrix parameter");
              break;
          }
          if (d.kind == DrawKind::points) {
            for (const auto& s : doc_.parameters) {
              for (const auto& item : s.items) {
                if (const auto* m = std::get_if<MatrixParam>(&item); m && m->label == d.ref && m->default_value.cols != 2) {
                  error(d.pos, "matrix-shape", "matrix '" + m->label + "' drawn as points must have 2 columns");
                }
              }
            }
          }
        }
      }
    }
  }

  void localized(const LocalizedText& t, const std::string& what) {
    if (!t.empty() && !t.variants.count("")) {
      error(t.pos, "missing-default-language", what + " has no default-language variant (without lang)");
    }
  }

  void localized_texts() {
    localized(doc_.header.title, "header title");
    for (const auto& s : doc_.parameters) {
      localized(s.title, "section title");
      for (const auto& item : s.items) {
        std::visit([&](const auto& p) { localized(p.name, "name of '" + p.label + "'"); }, item);
      }
    }
    for (const auto& item : doc_.compute) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Domain1D>) {
              localized(v.interval.name, "name of '" + v.interval.label + "'");
            } else if constexpr (std::is_same_v<T, Domain2D>) {
              localized(v.name, "name of '" + v.label + "'");
              localized(v.x.name, "name of '" + v.x.label + "'");
              localized(v.y.name, "name of '" + v.y.label + "'");
            } else if constexpr (std::is_same_v<T, OdeDef>) {
              for (const auto& s : v.states) localized(s.name, "name of '" + s.label + "'");
              for (const auto& o : v.outputs) localized(o.name, "name of '" + o.label + "'");
            } else if constexpr (std::is_same_v<T, NonlinearSystemDef>) {
              localized(v.name, "name of '" + v.label + "'");
              for (const auto& u : v.unknowns) localized(u.name, "name of '" + u.label + "'");
            } else {
              localized(v.name, "name of '" + v.label + "'");
            }
          },
          item);
    }
    for (const auto& w : doc_.display) localized(w.title, "window title");
    bool default_notes = doc_.notes.empty();
    for (const auto& n : doc_.notes) default_notes = default_notes || n.lang.empty();
    if (!default_notes) warning(doc_.notes.front().pos, "missing-default-language", "no default-language <notes>");
  }

  const SimulationDoc& doc_;
  ValidationReport report_;
  std::map<std::string, LabelInfo> labels_;
  std::set<std::string> globals_;
  std::set<std::string> parameter_symbols_;
};

}  // namespace

bool ValidationReport::operator==(const ValidationReport& o) const {
  auto same = [](const Diagnostics& a, const Diagnostics& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].code != b[k].code || a[k].message != b[k].message || a[k].pos.line != b[k].pos.line ||
          a[k].pos.column != b[k].pos.column || a[k].severity != b[k].severity) {
        return false;
      }
    }
    return true;
  };
  return same(errors, o.errors) && same(warnings, o.warnings);
}

ValidationReport validate(const SimulationDoc& doc) { return Validator(doc).run(); }

}  // namespace simml
