#include "simml/document.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "simml/xml.hpp"

namespace simml {

namespace {

const std::string kEmpty;

bool only_space(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\n' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\n' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Converts the generic XML tree into the typed AST, collecting every problem.
class Builder {
 public:
  explicit Builder(const ParseOptions& opts) : opts_(opts) {}

  Diagnostics errors;
  Diagnostics warnings;

  SimulationDoc simulation(const xml::Element& root) {
    SimulationDoc doc;
    doc.pos = root.pos;
    if (root.name != "simulation") {
      error(root.pos, "unknown-element", "root element must be <simulation>, found <" + root.name + ">");
      return doc;
    }
    check(root, {}, {"header", "notes", "parameters", "compute", "graphs", "display"});
    for (const auto& c : root.children) {
      if (c.name == "header") doc.header = header(c);
      else if (c.name == "notes") doc.notes.push_back(notes(c));
      else if (c.name == "parameters") parameters(c, doc);
      else if (c.name == "compute") compute(c, doc);
      else if (c.name == "graphs") graphs(c, doc);
      else if (c.name == "display") {
        doc.has_display = true;
        display(c, doc);
      }
    }
    return doc;
  }

 private:
  void error(SourcePos pos, std::string code, std::string message) {
    errors.push_back({Severity::error, std::move(code), std::move(message), pos});
  }

  void unknown(SourcePos pos, std::string code, std::string message) {
    if (opts_.lax) {
      warnings.push_back({Severity::warning, std::move(code), std::move(message), pos});
    } else {
      error(pos, std::move(code), std::move(message));
    }
  }

  // Rejects attributes and child elements outside the allowed sets.
  void check(const xml::Element& e, std::initializer_list<std::string_view> attrs,
             std::initializer_list<std::string_view> children, bool text_allowed = false) {
    for (const auto& a : e.attributes) {
      if (std::find(attrs.begin(), attrs.end(), a.name) == attrs.end()) {
        unknown(a.pos, "unknown-attribute", "unknown attribute '" + a.name + "' on <" + e.name + ">");
      }
    }
    for (const auto& c : e.children) {
      if (std::find(children.begin(), children.end(), c.name) == children.end()) {
        unknown(c.pos, "unknown-element", "unknown element <" + c.name + "> inside <" + e.name + ">");
      }
    }
    if (!text_allowed && !only_space(e.text)) {
      unknown(e.text_pos, "unexpected-text", "unexpected text inside <" + e.name + ">");
    }
  }

  void leaf_check(const xml::Element& e, std::initializer_list<std::string_view> attrs = {}) {
    check(e, attrs, {}, true);
  }

  std::string attr(const xml::Element& e, std::string_view key) {
    const auto* a = e.attribute(key);
    return a ? a->value : std::string();
  }

  std::string required_attr(const xml::Element& e, std::string_view key) {
    const auto* a = e.attribute(key);
    if (!a) {
      error(e.pos, "missing-attribute", "<" + e.name + "> requires attribute '" + std::string(key) + "'");
      return {};
    }
    return a->value;
  }

  std::optional<double> number_attr(const xml::Element& e, std::string_view key) {
    const auto* a = e.attribute(key);
    if (!a) return std::nullopt;
    auto v = parse_real(a->value);
    if (!v) error(a->pos, "bad-number", "attribute '" + std::string(key) + "' is not a number: '" + a->value + "'");
    return v;
  }

  std::optional<int> int_attr(const xml::Element& e, std::string_view key) {
    const auto* a = e.attribute(key);
    if (!a) return std::nullopt;
    std::string t = trim(a->value);
    int v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) {
      error(a->pos, "bad-number", "attribute '" + std::string(key) + "' is not an integer: '" + a->value + "'");
      return std::nullopt;
    }
    return v;
  }

  std::vector<const xml::Element*> all(const xml::Element& e, std::string_view name) {
    std::vector<const xml::Element*> out;
    for (const auto& c : e.children) {
      if (c.name == name) out.push_back(&c);
    }
    return out;
  }

  const xml::Element* one(const xml::Element& e, std::string_view name, bool required) {
    const xml::Element* found = nullptr;
    for (const auto& c : e.children) {
      if (c.name != name) continue;
      if (found) {
        error(c.pos, "duplicate-element", "<" + std::string(name) + "> may appear only once inside <" + e.name + ">");
      } else {
        found = &c;
      }
    }
    if (!found && required) {
      error(e.pos, "missing-child", "<" + e.name + "> requires a <" + std::string(name) + "> child");
    }
    return found;
  }

  std::string text_of(const xml::Element& e) { return trim(e.text); }

  LocalizedText localized(const xml::Element& parent, std::string_view name) {
    LocalizedText t;
    for (const auto* c : all(parent, name)) {
      leaf_check(*c, {"lang"});
      std::string lang = attr(*c, "lang");
      if (t.variants.empty()) t.pos = c->pos;
      if (!t.variants.emplace(lang, text_of(*c)).second) {
        error(c->pos, "duplicate-language",
              "<" + std::string(name) + "> repeated for language '" + (lang.empty() ? "default" : lang) + "'");
      }
    }
    return t;
  }

  ExprText expression(const xml::Element& parent, std::string_view name, bool required = true) {
    const auto* c = one(parent, name, required);
    if (!c) return {};
    leaf_check(*c);
    if (only_space(c->text)) {
      error(c->pos, "missing-expression", "<" + std::string(name) + "> must contain an expression");
      return {};
    }
    return ExprText::make(text_of(*c), c->text_pos);
  }

  double value_child(const xml::Element& parent) {
    const auto* v = one(parent, "value", true);
    if (!v) return 0.0;
    leaf_check(*v);
    auto d = parse_real(text_of(*v));
    if (!d) {
      error(v->pos, "bad-number", "<value> is not a number: '" + text_of(*v) + "'");
      return 0.0;
    }
    return *d;
  }

  Visibility visibility(const xml::Element& e) {
    const auto* a = e.attribute("visibility");
    if (!a || a->value == "editable") return Visibility::editable;
    if (a->value == "readonly") return Visibility::readonly;
    if (a->value == "hidden") return Visibility::hidden;
    error(a->pos, "bad-attribute", "visibility must be editable, readonly or hidden");
    return Visibility::editable;
  }

  Reference reference(const xml::Element& parent, std::string_view name) {
    const auto* c = one(parent, name, true);
    if (!c) return {};
    check(*c, {"ref"}, {});
    return {required_attr(*c, "ref"), c->pos};
  }

  Header header(const xml::Element& e) {
    check(e, {}, {"title", "author", "date", "keywords"});
    Header h;
    h.pos = e.pos;
    h.title = localized(e, "title");
    if (const auto* a = one(e, "author", false)) {
      leaf_check(*a);
      h.author = text_of(*a);
    }
    if (const auto* d = one(e, "date", false)) {
      leaf_check(*d);
      h.date = text_of(*d);
    }
    if (const auto* k = one(e, "keywords", false)) {
      check(*k, {}, {"keyword"});
      for (const auto* kw : all(*k, "keyword")) {
        leaf_check(*kw);
        h.keywords.push_back(text_of(*kw));
      }
    }
    return h;
  }

  LocalizedBlock notes(const xml::Element& e) {
    LocalizedBlock b;
    b.pos = e.pos;
    b.lang = attr(e, "lang");
    check(e, {"lang"}, {"p"}, e.children.empty());
    if (e.children.empty()) {
      if (!only_space(e.text)) b.paragraphs.push_back(text_of(e));
    } else {
      for (const auto* p : all(e, "p")) {
        leaf_check(*p);
        b.paragraphs.push_back(text_of(*p));
      }
    }
    return b;
  }

  void parameters(const xml::Element& e, SimulationDoc& doc) {
    check(e, {}, {"section"});
    for (const auto* s : all(e, "section")) {
      check(*s, {}, {"title", "scalar", "matrix", "point", "database"});
      ParameterSection section;
      section.pos = s->pos;
      section.title = localized(*s, "title");
      for (const auto& c : s->children) {
        if (c.name == "scalar") section.items.emplace_back(scalar(c));
        else if (c.name == "matrix") section.items.emplace_back(matrix(c));
        else if (c.name == "point") section.items.emplace_back(point(c));
        else if (c.name == "database") section.items.emplace_back(database(c));
      }
      doc.parameters.push_back(std::move(section));
    }
  }

  ScalarParam scalar(const xml::Element& e) {
    check(e, {"label", "unit", "min", "max", "increment", "visibility"}, {"name", "value"});
    ScalarParam p;
    p.pos = e.pos;
    p.label = required_attr(e, "label");
    p.unit = attr(e, "unit");
    p.min = number_attr(e, "min");
    p.max = number_attr(e, "max");
    p.increment = number_attr(e, "increment");
    p.visibility = visibility(e);
    p.name = localized(e, "name");
    p.default_value = value_child(e);
    return p;
  }

  MatrixParam matrix(const xml::Element& e) {
    check(e, {"label", "unit", "visibility"}, {"name", "value"});
    MatrixParam p;
    p.pos = e.pos;
    p.label = required_attr(e, "label");
    p.unit = attr(e, "unit");
    p.visibility = visibility(e);
    p.name = localized(e, "name");
    if (const auto* v = one(e, "value", true)) {
      leaf_check(*v);
      try {
        p.default_value = parse_matrix(v->text);
      } catch (const Error& ex) {
        error(v->pos, "bad-matrix", ex.what());
      }
    }
    return p;
  }

  PointCoordinate coordinate(const xml::Element& parent, std::string_view name) {
    PointCoordinate c;
    const auto* x = one(parent, name, true);
    if (!x) return c;
    check(*x, {"label"}, {"value"});
    c.pos = x->pos;
    c.label = required_attr(*x, "label");
    c.value = value_child(*x);
    return c;
  }

  PointParam point(const xml::Element& e) {
    check(e, {"label", "visibility"}, {"name", "x1", "x2", "constraints"});
    PointParam p;
    p.pos = e.pos;
    p.label = required_attr(e, "label");
    p.visibility = visibility(e);
    p.name = localized(e, "name");
    p.x1 = coordinate(e, "x1");
    p.x2 = coordinate(e, "x2");
    if (const auto* c = one(e, "constraints", false)) {
      check(*c, {}, {"curve"});
      if (const auto* curve = one(*c, "curve", true)) {
        check(*curve, {"ref"}, {});
        p.constraint = required_attr(*curve, "ref");
        p.constraint_pos = curve->pos;
      }
    }
    return p;
  }

  ParamDatabase database(const xml::Element& e) {
    check(e, {"label", "visibility"}, {"name", "instance"});
    ParamDatabase d;
    d.pos = e.pos;
    d.label = required_attr(e, "label");
    d.visibility = visibility(e);
    d.name = localized(e, "name");
    for (const auto* i : all(e, "instance")) {
      check(*i, {"name"}, {"set"});
      DatabaseInstance inst;
      inst.pos = i->pos;
      inst.name = required_attr(*i, "name");
      for (const auto* s : all(*i, "set")) {
        check(*s, {"label", "value"}, {});
        std::string label = required_attr(*s, "label");
        auto v = number_attr(*s, "value");
        if (!s->attribute("value")) required_attr(*s, "value");
        inst.values.emplace_back(label, v.value_or(0.0));
      }
      d.instances.push_back(std::move(inst));
    }
    return d;
  }

  Interval interval(const xml::Element& e, const char* label_attr_name) {
    Interval iv;
    iv.pos = e.pos;
    iv.label = required_attr(e, label_attr_name);
    iv.unit = attr(e, "unit");
    iv.name = localized(e, "name");
    if (auto n = int_attr(e, "points")) iv.n_points = *n;
    if (const auto* s = e.attribute("scale")) {
      if (s->value == "linear") iv.spacing = Spacing::linear;
      else if (s->value == "log") iv.spacing = Spacing::log;
      else error(s->pos, "bad-attribute", "scale must be linear or log");
    }
    if (const auto* b = one(e, "interval", true)) {
      check(*b, {}, {"initialvalue", "finalvalue"});
      iv.lower = expression(*b, "initialvalue");
      iv.upper = expression(*b, "finalvalue");
    }
    return iv;
  }

  void compute(const xml::Element& e, SimulationDoc& doc) {
    check(e, {}, {"defdomain1d", "defdomain2d", "ode", "nonlinear", "implicitcurve", "curve2d", "surface", "pde"});
    for (const auto& c : e.children) {
      if (c.name == "defdomain1d") {
        check(c, {"label", "unit", "points", "scale"}, {"name", "interval"});
        doc.compute.emplace_back(Domain1D{interval(c, "label")});
      } else if (c.name == "defdomain2d") {
        check(c, {"label"}, {"name", "x1", "x2"});
        Domain2D d;
        d.pos = c.pos;
        d.label = required_attr(c, "label");
        d.name = localized(c, "name");
        for (const char* axis : {"x1", "x2"}) {
          if (const auto* a = one(c, axis, true)) {
            check(*a, {"label", "unit", "points", "scale"}, {"name", "interval"});
            (axis[1] == '1' ? d.x : d.y) = interval(*a, "label");
          }
        }
        doc.compute.emplace_back(std::move(d));
      } else if (c.name == "ode") {
        doc.compute.emplace_back(ode(c));
      } else if (c.name == "nonlinear") {
        doc.compute.emplace_back(nonlinear(c));
      } else if (c.name == "implicitcurve") {
        check(c, {"label", "unit"}, {"name", "refdomain2d", "equation"});
        ImplicitCurveDef d;
        d.pos = c.pos;
        d.label = required_attr(c, "label");
        d.unit = attr(c, "unit");
        d.name = localized(c, "name");
        d.domain = reference(c, "refdomain2d");
        d.f = expression(c, "equation");
        doc.compute.emplace_back(std::move(d));
      } else if (c.name == "curve2d") {
        doc.compute.emplace_back(curve(c));
      } else if (c.name == "surface") {
        doc.compute.emplace_back(surface(c));
      } else if (c.name == "pde") {
        doc.compute.emplace_back(pde(c));
      }
    }
  }

  OdeDef ode(const xml::Element& e) {
    check(e, {"label"}, {"refdomain1d", "states", "outputs"});
    OdeDef o;
    o.pos = e.pos;
    o.label = required_attr(e, "label");
    o.domain = reference(e, "refdomain1d");
    if (const auto* states = one(e, "states", true)) {
      check(*states, {}, {"state"});
      for (const auto* s : all(*states, "state")) {
        check(*s, {"label", "unit"}, {"name", "derivative", "initialcond"});
        OdeState st;
        st.pos = s->pos;
        st.label = required_attr(*s, "label");
        st.unit = attr(*s, "unit");
        st.name = localized(*s, "name");
        st.derivative = expression(*s, "derivative");
        st.initial = expression(*s, "initialcond");
        o.states.push_back(std::move(st));
      }
      if (o.states.empty()) error(states->pos, "missing-child", "<states> requires at least one <state>");
    }
    if (const auto* outputs = one(e, "outputs", false)) {
      check(*outputs, {}, {"output"});
      for (const auto* s : all(*outputs, "output")) {
        check(*s, {"label", "unit"}, {"name", "value"});
        OdeOutput out;
        out.pos = s->pos;
        out.label = required_attr(*s, "label");
        out.unit = attr(*s, "unit");
        out.name = localized(*s, "name");
        out.value = expression(*s, "value");
        o.outputs.push_back(std::move(out));
      }
    }
    return o;
  }

  NonlinearSystemDef nonlinear(const xml::Element& e) {
    check(e, {"label"}, {"name", "unknowns", "equations"});
    NonlinearSystemDef n;
    n.pos = e.pos;
    n.label = required_attr(e, "label");
    n.name = localized(e, "name");
    if (const auto* us = one(e, "unknowns", true)) {
      check(*us, {}, {"unknown"});
      for (const auto* u : all(*us, "unknown")) {
        check(*u, {"label", "unit"}, {"name", "initialguess"});
        Unknown x;
        x.pos = u->pos;
        x.label = required_attr(*u, "label");
        x.unit = attr(*u, "unit");
        x.name = localized(*u, "name");
        x.initial_guess = expression(*u, "initialguess");
        n.unknowns.push_back(std::move(x));
      }
    }
    if (const auto* eqs = one(e, "equations", true)) {
      check(*eqs, {}, {"equation"});
      for (const auto* q : all(*eqs, "equation")) {
        leaf_check(*q);
        n.residuals.push_back(ExprText::make(text_of(*q), q->text_pos));
      }
    }
    return n;
  }

  GeometryKind geometry_kind(const xml::Element& e) {
    const auto* a = e.attribute("type");
    if (!a || a->value == "nonparametric") return GeometryKind::nonparametric;
    if (a->value == "parametric") return GeometryKind::parametric;
    error(a->pos, "bad-attribute", "type must be parametric or nonparametric");
    return GeometryKind::nonparametric;
  }

  // Nonparametric geometry takes only the last coordinate element.
  void geometry_exprs(const xml::Element& e, GeometryKind kind, std::initializer_list<const char*> names,
                      std::vector<ExprText>& out) {
    const char* last = *(names.end() - 1);
    for (const char* n : names) {
      const bool is_last = std::string_view(n) == last;
      if (kind == GeometryKind::nonparametric && !is_last) {
        if (const auto* c = one(e, n, false)) {
          error(c->pos, "unexpected-element",
                "<" + std::string(n) + "> is only allowed in parametric <" + e.name + ">");
        }
        continue;
      }
      if (one(e, n, false)) out.push_back(expression(e, n));
    }
  }

  CurveDef curve(const xml::Element& e) {
    check(e, {"label", "unit", "type"}, {"name", "refdomain1d", "x", "y"});
    CurveDef c;
    c.pos = e.pos;
    c.label = required_attr(e, "label");
    c.unit = attr(e, "unit");
    c.kind = geometry_kind(e);
    c.name = localized(e, "name");
    c.domain = reference(e, "refdomain1d");
    geometry_exprs(e, c.kind, {"x", "y"}, c.exprs);
    return c;
  }

  SurfaceDef surface(const xml::Element& e) {
    check(e, {"label", "unit", "type"}, {"name", "refdomain2d", "x", "y", "z"});
    SurfaceDef s;
    s.pos = e.pos;
    s.label = required_attr(e, "label");
    s.unit = attr(e, "unit");
    s.kind = geometry_kind(e);
    s.name = localized(e, "name");
    s.domain = reference(e, "refdomain2d");
    geometry_exprs(e, s.kind, {"x", "y", "z"}, s.exprs);
    return s;
  }

  PdeDef pde(const xml::Element& e) {
    check(e, {"label", "unit"}, {"name", "refdomain2d", "diffusion", "c", "f", "boundary"});
    PdeDef p;
    p.pos = e.pos;
    p.label = required_attr(e, "label");
    p.unit = attr(e, "unit");
    p.name = localized(e, "name");
    p.domain = reference(e, "refdomain2d");
    if (const auto* d = one(e, "diffusion", true)) {
      check(*d, {}, {"p11", "p12", "p21", "p22"});
      for (const char* n : {"p11", "p12", "p21", "p22"}) p.diffusion.push_back(expression(*d, n));
    }
    p.c = expression(e, "c");
    p.f = expression(e, "f");
    if (const auto* b = one(e, "boundary", true)) {
      check(*b, {}, {"dirichlet", "neumann"});
      for (const auto& c : b->children) {
        if (c.name != "dirichlet" && c.name != "neumann") continue;
        leaf_check(c, {"edge"});
        BoundaryCondition bc;
        bc.pos = c.pos;
        bc.kind = c.name == "dirichlet" ? BoundaryKind::dirichlet : BoundaryKind::neumann;
        std::string edge = required_attr(c, "edge");
        if (edge == "left") bc.edge = Edge::left;
        else if (edge == "right") bc.edge = Edge::right;
        else if (edge == "bottom") bc.edge = Edge::bottom;
        else if (edge == "top") bc.edge = Edge::top;
        else if (!edge.empty()) error(c.pos, "bad-attribute", "edge must be left, right, bottom or top");
        if (only_space(c.text)) {
          error(c.pos, "missing-expression", "<" + c.name + "> must contain an expression");
        } else {
          bc.value = ExprText::make(text_of(c), c.text_pos);
        }
        p.boundary.push_back(std::move(bc));
      }
    }
    return p;
  }

  void graphs(const xml::Element& e, SimulationDoc& doc) {
    check(e, {}, {"polyline"});
    for (const auto* p : all(e, "polyline")) {
      check(*p, {"label"}, {"vertex"});
      Polyline line;
      line.pos = p->pos;
      line.label = required_attr(*p, "label");
      for (const auto* v : all(*p, "vertex")) {
        check(*v, {"x1", "x2"}, {});
        Vertex vx;
        vx.pos = v->pos;
        for (const char* k : {"x1", "x2"}) {
          const auto* a = v->attribute(k);
          if (!a) {
            required_attr(*v, k);
            continue;
          }
          (k[1] == '1' ? vx.x1 : vx.x2) = ExprText::make(trim(a->value), a->pos);
        }
        line.vertices.push_back(std::move(vx));
      }
      doc.graphs.push_back(std::move(line));
    }
  }

  void display(const xml::Element& e, SimulationDoc& doc) {
    check(e, {}, {"window"});
    for (const auto* w : all(e, "window")) {
      check(*w, {"rows", "cols"}, {"title", "axis2d", "axis3d"});
      WindowSpec win;
      win.pos = w->pos;
      win.title = localized(*w, "title");
      win.rows = int_attr(*w, "rows").value_or(0);
      win.cols = int_attr(*w, "cols").value_or(0);
      for (const auto& a : w->children) {
        if (a.name != "axis2d" && a.name != "axis3d") continue;
        check(a, {"xmin", "xmax", "ymin", "ymax"}, {"drawcurve2d", "drawsurface", "drawpoints"});
        AxisSpec axis;
        axis.pos = a.pos;
        axis.dims = a.name == "axis2d" ? 2 : 3;
        axis.xmin = number_attr(a, "xmin");
        axis.xmax = number_attr(a, "xmax");
        axis.ymin = number_attr(a, "ymin");
        axis.ymax = number_attr(a, "ymax");
        for (const auto& d : a.children) {
          DrawRef ref;
          if (d.name == "drawcurve2d") ref.kind = DrawKind::curve2d;
          else if (d.name == "drawsurface") ref.kind = DrawKind::surface;
          else if (d.name == "drawpoints") ref.kind = DrawKind::points;
          else continue;
          check(d, {"ref"}, {});
          ref.ref = required_attr(d, "ref");
          ref.pos = d.pos;
          axis.items.push_back(std::move(ref));
        }
        win.axes.push_back(std::move(axis));
      }
      doc.display.push_back(std::move(win));
    }
  }

  ParseOptions opts_;
};

// ---------------------------------------------------------------------------
// Serialization

using Attrs = std::vector<std::pair<std::string, std::string>>;

void write_localized(xml::Writer& w, std::string_view element, const LocalizedText& t) {
  for (const auto& [lang, text] : t.variants) {
    w.leaf(element, text, lang.empty() ? Attrs{} : Attrs{{"lang", lang}});
  }
}

void add_visibility(Attrs& a, Visibility v) {
  if (v != Visibility::editable) a.emplace_back("visibility", std::string(to_string(v)));
}

void write_interval(xml::Writer& w, std::string_view element, const Interval& iv) {
  Attrs a{{"label", iv.label}};
  if (!iv.unit.empty()) a.emplace_back("unit", iv.unit);
  a.emplace_back("points", std::to_string(iv.n_points));
  if (iv.spacing == Spacing::log) a.emplace_back("scale", "log");
  w.open(element, a);
  write_localized(w, "name", iv.name);
  w.open("interval");
  w.leaf("initialvalue", iv.lower.source);
  w.leaf("finalvalue", iv.upper.source);
  w.close("interval");
  w.close(element);
}

Attrs label_unit(const std::string& label, const std::string& unit) {
  Attrs a{{"label", label}};
  if (!unit.empty()) a.emplace_back("unit", unit);
  return a;
}

struct ComputeWriter {
  xml::Writer& w;

  void operator()(const Domain1D& d) const { write_interval(w, "defdomain1d", d.interval); }
  void operator()(const Domain2D& d) const {
    w.open("defdomain2d", {{"label", d.label}});
    write_localized(w, "name", d.name);
    write_interval(w, "x1", d.x);
    write_interval(w, "x2", d.y);
    w.close("defdomain2d");
  }
  void operator()(const OdeDef& o) const {
    w.open("ode", {{"label", o.label}});
    w.empty("refdomain1d", {{"ref", o.domain.ref}});
    w.open("states");
    for (const auto& s : o.states) {
      w.open("state", label_unit(s.label, s.unit));
      write_localized(w, "name", s.name);
      w.leaf("derivative", s.derivative.source);
      w.leaf("initialcond", s.initial.source);
      w.close("state");
    }
    w.close("states");
    if (!o.outputs.empty()) {
      w.open("outputs");
      for (const auto& out : o.outputs) {
        w.open("output", label_unit(out.label, out.unit));
        write_localized(w, "name", out.name);
        w.leaf("value", out.value.source);
        w.close("output");
      }
      w.close("outputs");
    }
    w.close("ode");
  }
  void operator()(const NonlinearSystemDef& n) const {
    w.open("nonlinear", {{"label", n.label}});
    write_localized(w, "name", n.name);
    w.open("unknowns");
    for (const auto& u : n.unknowns) {
      w.open("unknown", label_unit(u.label, u.unit));
      write_localized(w, "name", u.name);
      w.leaf("initialguess", u.initial_guess.source);
      w.close("unknown");
    }
    w.close("unknowns");
    w.open("equations");
    for (const auto& r : n.residuals) w.leaf("equation", r.source);
    w.close("equations");
    w.close("nonlinear");
  }
  void operator()(const ImplicitCurveDef& c) const {
    w.open("implicitcurve", label_unit(c.label, c.unit));
    write_localized(w, "name", c.name);
    w.empty("refdomain2d", {{"ref", c.domain.ref}});
    w.leaf("equation", c.f.source);
    w.close("implicitcurve");
  }
  void operator()(const CurveDef& c) const {
    Attrs a = label_unit(c.label, c.unit);
    a.emplace_back("type", c.kind == GeometryKind::parametric ? "parametric" : "nonparametric");
    w.open("curve2d", a);
    write_localized(w, "name", c.name);
    w.empty("refdomain1d", {{"ref", c.domain.ref}});
    static const char* kNames[] = {"x", "y"};
    std::size_t offset = c.exprs.size() == 1 ? 1 : 0;
    for (std::size_t k = 0; k < c.exprs.size() && k + offset < 2; ++k) w.leaf(kNames[k + offset], c.exprs[k].source);
    w.close("curve2d");
  }
  void operator()(const SurfaceDef& s) const {
    Attrs a = label_unit(s.label, s.unit);
    a.emplace_back("type", s.kind == GeometryKind::parametric ? "parametric" : "nonparametric");
    w.open("surface", a);
    write_localized(w, "name", s.name);
    w.empty("refdomain2d", {{"ref", s.domain.ref}});
    static const char* kNames[] = {"x", "y", "z"};
    std::size_t offset = s.exprs.size() == 1 ? 2 : 0;
    for (std::size_t k = 0; k < s.exprs.size() && k + offset < 3; ++k) w.leaf(kNames[k + offset], s.exprs[k].source);
    w.close("surface");
  }
  void operator()(const PdeDef& p) const {
    w.open("pde", label_unit(p.label, p.unit));
    write_localized(w, "name", p.name);
    w.empty("refdomain2d", {{"ref", p.domain.ref}});
    w.open("diffusion");
    static const char* kNames[] = {"p11", "p12", "p21", "p22"};
    for (std::size_t k = 0; k < p.diffusion.size() && k < 4; ++k) w.leaf(kNames[k], p.diffusion[k].source);
    w.close("diffusion");
    w.leaf("c", p.c.source);
    w.leaf("f", p.f.source);
    w.open("boundary");
    for (const auto& b : p.boundary) {
      w.leaf(b.kind == BoundaryKind::dirichlet ? "dirichlet" : "neumann", b.value.source,
             {{"edge", std::string(to_string(b.edge))}});
    }
    w.close("boundary");
    w.close("pde");
  }
};

struct ParamWriter {
  xml::Writer& w;

  void operator()(const ScalarParam& p) const {
    Attrs a = label_unit(p.label, p.unit);
    if (p.min) a.emplace_back("min", format_real(*p.min));
    if (p.max) a.emplace_back("max", format_real(*p.max));
    if (p.increment) a.emplace_back("increment", format_real(*p.increment));
    add_visibility(a, p.visibility);
    w.open("scalar", a);
    write_localized(w, "name", p.name);
    w.leaf("value", format_real(p.default_value));
    w.close("scalar");
  }
  void operator()(const MatrixParam& p) const {
    Attrs a = label_unit(p.label, p.unit);
    add_visibility(a, p.visibility);
    w.open("matrix", a);
    write_localized(w, "name", p.name);
    w.leaf("value", format_matrix(p.default_value));
    w.close("matrix");
  }
  void operator()(const PointParam& p) const {
    Attrs a{{"label", p.label}};
    add_visibility(a, p.visibility);
    w.open("point", a);
    write_localized(w, "name", p.name);
    for (const auto* c : {&p.x1, &p.x2}) {
      const char* tag = c == &p.x1 ? "x1" : "x2";
      w.open(tag, {{"label", c->label}});
      w.leaf("value", format_real(c->value));
      w.close(tag);
    }
    if (p.constraint) {
      w.open("constraints");
      w.empty("curve", {{"ref", *p.constraint}});
      w.close("constraints");
    }
    w.close("point");
  }
  void operator()(const ParamDatabase& d) const {
    Attrs a{{"label", d.label}};
    add_visibility(a, d.visibility);
    w.open("database", a);
    write_localized(w, "name", d.name);
    for (const auto& inst : d.instances) {
      w.open("instance", {{"name", inst.name}});
      for (const auto& [label, value] : inst.values) w.empty("set", {{"label", label}, {"value", format_real(value)}});
      w.close("instance");
    }
    w.close("database");
  }
};

}  // namespace

const std::string& LocalizedText::text() const {
  auto it = variants.find("");
  return it == variants.end() ? kEmpty : it->second;
}

ExprText ExprText::make(std::string source, SourcePos pos) {
  ExprText t;
  t.source = std::move(source);
  t.pos = pos;
  try {
    t.parsed = expr::parse(t.source);
  } catch (const expr::ParseError& e) {
    t.error_kind = e.kind();
    t.error = e.what();
  }
  return t;
}

const expr::Expr& ExprText::get() const {
  if (!parsed) throw Error("expression '" + source + "' did not parse: " + error);
  return *parsed;
}

std::vector<std::string> ParamDatabase::member_labels() const {
  std::vector<std::string> out;
  if (instances.empty()) return out;
  for (const auto& [label, value] : instances.front().values) out.push_back(label);
  return out;
}

int WindowSpec::layout_rows() const {
  int n = std::max<int>(1, static_cast<int>(axes.size()));
  if (rows > 0) return rows;
  if (cols > 0) return (n + cols - 1) / cols;
  return n;
}

int WindowSpec::layout_cols() const {
  int n = std::max<int>(1, static_cast<int>(axes.size()));
  if (cols > 0) return cols;
  if (rows > 0) return (n + rows - 1) / rows;
  return 1;
}

std::string Diagnostic::str() const {
  return pos.str() + ": " + (severity == Severity::error ? "error" : "warning") + " [" + code + "] " + message;
}

ParseOutcome parse_document(std::string_view xml_text, const ParseOptions& options) {
  ParseOutcome out;
  xml::Element root;
  try {
    root = xml::parse(xml_text);
  } catch (const xml::ParseError& e) {
    out.errors.push_back({Severity::error, "malformed-xml", e.message(), e.pos()});
    return out;
  }
  Builder b(options);
  SimulationDoc doc = b.simulation(root);
  out.errors = std::move(b.errors);
  out.warnings = std::move(b.warnings);
  if (out.errors.empty()) out.doc = std::move(doc);
  return out;
}

ParseOutcome load_document(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ParseOutcome out;
    out.errors.push_back({Severity::error, "io", "cannot read '" + path + "'", {}});
    return out;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  ParseOutcome out = parse_document(ss.str(), options);
  if (out.doc) out.doc->id = std::filesystem::path(path).stem().string();
  return out;
}

std::string serialize_document(const SimulationDoc& doc) {
  xml::Writer w;
  w.open("simulation");
  w.open("header");
  write_localized(w, "title", doc.header.title);
  if (!doc.header.author.empty()) w.leaf("author", doc.header.author);
  if (!doc.header.date.empty()) w.leaf("date", doc.header.date);
  if (!doc.header.keywords.empty()) {
    w.open("keywords");
    for (const auto& k : doc.header.keywords) w.leaf("keyword", k);
    w.close("keywords");
  }
  w.close("header");
  for (const auto& n : doc.notes) {
    w.open("notes", n.lang.empty() ? Attrs{} : Attrs{{"lang", n.lang}});
    for (const auto& p : n.paragraphs) w.leaf("p", p);
    w.close("notes");
  }
  if (!doc.parameters.empty()) {
    w.open("parameters");
    for (const auto& s : doc.parameters) {
      w.open("section");
      write_localized(w, "title", s.title);
      for (const auto& item : s.items) std::visit(ParamWriter{w}, item);
      w.close("section");
    }
    w.close("parameters");
  }
  if (!doc.compute.empty()) {
    w.open("compute");
    for (const auto& item : doc.compute) std::visit(ComputeWriter{w}, item);
    w.close("compute");
  }
  if (!doc.graphs.empty()) {
    w.open("graphs");
    for (const auto& p : doc.graphs) {
      w.open("polyline", {{"label", p.label}});
      for (const auto& v : p.vertices) w.empty("vertex", {{"x1", v.x1.source}, {"x2", v.x2.source}});
      w.close("polyline");
    }
    w.close("graphs");
  }
  if (doc.has_display) {
    w.open("display");
    for (const auto& win : doc.display) {
      Attrs wa;
      if (win.rows > 0) wa.emplace_back("rows", std::to_string(win.rows));
      if (win.cols > 0) wa.emplace_back("cols", std::to_string(win.cols));
      w.open("window", wa);
      write_localized(w, "title", win.title);
      for (const auto& axis : win.axes) {
        const char* tag = axis.dims == 3 ? "axis3d" : "axis2d";
        Attrs aa;
        if (axis.xmin) aa.emplace_back("xmin", format_real(*axis.xmin));
        if (axis.xmax) aa.emplace_back("xmax", format_real(*axis.xmax));
        if (axis.ymin) aa.emplace_back("ymin", format_real(*axis.ymin));
        if (axis.ymax) aa.emplace_back("ymax", format_real(*axis.ymax));
        if (axis.items.empty()) {
          w.empty(tag, aa);
          continue;
        }
        w.open(tag, aa);
        for (const auto& d : axis.items) {
          const char* dt = d.kind == DrawKind::curve2d ? "drawcurve2d" : d.kind == DrawKind::surface ? "drawsurface" : "drawpoints";
          w.empty(dt, {{"ref", d.ref}});
        }
        w.close(tag);
      }
      w.close("window");
    }
    w.close("display");
  }
  w.close("simulation");
  return w.str();
}

std::string_view to_string(Visibility v) {
  switch (v) {
    case Visibility::editable: return "editable";
    case Visibility::readonly: return "readonly";
    case Visibility::hidden: return "hidden";
  }
  return "editable";
}

std::string_view to_string(Edge e) {
  switch (e) {
    case Edge::left: return "left";
    case Edge::right: return "right";
    case Edge::bottom: return "bottom";
    case Edge::top: return "top";
  }
  return "left";
}

const std::string& label_of(const ComputeItem& item) {
  return std::visit(
      [](const auto& v) -> const std::string& {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Domain1D>) return v.interval.label;
        else return v.label;
      },
      item);
}

Matrix parse_matrix(std::string_view text) {
  std::string s = trim(text);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw Error("matrix literal is missing ']'");
    s = trim(std::string_view(s).substr(1, s.size() - 2));
  }
  Matrix m;
  std::string row;
  std::vector<std::string> rows;
  for (char c : s) {
    if (c == ';' || c == '\n') {
      rows.push_back(row);
      row.clear();
    } else {
      row += c;
    }
  }
  rows.push_back(row);
  for (const auto& r : rows) {
    std::string cleaned = r;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream in(cleaned);
    std::vector<double> values;
    std::string tok;
    while (in >> tok) {
      auto v = parse_real(tok);
      if (!v) throw Error("matrix entry is not a number: '" + tok + "'");
      values.push_back(*v);
    }
    if (values.empty()) continue;
    if (m.rows == 0) m.cols = values.size();
    if (values.size() != m.cols) throw Error("matrix rows have different lengths");
    m.data.insert(m.data.end(), values.begin(), values.end());
    ++m.rows;
  }
  if (m.rows == 0) throw Error("matrix literal is empty");
  return m;
}

std::string format_matrix(const Matrix& m) {
  std::string s = "[";
  for (std::size_t r = 0; r < m.rows; ++r) {
    if (r) s += "; ";
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c) s += ' ';
      s += format_real(m.at(r, c));
    }
  }
  return s + "]";
}

std::string format_real(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::optional<double> parse_real(std::string_view text) {
  std::string t = trim(text);
  if (!t.empty() && t.front() == '+') t.erase(0, 1);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) return std::nullopt;
  return v;
}

}  // namespace simml
