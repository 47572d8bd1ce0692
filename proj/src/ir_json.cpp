#include "json.hpp"
#include "simml/compiler.hpp"

namespace simml::ir {

using nlohmann::json;

namespace {

template <class E>
struct EnumNames;

template <>
struct EnumNames<ParamKind> {
  static constexpr std::array<std::string_view, 4> names{"scalar", "matrix", "coordinate", "selector"};
};
template <>
struct EnumNames<Visibility> {
  static constexpr std::array<std::string_view, 3> names{"editable", "readonly", "hidden"};
};
template <>
struct EnumNames<Assign::Kind> {
  static constexpr std::array<std::string_view, 3> names{"alias", "select", "stack"};
};
template <>
struct EnumNames<Spacing> {
  static constexpr std::array<std::string_view, 2> names{"linear", "log"};
};
template <>
struct EnumNames<Edge> {
  static constexpr std::array<std::string_view, 4> names{"left", "right", "bottom", "top"};
};
template <>
struct EnumNames<BoundaryKind> {
  static constexpr std::array<std::string_view, 2> names{"dirichlet", "neumann"};
};
template <>
struct EnumNames<Role> {
  static constexpr std::array<std::string_view, 7> names{"series", "curve", "field", "mesh", "trace", "scalar", "point"};
};
template <>
struct EnumNames<WidgetKind> {
  static constexpr std::array<std::string_view, 5> names{"entry", "slider", "readonly", "preset_menu", "point_handle"};
};
template <>
struct EnumNames<PageKind> {
  static constexpr std::array<std::string_view, 3> names{"section", "notes", "about"};
};

template <class E>
std::string name_of(E e) {
  return std::string(EnumNames<E>::names.at(static_cast<std::size_t>(e)));
}

template <class E>
E enum_of(const json& j) {
  const auto s = j.get<std::string>();
  const auto& names = EnumNames<E>::names;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == s) return static_cast<E>(k);
  }
  throw Error("unknown enumeration value '" + s + "'");
}

json ex(const expr::Expr& e) { return expr::to_string(e); }
expr::Expr ex(const json& j) { return expr::parse(j.get<std::string>()); }

json exprs(const std::vector<expr::Expr>& v) {
  json out = json::array();
  for (const auto& e : v) out.push_back(ex(e));
  return out;
}
std::vector<expr::Expr> exprs(const json& j) {
  std::vector<expr::Expr> out;
  for (const auto& e : j) out.push_back(ex(e));
  return out;
}

void put_opt(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}
std::optional<double> get_opt(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  return j.at(key).get<double>();
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}
Matrix matrix_of(const json& j) {
  Matrix m;
  m.rows = j.size();
  m.cols = m.rows ? j[0].size() : 0;
  for (const auto& row : j) {
    for (const auto& v : row) m.data.push_back(v.get<double>());
  }
  return m;
}

json param_json(const ParamDecl& p) {
  json j{{"symbol", p.symbol}, {"kind", name_of(p.kind)}, {"visibility", name_of(p.visibility)},
         {"unit", p.unit}, {"name", p.name}};
  if (p.kind == ParamKind::matrix) j["default"] = matrix_json(p.default_matrix);
  else j["default"] = p.default_value;
  put_opt(j, "min", p.min);
  put_opt(j, "max", p.max);
  put_opt(j, "increment", p.increment);
  if (!p.owner.empty()) j["owner"] = p.owner;
  if (p.kind == ParamKind::selector) {
    j["options"] = p.options;
    j["members"] = p.members;
    j["table"] = p.table;
  }
  return j;
}
ParamDecl param_of(const json& j) {
  ParamDecl p;
  p.symbol = j.at("symbol");
  p.kind = enum_of<ParamKind>(j.at("kind"));
  p.visibility = enum_of<Visibility>(j.at("visibility"));
  p.unit = j.at("unit");
  p.name = j.at("name");
  if (p.kind == ParamKind::matrix) p.default_matrix = matrix_of(j.at("default"));
  else p.default_value = j.at("default");
  p.min = get_opt(j, "min");
  p.max = get_opt(j, "max");
  p.increment = get_opt(j, "increment");
  if (j.contains("owner")) p.owner = j.at("owner");
  if (p.kind == ParamKind::selector) {
    p.options = j.at("options").get<std::vector<std::string>>();
    p.members = j.at("members").get<std::vector<std::string>>();
    p.table = j.at("table").get<std::vector<std::vector<double>>>();
  }
  return p;
}

json assign_json(const Assign& a) {
  json j{{"kind", name_of(a.kind)}, {"lhs", a.lhs}};
  switch (a.kind) {
    case Assign::Kind::alias: j["source"] = a.source; break;
    case Assign::Kind::select:
      j["matrix"] = a.source;
      j["row"] = a.row;
      break;
    case Assign::Kind::stack: j["items"] = exprs(a.items); break;
  }
  return j;
}
Assign assign_of(const json& j) {
  Assign a;
  a.kind = enum_of<Assign::Kind>(j.at("kind"));
  a.lhs = j.at("lhs");
  switch (a.kind) {
    case Assign::Kind::alias: a.source = j.at("source"); break;
    case Assign::Kind::select:
      a.source = j.at("matrix");
      a.row = j.at("row");
      break;
    case Assign::Kind::stack: a.items = exprs(j.at("items")); break;
  }
  return a;
}

json axis_json(const Axis& a) {
  return {{"symbol", a.symbol}, {"lower", ex(a.lower)}, {"upper", ex(a.upper)}, {"points", a.n_points},
          {"spacing", name_of(a.spacing)}};
}
Axis axis_of(const json& j) {
  return {j.at("symbol"), ex(j.at("lower")), ex(j.at("upper")), j.at("points"), enum_of<Spacing>(j.at("spacing"))};
}

json task_json(const Task& t) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DiscretizeTask>) {
          json axes = json::array();
          for (const auto& a : v.axes) axes.push_back(axis_json(a));
          return {{"task", "discretize"}, {"label", v.label}, {"axes", axes}};
        } else if constexpr (std::is_same_v<T, OdeSolveTask>) {
          return {{"task", "ode_solve"}, {"label", v.label}, {"function", v.function}, {"time", v.time},
                  {"states", v.states}, {"initial", exprs(v.initial)}};
        } else if constexpr (std::is_same_v<T, OutputEvalTask>) {
          return {{"task", "output_eval"}, {"symbol", v.symbol}, {"ode", v.ode}, {"time", v.time},
                  {"value", ex(v.value)}};
        } else if constexpr (std::is_same_v<T, NewtonTask>) {
          return {{"task", "newton"}, {"label", v.label}, {"function", v.function}, {"unknowns", v.unknowns},
                  {"initial", exprs(v.initial)}};
        } else if constexpr (std::is_same_v<T, ImplicitTraceTask>) {
          return {{"task", "implicit_trace"}, {"label", v.label}, {"domain", v.domain}, {"x", v.x}, {"y", v.y},
                  {"f", ex(v.f)}};
        } else if constexpr (std::is_same_v<T, SampleTask>) {
          return {{"task", "sample"}, {"label", v.label}, {"domain", v.domain}, {"surface", v.surface},
                  {"parametric", v.parametric}, {"axes", v.axes}, {"exprs", exprs(v.exprs)}};
        } else {
          json boundary = json::array();
          for (const auto& b : v.boundary) {
            boundary.push_back({{"edge", name_of(b.edge)}, {"kind", name_of(b.kind)}, {"value", ex(b.value)}});
          }
          return {{"task", "pde"}, {"label", v.label}, {"domain", v.domain}, {"x", v.x}, {"y", v.y},
                  {"diffusion", {ex(v.p11), ex(v.p12), ex(v.p21), ex(v.p22)}}, {"c", ex(v.c)}, {"f", ex(v.f)},
                  {"boundary", boundary}};
        }
      },
      t);
}

Task task_of(const json& j) {
  const std::string kind = j.at("task");
  if (kind == "discretize") {
    DiscretizeTask t{j.at("label"), {}};
    for (const auto& a : j.at("axes")) t.axes.push_back(axis_of(a));
    return t;
  }
  if (kind == "ode_solve") {
    return OdeSolveTask{j.at("label"), j.at("function"), j.at("time"),
                        j.at("states").get<std::vector<std::string>>(), exprs(j.at("initial"))};
  }
  if (kind == "output_eval") {
    return OutputEvalTask{j.at("symbol"), j.at("ode"), j.at("time"), ex(j.at("value"))};
  }
  if (kind == "newton") {
    return NewtonTask{j.at("label"), j.at("function"), j.at("unknowns").get<std::vector<std::string>>(),
                      exprs(j.at("initial"))};
  }
  if (kind == "implicit_trace") {
    return ImplicitTraceTask{j.at("label"), j.at("domain"), j.at("x"), j.at("y"), ex(j.at("f"))};
  }
  if (kind == "sample") {
    return SampleTask{j.at("label"), j.at("domain"), j.at("surface"), j.at("parametric"),
                      j.at("axes").get<std::vector<std::string>>(), exprs(j.at("exprs"))};
  }
  if (kind == "pde") {
    PdeTask t;
    t.label = j.at("label");
    t.domain = j.at("domain");
    t.x = j.at("x");
    t.y = j.at("y");
    const auto& d = j.at("diffusion");
    t.p11 = ex(d.at(0));
    t.p12 = ex(d.at(1));
    t.p21 = ex(d.at(2));
    t.p22 = ex(d.at(3));
    t.c = ex(j.at("c"));
    t.f = ex(j.at("f"));
    for (const auto& b : j.at("boundary")) {
      t.boundary.push_back({enum_of<Edge>(b.at("edge")), enum_of<BoundaryKind>(b.at("kind")), ex(b.at("value"))});
    }
    return t;
  }
  throw Error("unknown task kind '" + kind + "'");
}

void check_version(const json& j) {
  if (!j.contains("irVersion") || j.at("irVersion") != kIrVersion) {
    throw Error("unsupported irVersion (expected " + std::to_string(kIrVersion) + ")");
  }
}

template <class F>
auto guarded(const std::string& text, F f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(std::string("malformed IR JSON: ") + e.what());
  } catch (const expr::ParseError& e) {
    throw Error(std::string("malformed expression in IR JSON: ") + e.what());
  }
}

}  // namespace

std::string emit_compute(const ComputeIR& ir) {
  json j;
  j["irVersion"] = kIrVersion;
  j["docId"] = ir.doc_id;
  j["language"] = ir.language;
  j["params"] = json::array();
  for (const auto& p : ir.params) j["params"].push_back(param_json(p));
  j["polylines"] = json::array();
  for (const auto& p : ir.polylines) {
    json verts = json::array();
    for (const auto& [x, y] : p.vertices) verts.push_back({ex(x), ex(y)});
    j["polylines"].push_back({{"label", p.label}, {"vertices", verts}});
  }
  j["points"] = json::array();
  for (const auto& p : ir.points) {
    json pj{{"label", p.label}, {"x", p.x_symbol}, {"y", p.y_symbol}};
    pj["constraint"] = p.constraint ? json(*p.constraint) : json(nullptr);
    j["points"].push_back(pj);
  }
  j["functionDefs"] = json::array();
  for (const auto& f : ir.functions) {
    json body = json::array();
    for (const auto& a : f.body) body.push_back(assign_json(a));
    j["functionDefs"].push_back({{"name", f.name}, {"inputs", f.inputs}, {"outputs", f.outputs}, {"body", body}});
  }
  j["tasks"] = json::array();
  for (const auto& t : ir.tasks) j["tasks"].push_back(task_json(t));
  j["results"] = json::array();
  for (const auto& r : ir.results) {
    j["results"].push_back({{"symbol", r.symbol}, {"role", name_of(r.role)}, {"unit", r.unit}, {"name", r.name},
                            {"abscissa", r.abscissa}});
  }
  return j.dump(2) + "\n";
}

ComputeIR load_compute(const std::string& text) {
  return guarded(text, [](const json& j) {
    check_version(j);
    ComputeIR ir;
    ir.doc_id = j.at("docId");
    ir.language = j.at("language");
    for (const auto& p : j.at("params")) ir.params.push_back(param_of(p));
    for (const auto& p : j.at("polylines")) {
      PolylineDecl d{p.at("label"), {}};
      for (const auto& v : p.at("vertices")) d.vertices.emplace_back(ex(v.at(0)), ex(v.at(1)));
      ir.polylines.push_back(std::move(d));
    }
    for (const auto& p : j.at("points")) {
      PointDecl d{p.at("label"), p.at("x"), p.at("y"), std::nullopt};
      if (!p.at("constraint").is_null()) d.constraint = p.at("constraint").get<std::string>();
      ir.points.push_back(std::move(d));
    }
    for (const auto& f : j.at("functionDefs")) {
      FunctionDef d{f.at("name"), f.at("inputs").get<std::vector<std::string>>(),
                    f.at("outputs").get<std::vector<std::string>>(), {}};
      for (const auto& a : f.at("body")) d.body.push_back(assign_of(a));
      ir.functions.push_back(std::move(d));
    }
    for (const auto& t : j.at("tasks")) ir.tasks.push_back(task_of(t));
    for (const auto& r : j.at("results")) {
      ir.results.push_back({r.at("symbol"), enum_of<Role>(r.at("role")), r.at("unit"), r.at("name"), r.at("abscissa")});
    }
    return ir;
  });
}

std::string emit_ui(const UiFormIR& ir) {
  json j;
  j["irVersion"] = kIrVersion;
  j["docId"] = ir.doc_id;
  j["title"] = ir.title;
  j["language"] = ir.language;
  j["languages"] = ir.languages;
  j["windows"] = ir.windows;
  j["pages"] = json::array();
  for (const auto& p : ir.pages) {
    json pj{{"id", p.id}, {"kind", name_of(p.kind)}, {"title", p.title}};
    if (p.kind == PageKind::section) {
      pj["widgets"] = json::array();
      for (const auto& w : p.widgets) {
        json wj{{"kind", name_of(w.kind)}, {"symbol", w.symbol}, {"name", w.name}, {"unit", w.unit},
                {"default", w.default_value}, {"rerun", w.rerun}};
        if (w.matrix) wj["matrix"] = *w.matrix;
        put_opt(wj, "from", w.from);
        put_opt(wj, "to", w.to);
        put_opt(wj, "resolution", w.resolution);
        if (w.kind == WidgetKind::preset_menu) wj["options"] = w.options;
        if (!w.x_symbol.empty()) {
          wj["x"] = w.x_symbol;
          wj["y"] = w.y_symbol;
          wj["defaultY"] = w.default_y;
          wj["constraint"] = w.constraint ? json(*w.constraint) : json(nullptr);
        }
        pj["widgets"].push_back(std::move(wj));
      }
    } else {
      pj["paragraphs"] = p.paragraphs;
    }
    if (p.kind == PageKind::about) {
      pj["author"] = p.author;
      pj["date"] = p.date;
      pj["keywords"] = p.keywords;
    }
    j["pages"].push_back(std::move(pj));
  }
  return j.dump(2) + "\n";
}

UiFormIR load_ui(const std::string& text) {
  return guarded(text, [](const json& j) {
    check_version(j);
    UiFormIR ir;
    ir.doc_id = j.at("docId");
    ir.title = j.at("title");
    ir.language = j.at("language");
    ir.languages = j.at("languages").get<std::vector<std::string>>();
    ir.windows = j.at("windows").get<std::vector<std::string>>();
    for (const auto& pj : j.at("pages")) {
      Page p;
      p.id = pj.at("id");
      p.kind = enum_of<PageKind>(pj.at("kind"));
      p.title = pj.at("title");
      if (p.kind == PageKind::section) {
        for (const auto& wj : pj.at("widgets")) {
          Widget w;
          w.kind = enum_of<WidgetKind>(wj.at("kind"));
          w.symbol = wj.at("symbol");
          w.name = wj.at("name");
          w.unit = wj.at("unit");
          w.default_value = wj.at("default");
          w.rerun = wj.at("rerun");
          if (wj.contains("matrix")) w.matrix = wj.at("matrix").get<std::string>();
          w.from = get_opt(wj, "from");
          w.to = get_opt(wj, "to");
          w.resolution = get_opt(wj, "resolution");
          if (wj.contains("options")) w.options = wj.at("options").get<std::vector<std::string>>();
          if (wj.contains("x")) {
            w.x_symbol = wj.at("x");
            w.y_symbol = wj.at("y");
            w.default_y = wj.at("defaultY");
            if (!wj.at("constraint").is_null()) w.constraint = wj.at("constraint").get<std::string>();
          }
          p.widgets.push_back(std::move(w));
        }
      } else {
        p.paragraphs = pj.at("paragraphs").get<std::vector<std::string>>();
      }
      if (p.kind == PageKind::about) {
        p.author = pj.at("author");
        p.date = pj.at("date");
        p.keywords = pj.at("keywords").get<std::vector<std::string>>();
      }
      ir.pages.push_back(std::move(p));
    }
    return ir;
  });
}

}  // namespace simml::ir
