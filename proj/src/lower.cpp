#include <algorithm>
#include <map>
#include <set>

#include "simml/compiler.hpp"

namespace simml::ir {

namespace {

std::string display_name(const LocalizedText& t, const std::string& fallback) {
  return t.text().empty() ? fallback : t.text();
}

// Symbols an item makes available to other items.
std::vector<std::string> produced(const ComputeItem& item) {
  return std::visit(
      [](const auto& v) -> std::vector<std::string> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Domain1D>) {
          return {v.interval.label};
        } else if constexpr (std::is_same_v<T, Domain2D>) {
          return {v.label, v.x.label, v.y.label};
        } else if constexpr (std::is_same_v<T, NonlinearSystemDef>) {
          std::vector<std::string> out{v.label};
          for (const auto& u : v.unknowns) out.push_back(u.label);
          return out;
        } else if constexpr (std::is_same_v<T, OdeDef>) {
          std::vector<std::string> out{v.label};
          for (const auto& s : v.states) out.push_back(s.label);
          for (const auto& o : v.outputs) out.push_back(o.label);
          return out;
        } else {
          return {v.label};
        }
      },
      item);
}

void add_symbols(const ExprText& e, std::set<std::string>& out) {
  if (e.parsed) {
    auto s = expr::free_symbols(*e.parsed);
    out.insert(s.begin(), s.end());
  }
}

void add_interval(const Interval& iv, std::set<std::string>& out) {
  add_symbols(iv.lower, out);
  add_symbols(iv.upper, out);
}

// Symbols and references an item reads.
std::set<std::string> consumed(const ComputeItem& item) {
  std::set<std::string> out;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Domain1D>) {
          add_interval(v.interval, out);
        } else if constexpr (std::is_same_v<T, Domain2D>) {
          add_interval(v.x, out);
          add_interval(v.y, out);
        } else if constexpr (std::is_same_v<T, OdeDef>) {
          out.insert(v.domain.ref);
          for (const auto& s : v.states) {
            add_symbols(s.derivative, out);
            add_symbols(s.initial, out);
          }
          for (const auto& o : v.outputs) add_symbols(o.value, out);
        } else if constexpr (std::is_same_v<T, NonlinearSystemDef>) {
          for (const auto& u : v.unknowns) add_symbols(u.initial_guess, out);
          for (const auto& r : v.residuals) add_symbols(r, out);
        } else if constexpr (std::is_same_v<T, ImplicitCurveDef>) {
          out.insert(v.domain.ref);
          add_symbols(v.f, out);
        } else if constexpr (std::is_same_v<T, CurveDef> || std::is_same_v<T, SurfaceDef>) {
          out.insert(v.domain.ref);
          for (const auto& e : v.exprs) add_symbols(e, out);
        } else if constexpr (std::is_same_v<T, PdeDef>) {
          out.insert(v.domain.ref);
          for (const auto& e : v.diffusion) add_symbols(e, out);
          add_symbols(v.c, out);
          add_symbols(v.f, out);
          for (const auto& b : v.boundary) add_symbols(b.value, out);
        }
      },
      item);
  for (const auto& s : produced(item)) out.erase(s);
  return out;
}

// Stable topological order: among ready items the earliest in the document goes first.
std::vector<std::size_t> order_items(const std::vector<ComputeItem>& items) {
  const std::size_t n = items.size();
  std::map<std::string, std::size_t> producer;
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& s : produced(items[k])) producer.emplace(s, k);
  }
  std::vector<std::set<std::size_t>> deps(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& s : consumed(items[k])) {
      if (auto it = producer.find(s); it != producer.end() && it->second != k) deps[k].insert(it->second);
    }
  }
  std::vector<std::size_t> order;
  std::vector<bool> done(n, false);
  while (order.size() < n) {
    std::size_t pick = n;
    for (std::size_t k = 0; k < n && pick == n; ++k) {
      if (done[k]) continue;
      if (std::all_of(deps[k].begin(), deps[k].end(), [&](std::size_t d) { return done[d]; })) pick = k;
    }
    if (pick == n) {
      // Walk unfinished dependencies until a node repeats.
      std::size_t at = 0;
      while (done[at]) ++at;
      std::vector<std::size_t> path;
      std::vector<int> seen(n, -1);
      while (seen[at] < 0) {
        seen[at] = static_cast<int>(path.size());
        path.push_back(at);
        for (std::size_t d : deps[at]) {
          if (!done[d]) {
            at = d;
            break;
          }
        }
      }
      std::string msg = "dependency cycle among compute items:";
      for (std::size_t k = static_cast<std::size_t>(seen[at]); k < path.size(); ++k) msg += " " + label_of(items[path[k]]) + " ->";
      msg += " " + label_of(items[at]);
      throw LowerError(msg);
    }
    done[pick] = true;
    order.push_back(pick);
  }
  return order;
}

Axis make_axis(const Interval& iv) {
  return Axis{iv.label, iv.lower.get(), iv.upper.get(), iv.n_points, iv.spacing};
}

class Lowering {
 public:
  explicit Lowering(const LocalizedView& view) : view_(view), doc_(view.doc) {}

  Compiled run() {
    c_.doc_id = doc_.id;
    c_.language = view_.language;
    u_.doc_id = doc_.id;
    u_.language = view_.language;
    u_.languages.assign(view_.available.begin(), view_.available.end());
    u_.title = display_name(doc_.header.title, doc_.id);
    parameters();
    for (const auto& p : doc_.graphs) {
      PolylineDecl d{p.label, {}};
      for (const auto& v : p.vertices) d.vertices.emplace_back(v.x1.get(), v.x2.get());
      c_.polylines.push_back(std::move(d));
    }
    for (std::size_t k : order_items(doc_.compute)) {
      std::visit([&](const auto& v) { item(v); }, doc_.compute[k]);
    }
    pages();
    for (std::size_t w = 0; w < doc_.display.size(); ++w) {
      u_.windows.push_back(display_name(doc_.display[w].title, "Window " + std::to_string(w + 1)));
    }
    return {std::move(c_), std::move(u_)};
  }

 private:
  void parameters() {
    std::set<std::string> drawn_points;
    for (const auto& w : doc_.display) {
      for (const auto& a : w.axes) {
        for (const auto& d : a.items) {
          if (d.kind == DrawKind::points) drawn_points.insert(d.ref);
        }
      }
    }
    for (const auto& section : doc_.parameters) {
      for (const auto& item : section.items) {
        if (const auto* s = std::get_if<ScalarParam>(&item)) {
          ParamDecl d;
          d.symbol = s->label;
          d.default_value = s->default_value;
          d.min = s->min;
          d.max = s->max;
          d.increment = s->increment;
          d.visibility = s->visibility;
          d.unit = s->unit;
          d.name = display_name(s->name, s->label);
          c_.params.push_back(std::move(d));
        } else if (const auto* m = std::get_if<MatrixParam>(&item)) {
          ParamDecl d;
          d.symbol = m->label;
          d.kind = ParamKind::matrix;
          d.default_matrix = m->default_value;
          d.visibility = m->visibility;
          d.unit = m->unit;
          d.name = display_name(m->name, m->label);
          if (drawn_points.count(m->label)) {
            c_.results.push_back({m->label, Role::point, m->unit, d.name, ""});
          }
          c_.params.push_back(std::move(d));
        } else if (const auto* p = std::get_if<PointParam>(&item)) {
          for (const auto* coord : {&p->x1, &p->x2}) {
            ParamDecl d;
            d.symbol = coord->label;
            d.kind = ParamKind::coordinate;
            d.default_value = coord->value;
            d.visibility = p->visibility;
            d.name = coord->label;
            d.owner = p->label;
            c_.params.push_back(std::move(d));
          }
          c_.points.push_back({p->label, p->x1.label, p->x2.label, p->constraint});
          c_.results.push_back({p->label, Role::point, "", display_name(p->name, p->label), ""});
        } else if (const auto* db = std::get_if<ParamDatabase>(&item)) {
          ParamDecl d;
          d.symbol = db->label;
          d.kind = ParamKind::selector;
          d.visibility = db->visibility;
          d.name = display_name(db->name, db->label);
          d.members = db->member_labels();
          for (const auto& inst : db->instances) {
            d.options.push_back(inst.name);
            std::vector<double> row;
            for (const auto& member : d.members) {
              auto it = std::find_if(inst.values.begin(), inst.values.end(),
                                     [&](const auto& kv) { return kv.first == member; });
              row.push_back(it == inst.values.end() ? 0.0 : it->second);
            }
            d.table.push_back(std::move(row));
          }
          d.min = 0;
          d.max = static_cast<double>(db->instances.size()) - 1;
          d.increment = 1;
          c_.params.push_back(std::move(d));
        }
      }
    }
  }

  void item(const Domain1D& d) {
    c_.tasks.emplace_back(DiscretizeTask{d.interval.label, {make_axis(d.interval)}});
  }

  void item(const Domain2D& d) {
    c_.tasks.emplace_back(DiscretizeTask{d.label, {make_axis(d.x), make_axis(d.y)}});
    domain2d_[d.label] = {d.x.label, d.y.label};
  }

  void item(const OdeDef& o) {
    const std::string time = o.domain.ref;
    FunctionDef f{"f_" + o.label, {"_t", "_X"}, {"lhs"}, {}};
    f.body.push_back({Assign::Kind::alias, time, "_t", 0, {}});
    OdeSolveTask task{o.label, f.name, time, {}, {}};
    Assign stack{Assign::Kind::stack, "lhs", "", 0, {}};
    for (std::size_t k = 0; k < o.states.size(); ++k) {
      const auto& s = o.states[k];
      f.body.push_back({Assign::Kind::select, s.label, "_X", static_cast<int>(k + 1), {}});
      stack.items.push_back(s.derivative.get());
      task.states.push_back(s.label);
      task.initial.push_back(s.initial.get());
      c_.results.push_back({s.label, Role::series, s.unit, display_name(s.name, s.label), time});
    }
    f.body.push_back(std::move(stack));
    c_.functions.push_back(std::move(f));
    c_.tasks.emplace_back(std::move(task));
    for (const auto& out : o.outputs) {
      c_.tasks.emplace_back(OutputEvalTask{out.label, o.label, time, out.value.get()});
      c_.results.push_back({out.label, Role::series, out.unit, display_name(out.name, out.label), time});
    }
  }

  void item(const NonlinearSystemDef& n) {
    FunctionDef f{"F_" + n.label, {"_x"}, {"_r"}, {}};
    NewtonTask task{n.label, f.name, {}, {}};
    for (std::size_t k = 0; k < n.unknowns.size(); ++k) {
      const auto& u = n.unknowns[k];
      f.body.push_back({Assign::Kind::select, u.label, "_x", static_cast<int>(k + 1), {}});
      task.unknowns.push_back(u.label);
      task.initial.push_back(u.initial_guess.get());
      c_.results.push_back({u.label, Role::scalar, u.unit, display_name(u.name, u.label), ""});
    }
    Assign stack{Assign::Kind::stack, "_r", "", 0, {}};
    for (const auto& r : n.residuals) stack.items.push_back(r.get());
    f.body.push_back(std::move(stack));
    c_.functions.push_back(std::move(f));
    c_.tasks.emplace_back(std::move(task));
  }

  void item(const ImplicitCurveDef& d) {
    const auto& [x, y] = domain2d_.at(d.domain.ref);
    c_.tasks.emplace_back(ImplicitTraceTask{d.label, d.domain.ref, x, y, d.f.get()});
    c_.results.push_back({d.label, Role::trace, d.unit, display_name(d.name, d.label), x + "," + y});
  }

  void item(const CurveDef& d) {
    SampleTask t{d.label, d.domain.ref, false, d.kind == GeometryKind::parametric, {d.domain.ref}, {}};
    for (const auto& e : d.exprs) t.exprs.push_back(e.get());
    c_.tasks.emplace_back(std::move(t));
    c_.results.push_back({d.label, d.kind == GeometryKind::parametric ? Role::curve : Role::series, d.unit,
                          display_name(d.name, d.label), d.domain.ref});
  }

  void item(const SurfaceDef& d) {
    const auto& [x, y] = domain2d_.at(d.domain.ref);
    SampleTask t{d.label, d.domain.ref, true, d.kind == GeometryKind::parametric, {x, y}, {}};
    for (const auto& e : d.exprs) t.exprs.push_back(e.get());
    c_.tasks.emplace_back(std::move(t));
    c_.results.push_back({d.label, d.kind == GeometryKind::parametric ? Role::mesh : Role::field, d.unit,
                          display_name(d.name, d.label), x + "," + y});
  }

  void item(const PdeDef& d) {
    const auto& [x, y] = domain2d_.at(d.domain.ref);
    PdeTask t;
    t.label = d.label;
    t.domain = d.domain.ref;
    t.x = x;
    t.y = y;
    t.p11 = d.diffusion.at(0).get();
    t.p12 = d.diffusion.at(1).get();
    t.p21 = d.diffusion.at(2).get();
    t.p22 = d.diffusion.at(3).get();
    t.c = d.c.get();
    t.f = d.f.get();
    for (Edge e : {Edge::left, Edge::right, Edge::bottom, Edge::top}) {
      for (const auto& b : d.boundary) {
        if (b.edge == e) {
          t.boundary.push_back({b.edge, b.kind, b.value.get()});
          break;
        }
      }
    }
    c_.tasks.emplace_back(std::move(t));
    c_.results.push_back({d.label, Role::field, d.unit, display_name(d.name, d.label), x + "," + y});
  }

  void pages() {
    for (std::size_t k = 0; k < doc_.parameters.size(); ++k) {
      const auto& section = doc_.parameters[k];
      Page page;
      page.id = "section-" + std::to_string(k + 1);
      page.title = display_name(section.title, "Parameters");
      for (const auto& item : section.items) {
        std::visit([&](const auto& p) { widget(&p, page); }, item);
      }
      u_.pages.push_back(std::move(page));
    }
    Page notes;
    notes.id = "notes";
    notes.kind = PageKind::notes;
    notes.title = "Notes";
    for (const auto& block : doc_.notes) {
      notes.paragraphs.insert(notes.paragraphs.end(), block.paragraphs.begin(), block.paragraphs.end());
    }
    u_.pages.push_back(std::move(notes));
    Page about;
    about.id = "about";
    about.kind = PageKind::about;
    about.title = "About";
    about.author = doc_.header.author;
    about.date = doc_.header.date;
    about.keywords = doc_.header.keywords;
    about.paragraphs.push_back(u_.title);
    u_.pages.push_back(std::move(about));
  }

  template <class P>
  void widget(const P* p, Page& page) {
    auto kind = select_widget(p);
    if (!kind) return;
    Widget w;
    w.kind = *kind;
    w.symbol = p->label;
    w.name = display_name(p->name, p->label);
    w.rerun = *kind != WidgetKind::readonly;
    if constexpr (std::is_same_v<P, ScalarParam>) {
      w.unit = p->unit;
      w.default_value = p->default_value;
      if (*kind == WidgetKind::slider) {
        w.from = p->min;
        w.to = p->max;
        w.resolution = p->increment;
      }
    } else if constexpr (std::is_same_v<P, MatrixParam>) {
      w.unit = p->unit;
      w.matrix = format_matrix(p->default_value);
    } else if constexpr (std::is_same_v<P, PointParam>) {
      w.x_symbol = p->x1.label;
      w.y_symbol = p->x2.label;
      w.default_value = p->x1.value;
      w.default_y = p->x2.value;
      w.constraint = p->constraint;
    } else {
      for (const auto& inst : p->instances) w.options.push_back(inst.name);
    }
    page.widgets.push_back(std::move(w));
  }

  const LocalizedView& view_;
  const SimulationDoc& doc_;
  ComputeIR c_;
  UiFormIR u_;
  std::map<std::string, std::pair<std::string, std::string>> domain2d_;
};

}  // namespace

std::optional<WidgetKind> select_widget(ParamRef ref) {
  return std::visit(
      [](const auto* p) -> std::optional<WidgetKind> {
        using P = std::decay_t<decltype(*p)>;
        if (p->visibility == Visibility::hidden) return std::nullopt;
        if (p->visibility == Visibility::readonly) return WidgetKind::readonly;
        if constexpr (std::is_same_v<P, ScalarParam>) {
          return p->min && p->max && p->increment ? WidgetKind::slider : WidgetKind::entry;
        } else if constexpr (std::is_same_v<P, MatrixParam>) {
          return WidgetKind::entry;
        } else if constexpr (std::is_same_v<P, PointParam>) {
          return WidgetKind::point_handle;
        } else {
          return WidgetKind::preset_menu;
        }
      },
      ref);
}

Compiled lower(const LocalizedView& view) { return Lowering(view).run(); }

const ParamDecl* ComputeIR::param(const std::string& symbol) const {
  for (const auto& p : params) {
    if (p.symbol == symbol) return &p;
  }
  return nullptr;
}

const ResultDecl* ComputeIR::result(const std::string& symbol) const {
  for (const auto& r : results) {
    if (r.symbol == symbol) return &r;
  }
  return nullptr;
}

const FunctionDef* ComputeIR::function(const std::string& name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::string_view to_string(WidgetKind k) {
  switch (k) {
    case WidgetKind::entry: return "entry";
    case WidgetKind::slider: return "slider";
    case WidgetKind::readonly: return "readonly";
    case WidgetKind::preset_menu: return "preset_menu";
    case WidgetKind::point_handle: return "point_handle";
  }
  return "entry";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::series: return "series";
    case Role::curve: return "curve";
    case Role::field: return "field";
    case Role::mesh: return "mesh";
    case Role::trace: return "trace";
    case Role::scalar: return "scalar";
    case Role::point: return "point";
  }
  return "series";
}

}  // namespace simml::ir
