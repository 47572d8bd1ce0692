#pragma once

// Lowering of a language-resolved document into the compute IR (numeric work)
// and the UI-form IR (pages and widgets), plus their emitters.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "simml/document.hpp"
#include "simml/expr.hpp"

namespace simml::ir {

inline constexpr int kIrVersion = 1;

enum class ParamKind { scalar, matrix, coordinate, selector };

struct ParamDecl {
  std::string symbol;
  ParamKind kind = ParamKind::scalar;
  double default_value = 0.0;   // scalar, coordinate, selector (instance index)
  Matrix default_matrix;        // matrix only
  std::optional<double> min, max, increment;
  Visibility visibility = Visibility::editable;
  std::string unit;
  std::string name;
  std::string owner;                          // coordinate: point label
  std::vector<std::string> options;           // selector: instance names
  std::vector<std::string> members;           // selector: member symbols
  std::vector<std::vector<double>> table;     // selector: one row per instance
  bool operator==(const ParamDecl&) const = default;
};

struct PolylineDecl {
  std::string label;
  std::vector<std::pair<expr::Expr, expr::Expr>> vertices;
  bool operator==(const PolylineDecl&) const = default;
};

struct PointDecl {
  std::string label;
  std::string x_symbol;
  std::string y_symbol;
  std::optional<std::string> constraint;
  bool operator==(const PointDecl&) const = default;
};

/// One statement of a function body.
struct Assign {
  enum class Kind { alias, select, stack };
  Kind kind = Kind::alias;
  std::string lhs;
  std::string source;               // alias: source symbol; select: matrix symbol
  int row = 0;                      // select: 1-based row
  std::vector<expr::Expr> items;    // stack: column entries
  bool operator==(const Assign&) const = default;
};

struct FunctionDef {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<Assign> body;
  bool operator==(const FunctionDef&) const = default;
};

struct Axis {
  std::string symbol;
  expr::Expr lower;
  expr::Expr upper;
  int n_points = 200;
  Spacing spacing = Spacing::linear;
  bool operator==(const Axis&) const = default;
};

struct DiscretizeTask {
  std::string label;
  std::vector<Axis> axes;  // one for a 1-D domain, two for a rectangle
  bool operator==(const DiscretizeTask&) const = default;
};

struct OdeSolveTask {
  std::string label;
  std::string function;  // f_<label>
  std::string time;      // time-domain symbol
  std::vector<std::string> states;
  std::vector<expr::Expr> initial;
  bool operator==(const OdeSolveTask&) const = default;
};

struct OutputEvalTask {
  std::string symbol;
  std::string ode;
  std::string time;
  expr::Expr value;
  bool operator==(const OutputEvalTask&) const = default;
};

struct NewtonTask {
  std::string label;
  std::string function;  // F_<label>
  std::vector<std::string> unknowns;
  std::vector<expr::Expr> initial;
  bool operator==(const NewtonTask&) const = default;
};

struct ImplicitTraceTask {
  std::string label;
  std::string domain;
  std::string x;
  std::string y;
  expr::Expr f;
  bool operator==(const ImplicitTraceTask&) const = default;
};

struct SampleTask {
  std::string label;
  std::string domain;
  bool surface = false;
  bool parametric = false;
  std::vector<std::string> axes;   // domain symbols: {t} or {x, y}
  std::vector<expr::Expr> exprs;   // {y}, {x, y}, {z} or {x, y, z}
  bool operator==(const SampleTask&) const = default;
};

struct BoundaryDecl {
  Edge edge = Edge::left;
  BoundaryKind kind = BoundaryKind::dirichlet;
  expr::Expr value;
  bool operator==(const BoundaryDecl&) const = default;
};

struct PdeTask {
  std::string label;
  std::string domain;
  std::string x;
  std::string y;
  expr::Expr p11, p12, p21, p22, c, f;
  std::vector<BoundaryDecl> boundary;  // left, right, bottom, top
  bool operator==(const PdeTask&) const = default;
};

using Task = std::variant<DiscretizeTask, OdeSolveTask, OutputEvalTask, NewtonTask, ImplicitTraceTask, SampleTask,
                          PdeTask>;

enum class Role { series, curve, field, mesh, trace, scalar, point };

struct ResultDecl {
  std::string symbol;
  Role role = Role::series;
  std::string unit;
  std::string name;
  std::string abscissa;  // series: domain symbol; field/trace: "x,y" symbols
  bool operator==(const ResultDecl&) const = default;
};

struct ComputeIR {
  std::string doc_id;
  std::string language;
  std::vector<ParamDecl> params;
  std::vector<PolylineDecl> polylines;
  std::vector<PointDecl> points;
  std::vector<FunctionDef> functions;
  std::vector<Task> tasks;
  std::vector<ResultDecl> results;
  bool operator==(const ComputeIR&) const = default;

  const ParamDecl* param(const std::string& symbol) const;
  const ResultDecl* result(const std::string& symbol) const;
  const FunctionDef* function(const std::string& name) const;
};

enum class WidgetKind { entry, slider, readonly, preset_menu, point_handle };

struct Widget {
  WidgetKind kind = WidgetKind::entry;
  std::string symbol;
  std::string name;
  std::string unit;
  double default_value = 0.0;
  std::optional<std::string> matrix;        // matrix entries: default as "[a b; c d]"
  std::optional<double> from, to, resolution;  // slider
  std::vector<std::string> options;         // preset_menu
  std::string x_symbol, y_symbol;           // point_handle
  std::optional<std::string> constraint;    // point_handle
  double default_y = 0.0;                   // point_handle
  bool rerun = false;
  bool operator==(const Widget&) const = default;
};

enum class PageKind { section, notes, about };

struct Page {
  std::string id;
  PageKind kind = PageKind::section;
  std::string title;
  std::vector<Widget> widgets;
  std::vector<std::string> paragraphs;  // notes
  std::string author, date;             // about
  std::vector<std::string> keywords;    // about
  bool operator==(const Page&) const = default;
};

struct UiFormIR {
  std::string doc_id;
  std::string title;
  std::string language;
  std::vector<std::string> languages;
  std::vector<Page> pages;
  std::vector<std::string> windows;  // window titles, display order
  bool operator==(const UiFormIR&) const = default;
};

struct Compiled {
  ComputeIR compute;
  UiFormIR ui;
};

class LowerError : public Error {
 public:
  using Error::Error;
};

/// Throws LowerError on a dependency cycle among compute items.
Compiled lower(const LocalizedView& view);

using ParamRef = std::variant<const ScalarParam*, const MatrixParam*, const PointParam*, const ParamDatabase*>;

/// Widget for a parameter, or none when it is hidden.
std::optional<WidgetKind> select_widget(ParamRef p);

std::string emit_compute(const ComputeIR& ir);
ComputeIR load_compute(const std::string& json_text);
std::string emit_ui(const UiFormIR& ir);
UiFormIR load_ui(const std::string& json_text);

/// Scilab-syntax script: functions, parameter defaults, discretizations,
/// solver calls, outputs, then plots following the display tree.
std::string emit_script(const ComputeIR& ir, const std::vector<WindowSpec>& display);

std::string_view to_string(WidgetKind k);
std::string_view to_string(Role r);

}  // namespace simml::ir
