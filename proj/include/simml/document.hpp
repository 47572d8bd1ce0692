#pragma once

// Typed AST of a simulation document, its parser, validator, serializer and
// language resolution.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "simml/diagnostics.hpp"
#include "simml/expr.hpp"

namespace simml {

/// Text with per-language variants. The empty key is the default variant.
struct LocalizedText {
  std::map<std::string, std::string> variants;
  SourcePos pos;

  bool empty() const { return variants.empty(); }
  /// Default variant (or empty string when missing).
  const std::string& text() const;
  bool operator==(const LocalizedText&) const = default;
};

/// An expression as written in the document plus its parse outcome.
struct ExprText {
  std::string source;
  std::optional<expr::Expr> parsed;
  std::optional<expr::ParseErrorKind> error_kind;
  std::string error;
  SourcePos pos;

  static ExprText make(std::string source, SourcePos pos = {});
  const expr::Expr& get() const;
  bool operator==(const ExprText& o) const { return source == o.source && parsed == o.parsed; }
};

struct Header {
  LocalizedText title;
  std::string author;
  std::string date;
  std::vector<std::string> keywords;
  SourcePos pos;
  bool operator==(const Header&) const = default;
};

/// One `<notes>` element: paragraphs in one language.
struct LocalizedBlock {
  std::string lang;  // empty = default
  std::vector<std::string> paragraphs;
  SourcePos pos;
  bool operator==(const LocalizedBlock&) const = default;
};

enum class Visibility { editable, readonly, hidden };

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const Matrix&) const = default;
};

struct ScalarParam {
  std::string label;
  std::string unit;
  LocalizedText name;
  double default_value = 0.0;
  std::optional<double> min;
  std::optional<double> max;
  std::optional<double> increment;
  Visibility visibility = Visibility::editable;
  SourcePos pos;
  bool operator==(const ScalarParam&) const = default;
};

struct MatrixParam {
  std::string label;
  std::string unit;
  LocalizedText name;
  Matrix default_value;
  Visibility visibility = Visibility::editable;
  SourcePos pos;
  bool operator==(const MatrixParam&) const = default;
};

struct PointCoordinate {
  std::string label;
  double value = 0.0;
  SourcePos pos;
  bool operator==(const PointCoordinate&) const = default;
};

struct PointParam {
  std::string label;
  LocalizedText name;
  PointCoordinate x1;
  PointCoordinate x2;
  std::optional<std::string> constraint;  // polyline label
  SourcePos constraint_pos;
  Visibility visibility = Visibility::editable;
  SourcePos pos;
  bool operator==(const PointParam&) const = default;
};

struct DatabaseInstance {
  std::string name;
  std::vector<std::pair<std::string, double>> values;  // document order
  SourcePos pos;
  bool operator==(const DatabaseInstance&) const = default;
};

struct ParamDatabase {
  std::string label;
  LocalizedText name;
  std::vector<DatabaseInstance> instances;
  Visibility visibility = Visibility::editable;
  SourcePos pos;

  /// Member symbols, taken from the first instance.
  std::vector<std::string> member_labels() const;
  bool operator==(const ParamDatabase&) const = default;
};

using ParameterItem = std::variant<ScalarParam, MatrixParam, PointParam, ParamDatabase>;

struct ParameterSection {
  LocalizedText title;
  std::vector<ParameterItem> items;
  SourcePos pos;
  bool operator==(const ParameterSection&) const = default;
};

enum class Spacing { linear, log };

struct Interval {
  std::string label;  // axis symbol
  std::string unit;
  LocalizedText name;
  ExprText lower;
  ExprText upper;
  int n_points = 200;
  Spacing spacing = Spacing::linear;
  SourcePos pos;
  bool operator==(const Interval&) const = default;
};

struct Domain1D {
  Interval interval;  // interval.label is the domain label and its symbol
  bool operator==(const Domain1D&) const = default;
};

struct Domain2D {
  std::string label;
  LocalizedText name;
  Interval x;
  Interval y;
  SourcePos pos;
  bool operator==(const Domain2D&) const = default;
};

struct Reference {
  std::string ref;
  SourcePos pos;
  bool operator==(const Reference&) const = default;
};

struct OdeState {
  std::string label;
  std::string unit;
  LocalizedText name;
  ExprText derivative;
  ExprText initial;
  SourcePos pos;
  bool operator==(const OdeState&) const = default;
};

struct OdeOutput {
  std::string label;
  std::string unit;
  LocalizedText name;
  ExprText value;
  SourcePos pos;
  bool operator==(const OdeOutput&) const = default;
};

struct OdeDef {
  std::string label;
  Reference domain;
  std::vector<OdeState> states;
  std::vector<OdeOutput> outputs;
  SourcePos pos;
  bool operator==(const OdeDef&) const = default;
};

struct Unknown {
  std::string label;
  std::string unit;
  LocalizedText name;
  ExprText initial_guess;
  SourcePos pos;
  bool operator==(const Unknown&) const = default;
};

struct NonlinearSystemDef {
  std::string label;
  LocalizedText name;
  std::vector<Unknown> unknowns;
  std::vector<ExprText> residuals;
  SourcePos pos;
  bool operator==(const NonlinearSystemDef&) const = default;
};

struct ImplicitCurveDef {
  std::string label;
  std::string unit;
  LocalizedText name;
  Reference domain;
  ExprText f;
  SourcePos pos;
  bool operator==(const ImplicitCurveDef&) const = default;
};

enum class GeometryKind { nonparametric, parametric };

struct CurveDef {
  std::string label;
  std::string unit;
  LocalizedText name;
  GeometryKind kind = GeometryKind::nonparametric;
  Reference domain;
  std::vector<ExprText> exprs;  // {y} or {x, y}
  SourcePos pos;
  bool operator==(const CurveDef&) const = default;
};

struct SurfaceDef {
  std::string label;
  std::string unit;
  LocalizedText name;
  GeometryKind kind = GeometryKind::nonparametric;
  Reference domain;
  std::vector<ExprText> exprs;  // {z} or {x, y, z}
  SourcePos pos;
  bool operator==(const SurfaceDef&) const = default;
};

enum class Edge { left, right, bottom, top };
enum class BoundaryKind { dirichlet, neumann };

struct BoundaryCondition {
  Edge edge = Edge::left;
  BoundaryKind kind = BoundaryKind::dirichlet;
  ExprText value;  // Dirichlet value, or outward normal flux (P grad u).n
  SourcePos pos;
  bool operator==(const BoundaryCondition&) const = default;
};

/// -div(P grad u) + c u = f on a rectangle.
struct PdeDef {
  std::string label;
  std::string unit;
  LocalizedText name;
  Reference domain;
  std::vector<ExprText> diffusion;  // p11, p12, p21, p22
  ExprText c;
  ExprText f;
  std::vector<BoundaryCondition> boundary;
  SourcePos pos;
  bool operator==(const PdeDef&) const = default;
};

using ComputeItem =
    std::variant<Domain1D, Domain2D, OdeDef, NonlinearSystemDef, ImplicitCurveDef, CurveDef, SurfaceDef, PdeDef>;

struct Vertex {
  ExprText x1;
  ExprText x2;
  SourcePos pos;
  bool operator==(const Vertex&) const = default;
};

struct Polyline {
  std::string label;
  std::vector<Vertex> vertices;
  SourcePos pos;
  bool operator==(const Polyline&) const = default;
};

enum class DrawKind { curve2d, surface, points };

struct DrawRef {
  DrawKind kind = DrawKind::curve2d;
  std::string ref;
  SourcePos pos;
  bool operator==(const DrawRef&) const = default;
};

struct AxisSpec {
  int dims = 2;
  std::vector<DrawRef> items;
  std::optional<double> xmin, xmax, ymin, ymax;
  SourcePos pos;
  bool operator==(const AxisSpec&) const = default;
};

struct WindowSpec {
  LocalizedText title;
  std::vector<AxisSpec> axes;
  int rows = 0;  // 0 = derived from the axis count
  int cols = 0;
  SourcePos pos;
  bool operator==(const WindowSpec&) const = default;

  int layout_rows() const;
  int layout_cols() const;
};

struct SimulationDoc {
  std::string id;  // document identifier (file stem), not part of the XML
  Header header;
  std::vector<LocalizedBlock> notes;
  std::vector<ParameterSection> parameters;
  std::vector<ComputeItem> compute;
  std::vector<Polyline> graphs;
  std::vector<WindowSpec> display;
  bool has_display = false;
  SourcePos pos;
  bool operator==(const SimulationDoc& o) const {
    return header == o.header && notes == o.notes && parameters == o.parameters && compute == o.compute &&
           graphs == o.graphs && display == o.display && has_display == o.has_display;
  }

  /// Every language tag used by any localized element.
  std::set<std::string> languages() const;
};

struct ParseOptions {
  bool lax = false;  // unknown elements/attributes become warnings
};

struct ParseOutcome {
  std::optional<SimulationDoc> doc;
  Diagnostics errors;
  Diagnostics warnings;
  bool ok() const { return doc.has_value(); }
};

ParseOutcome parse_document(std::string_view xml_text, const ParseOptions& options = {});

/// Reads and parses a file; the document id is the file stem.
ParseOutcome load_document(const std::string& path, const ParseOptions& options = {});

std::string serialize_document(const SimulationDoc& doc);

struct ValidationReport {
  Diagnostics errors;
  Diagnostics warnings;
  bool ok() const { return errors.empty(); }
  bool operator==(const ValidationReport& o) const;
};

ValidationReport validate(const SimulationDoc& doc);

/// A document whose localized texts are collapsed to one language.
struct LocalizedView {
  SimulationDoc doc;  // every LocalizedText holds only its default variant
  std::string language;  // requested tag; empty = default
  std::set<std::string> available;  // languages offered by the source document
  std::vector<std::string> warnings;
};

LocalizedView resolve_language(const SimulationDoc& doc, const std::optional<std::string>& lang);

// Helpers shared by the compiler and the session loader.

std::string_view to_string(Visibility v);
std::string_view to_string(Edge e);

/// Label of any compute item.
const std::string& label_of(const ComputeItem& item);

/// Parses "[1 2; 3 4]" / "1 2;3 4" / "1,2;3,4". Throws Error on ragged or empty input.
Matrix parse_matrix(std::string_view text);
std::string format_matrix(const Matrix& m);

/// Shortest decimal text that reads back to exactly the same double.
std::string format_real(double v);
std::optional<double> parse_real(std::string_view text);

}  // namespace simml
