#pragma once

// Plot models and SVG output for the display tree, plus session files.

#include <string>
#include <vector>

#include "simml/runtime.hpp"

namespace simml::render {

struct Bounds {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1, zmin = 0, zmax = 1;
};

struct Curve {
  std::string ref;
  std::string label;  // legend text
  std::vector<double> x, y;
  int color = 0;
};

struct Trace {
  std::string ref;
  std::string label;
  std::vector<rt::Segment> segments;
  int color = 0;
};

/// Cross glyph at a point parameter (or one per matrix row).
struct Marker {
  std::string ref;
  std::string label;
  double x = 0, y = 0;
};

/// Pseudo-color map (2-D axis) or wireframe (3-D axis) of a field or mesh.
struct Surface {
  std::string ref;
  std::string label;
  bool mesh = false;
  rt::Field field;
  double zmin = 0, zmax = 0;
};

struct AxisModel {
  int dims = 2;
  Bounds bounds;
  std::string x_label, y_label, z_label;
  std::vector<Curve> curves;
  std::vector<Trace> traces;
  std::vector<Marker> markers;
  std::vector<Surface> surfaces;

  std::size_t drawable_count() const { return curves.size() + traces.size() + markers.size() + surfaces.size(); }
};

struct WindowModel {
  std::string title;
  int rows = 1, cols = 1;
  std::vector<AxisModel> axes;
};

struct PlotModel {
  std::vector<WindowModel> windows;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

/// Resolves every draw reference against the run. Throws RenderError on a
/// reference with no data.
PlotModel build_plot_model(const std::vector<WindowSpec>& display, const ir::ComputeIR& ir, const rt::RunResult& r);

/// Round tick positions covering [lo, hi]; at most 11.
std::vector<double> nice_ticks(double lo, double hi);

/// Standalone SVG 1.1 for one window.
std::string render_svg(const WindowModel& w, int width = 640, int height = 480);

extern const char* const kPalette[8];
/// 64-step colour map; t in [0, 1].
std::string colormap(double t);

// Sessions ---------------------------------------------------------------

/// `session <doc> version 1` followed by `symbol = value` per visible parameter.
std::string save_session(const ir::ComputeIR& ir, const rt::Valuation& v);

struct LoadedSession {
  rt::Valuation valuation;
  std::vector<std::string> warnings;
};

/// Defaults overridden by the listed values. Throws Error on a document
/// mismatch or an unparseable line (with its line number).
LoadedSession load_session(std::string_view text, const ir::ComputeIR& ir);

}  // namespace simml::render
