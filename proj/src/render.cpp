#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "simml/render.hpp"
#include "simml/xml.hpp"

namespace simml::render {

const char* const kPalette[8] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

namespace {

// Running min/max over finite values.
struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void add(const std::vector<double>& vs) {
    for (double v : vs) add(v);
  }
  bool empty() const { return lo > hi; }
};

// 5% of the span on each side; a flat range is widened around its value.
std::pair<double, double> padded(const Range& r) {
  if (r.empty()) return {0.0, 1.0};
  double span = r.hi - r.lo;
  if (span == 0.0) span = r.lo != 0.0 ? std::abs(r.lo) : 1.0;
  return {r.lo - 0.05 * span, r.hi + 0.05 * span};
}

std::pair<std::string, std::string> split_pair(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos) return {s, ""};
  return {s.substr(0, comma), s.substr(comma + 1)};
}

}  // namespace

PlotModel build_plot_model(const std::vector<WindowSpec>& display, const ir::ComputeIR& ir, const rt::RunResult& r) {
  PlotModel model;
  for (const auto& win : display) {
    WindowModel wm;
    wm.title = win.title.text();
    wm.rows = win.layout_rows();
    wm.cols = win.layout_cols();
    for (const auto& spec : win.axes) {
      AxisModel am;
      am.dims = spec.dims;
      int color = 0;
      Range xr, yr, zr;
      auto set_labels = [&](const std::string& x, const std::string& y) {
        if (am.x_label.empty()) am.x_label = x;
        if (am.y_label.empty()) am.y_label = y;
      };
      for (const auto& d : spec.items) {
        const ir::ResultDecl* decl = ir.result(d.ref);
        if (!decl) throw RenderError("display reference '" + d.ref + "' has no result");
        auto missing = [&] { return RenderError("no data for display reference '" + d.ref + "'"); };
        switch (d.kind) {
          case DrawKind::curve2d: {
            if (decl->role == ir::Role::trace) {
              auto it = r.traces.find(d.ref);
              if (it == r.traces.end()) throw missing();
              Trace t{d.ref, decl->name, it->second, color++ % 8};
              for (const auto& s : t.segments) {
                xr.add(s.x0);
                xr.add(s.x1);
                yr.add(s.y0);
                yr.add(s.y1);
              }
              auto [x, y] = split_pair(decl->abscissa);
              set_labels(x, y);
              am.traces.push_back(std::move(t));
              break;
            }
            auto it = r.series.find(d.ref);
            if (it == r.series.end()) throw missing();
            Curve c{d.ref, decl->name, it->second.x, it->second.y, color++ % 8};
            xr.add(c.x);
            yr.add(c.y);
            set_labels(decl->role == ir::Role::series ? decl->abscissa : "", decl->unit);
            am.curves.push_back(std::move(c));
            break;
          }
          case DrawKind::surface: {
            auto it = r.fields.find(d.ref);
            if (it == r.fields.end()) throw missing();
            Surface s{d.ref, decl->name, it->second.mesh, it->second, 0, 0};
            Range zs;
            zs.add(s.field.z);
            s.zmin = zs.empty() ? 0 : zs.lo;
            s.zmax = zs.empty() ? 0 : zs.hi;
            xr.add(s.field.x);
            yr.add(s.field.y);
            zr.add(s.field.z);
            if (s.mesh) {
              set_labels("x", "y");
            } else {
              auto [x, y] = split_pair(decl->abscissa);
              set_labels(x, y);
            }
            if (am.z_label.empty()) am.z_label = decl->unit;
            am.surfaces.push_back(std::move(s));
            break;
          }
          case DrawKind::points: {
            auto it = r.points.find(d.ref);
            if (it == r.points.end()) throw missing();
            for (const auto& p : it->second) {
              am.markers.push_back({d.ref, decl->name, p.x, p.y});
              xr.add(p.x);
              yr.add(p.y);
            }
            break;
          }
        }
      }
      auto [x0, x1] = padded(xr);
      auto [y0, y1] = padded(yr);
      auto [z0, z1] = padded(zr);
      am.bounds = {spec.xmin.value_or(x0), spec.xmax.value_or(x1), spec.ymin.value_or(y0),
                   spec.ymax.value_or(y1), z0, z1};
      wm.axes.push_back(std::move(am));
    }
    model.windows.push_back(std::move(wm));
  }
  return model;
}

std::vector<double> nice_ticks(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {};
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = 10 * mag;
  for (double m : {1.0, 2.0, 2.5, 5.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  const double first = std::ceil(lo / step - 1e-9), last = std::floor(hi / step + 1e-9);
  for (double k = first; k <= last && out.size() < 11; k += 1) {
    const double t = k * step;
    out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return out;
}

std::string colormap(double t) {
  if (!std::isfinite(t)) t = 0;
  const int idx = std::clamp(static_cast<int>(std::floor(t * 64)), 0, 63);
  const double s = idx / 63.0;
  // blue -> light grey -> red
  const double lo[3] = {59, 76, 192}, mid[3] = {221, 221, 221}, hi[3] = {180, 4, 38};
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    const double v = s < 0.5 ? lo[c] + (mid[c] - lo[c]) * (s / 0.5) : mid[c] + (hi[c] - mid[c]) * ((s - 0.5) / 0.5);
    rgb[c] = static_cast<int>(std::lround(v));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

namespace {

std::string esc(const std::string& s) { return xml::escape(s); }

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string tick_text(double v, double step) {
  int decimals = 0;
  if (step > 0 && std::isfinite(step)) {
    decimals = std::max(0, static_cast<int>(-std::floor(std::log10(step) + 1e-9)));
    const double mant = step / std::pow(10.0, std::floor(std::log10(step) + 1e-9));
    if (std::abs(mant - 2.5) < 1e-9) ++decimals;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", std::min(decimals, 12), v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos) s = "0";
  return s;
}

struct Frame {
  double left, top, width, height;
};

class SvgWriter {
 public:
  SvgWriter(const WindowModel& w, int width, int height) : w_(w), width_(width), height_(height) {}

  std::string run() {
    out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width_ << "\" height=\"" << height_
         << "\" viewBox=\"0 0 " << width_ << " " << height_ << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out_ << "<title>" << esc(w_.title) << "</title>\n";
    out_ << "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" << width_ << "\" height=\"" << height_
         << "\" fill=\"#ffffff\"/>\n";
    double top = 0;
    if (!w_.title.empty()) {
      out_ << "<text class=\"window-title\" x=\"" << px(width_ / 2.0) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
           << esc(w_.title) << "</text>\n";
      top = 26;
    }
    const int rows = std::max(1, w_.rows), cols = std::max(1, w_.cols);
    const double cw = static_cast<double>(width_) / cols, ch = (height_ - top) / rows;
    for (std::size_t a = 0; a < w_.axes.size(); ++a) {
      const int r = static_cast<int>(a) / cols, c = static_cast<int>(a) % cols;
      const Frame cell{c * cw, top + r * ch, cw, ch};
      const Frame plot{cell.left + 64, cell.top + 12, std::max(10.0, cell.width - 80), std::max(10.0, cell.height - 56)};
      axis(a, w_.axes[a], plot);
    }
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  void axis(std::size_t index, const AxisModel& m, const Frame& f) {
    const Bounds& b = m.bounds;
    out_ << "<g class=\"axis\" data-axis-index=\"" << index << "\" data-dims=\"" << m.dims << "\" data-xmin=\""
         << format_real(b.xmin) << "\" data-xmax=\"" << format_real(b.xmax) << "\" data-ymin=\"" << format_real(b.ymin)
         << "\" data-ymax=\"" << format_real(b.ymax) << "\"";
    if (m.dims == 3) out_ << " data-zmin=\"" << format_real(b.zmin) << "\" data-zmax=\"" << format_real(b.zmax) << "\"";
    out_ << " data-px-left=\"" << px(f.left) << "\" data-px-top=\"" << px(f.top) << "\" data-px-width=\"" << px(f.width)
         << "\" data-px-height=\"" << px(f.height) << "\" data-x-label=\"" << esc(m.x_label) << "\" data-y-label=\""
         << esc(m.y_label) << "\">\n";
    if (m.dims == 3) {
      axis3d(index, m, f);
    } else {
      axis2d(index, m, f);
    }
    legend(m, f);
    out_ << "</g>\n";
  }

  // 2-D ------------------------------------------------------------------

  void axis2d(std::size_t index, const AxisModel& m, const Frame& f) {
    const Bounds& b = m.bounds;
    auto sx = [&](double x) { return f.left + (x - b.xmin) / (b.xmax - b.xmin) * f.width; };
    auto sy = [&](double y) { return f.top + f.height - (y - b.ymin) / (b.ymax - b.ymin) * f.height; };

    out_ << "<defs><clipPath id=\"clip-" << index << "\"><rect x=\"" << px(f.left) << "\" y=\"" << px(f.top)
         << "\" width=\"" << px(f.width) << "\" height=\"" << px(f.height) << "\"/></clipPath></defs>\n";
    out_ << "<rect class=\"frame\" x=\"" << px(f.left) << "\" y=\"" << px(f.top) << "\" width=\"" << px(f.width)
         << "\" height=\"" << px(f.height) << "\" fill=\"none\" stroke=\"#000000\"/>\n";

    out_ << "<g class=\"ticks\" stroke=\"#000000\">\n";
    auto xt = nice_ticks(b.xmin, b.xmax), yt = nice_ticks(b.ymin, b.ymax);
    const double xstep = xt.size() > 1 ? xt[1] - xt[0] : 0, ystep = yt.size() > 1 ? yt[1] - yt[0] : 0;
    for (double t : xt) {
      const double x = sx(t);
      out_ << "<line class=\"tick x\" x1=\"" << px(x) << "\" y1=\"" << px(f.top + f.height) << "\" x2=\"" << px(x)
           << "\" y2=\"" << px(f.top + f.height + 5) << "\"/>\n";
      out_ << "<text class=\"tick-label x\" x=\"" << px(x) << "\" y=\"" << px(f.top + f.height + 17)
           << "\" text-anchor=\"middle\" stroke=\"none\">" << tick_text(t, xstep) << "</text>\n";
    }
    for (double t : yt) {
      const double y = sy(t);
      out_ << "<line class=\"tick y\" x1=\"" << px(f.left - 5) << "\" y1=\"" << px(y) << "\" x2=\"" << px(f.left)
           << "\" y2=\"" << px(y) << "\"/>\n";
      out_ << "<text class=\"tick-label y\" x=\"" << px(f.left - 8) << "\" y=\"" << px(y + 4)
           << "\" text-anchor=\"end\" stroke=\"none\">" << tick_text(t, ystep) << "</text>\n";
    }
    out_ << "</g>\n";
    out_ << "<text class=\"x-label\" x=\"" << px(f.left + f.width / 2) << "\" y=\"" << px(f.top + f.height + 36)
         << "\" text-anchor=\"middle\">" << esc(m.x_label) << "</text>\n";
    const double ly = f.top + f.height / 2, lx = f.left - 48;
    out_ << "<text class=\"y-label\" x=\"" << px(lx) << "\" y=\"" << px(ly) << "\" text-anchor=\"middle\" transform=\"rotate(-90 "
         << px(lx) << " " << px(ly) << ")\">" << esc(m.y_label) << "</text>\n";

    out_ << "<g class=\"plot-area\" clip-path=\"url(#clip-" << index << ")\">\n";
    for (const auto& s : m.surfaces) pseudo_color(s, sx, sy);
    for (const auto& t : m.traces) {
      out_ << "<path class=\"trace\" data-ref=\"" << esc(t.ref) << "\" fill=\"none\" stroke=\"" << kPalette[t.color]
           << "\" stroke-width=\"1.5\" d=\"";
      for (const auto& s : t.segments) out_ << "M" << px(sx(s.x0)) << " " << px(sy(s.y0)) << "L" << px(sx(s.x1)) << " " << px(sy(s.y1));
      out_ << "\"/>\n";
    }
    for (const auto& c : m.curves) {
      out_ << "<path class=\"curve\" data-ref=\"" << esc(c.ref) << "\" fill=\"none\" stroke=\"" << kPalette[c.color]
           << "\" stroke-width=\"1.5\" d=\"" << polyline(c.x, c.y, sx, sy) << "\"/>\n";
    }
    for (const auto& mk : m.markers) cross(mk, sx(mk.x), sy(mk.y));
    out_ << "</g>\n";
  }

  template <class SX, class SY>
  std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys, SX sx, SY sy) {
    std::string d;
    bool pen = false;
    for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
        pen = false;
        continue;
      }
      d += (pen ? "L" : "M") + px(sx(xs[i])) + " " + px(sy(ys[i]));
      pen = true;
    }
    return d;
  }

  template <class SX, class SY>
  void pseudo_color(const Surface& s, SX sx, SY sy) {
    const auto& f = s.field;
    const double span = s.zmax - s.zmin;
    auto shade = [&](double v) { return colormap(span > 0 ? (v - s.zmin) / span : 0.5); };
    out_ << "<g class=\"pseudo-color\" data-ref=\"" << esc(s.ref) << "\" data-zmin=\"" << format_real(s.zmin)
         << "\" data-zmax=\"" << format_real(s.zmax) << "\" stroke=\"none\">\n";
    for (std::size_t i = 0; i + 1 < f.nx; ++i) {
      for (std::size_t j = 0; j + 1 < f.ny; ++j) {
        const std::size_t k00 = i * f.ny + j, k10 = (i + 1) * f.ny + j, k11 = k10 + 1, k01 = k00 + 1;
        const double v = (f.z[k00] + f.z[k10] + f.z[k11] + f.z[k01]) / 4;
        if (!std::isfinite(v)) continue;
        if (f.mesh) {
          out_ << "<path fill=\"" << shade(v) << "\" d=\"M" << px(sx(f.x[k00])) << " " << px(sy(f.y[k00])) << "L"
               << px(sx(f.x[k10])) << " " << px(sy(f.y[k10])) << "L" << px(sx(f.x[k11])) << " " << px(sy(f.y[k11]))
               << "L" << px(sx(f.x[k01])) << " " << px(sy(f.y[k01])) << "Z\"/>\n";
        } else {
          const double x0 = sx(f.x[i]), x1 = sx(f.x[i + 1]), y0 = sy(f.y[j + 1]), y1 = sy(f.y[j]);
          out_ << "<rect fill=\"" << shade(v) << "\" x=\"" << px(std::min(x0, x1)) << "\" y=\"" << px(std::min(y0, y1))
               << "\" width=\"" << px(std::abs(x1 - x0) + 0.5) << "\" height=\"" << px(std::abs(y1 - y0) + 0.5) << "\"/>\n";
        }
      }
    }
    out_ << "</g>\n";
  }

  void cross(const Marker& mk, double x, double y) {
    out_ << "<g class=\"point\" data-ref=\"" << esc(mk.ref) << "\" data-x=\"" << format_real(mk.x) << "\" data-y=\""
         << format_real(mk.y) << "\"><path class=\"cross\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2\" d=\"M"
         << px(x - 5) << " " << px(y - 5) << "L" << px(x + 5) << " " << px(y + 5) << "M" << px(x - 5) << " " << px(y + 5)
         << "L" << px(x + 5) << " " << px(y - 5) << "\"/></g>\n";
  }

  // 3-D (isometric) --------------------------------------------------------

  void axis3d(std::size_t, const AxisModel& m, const Frame& f) {
    const Bounds& b = m.bounds;
    const double c30 = std::cos(std::acos(-1.0) / 6), s30 = 0.5;
    // unit cube projected: X in [-c30, c30], Y in [-1, 1]
    const double scale = std::min(f.width / (2 * c30), f.height / 2.0);
    const double cx = f.left + f.width / 2, cy = f.top + f.height / 2;
    auto proj = [&](double x, double y, double z) {
      const double xn = (x - b.xmin) / (b.xmax - b.xmin), yn = (y - b.ymin) / (b.ymax - b.ymin),
                   zn = (z - b.zmin) / (b.zmax - b.zmin);
      const double X = (xn - yn) * c30, Y = zn - (xn + yn) * s30;
      return std::pair{cx + X * scale, cy - Y * scale};
    };
    auto point = [&](double x, double y, double z) {
      auto [u, v] = proj(x, y, z);
      return px(u) + " " + px(v);
    };

    // box edges
    out_ << "<g class=\"frame3d\" fill=\"none\" stroke=\"#888888\">\n<path d=\"";
    const double xs[2] = {b.xmin, b.xmax}, ys[2] = {b.ymin, b.ymax}, zs[2] = {b.zmin, b.zmax};
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        out_ << "M" << point(xs[0], ys[i], zs[j]) << "L" << point(xs[1], ys[i], zs[j]);
        out_ << "M" << point(xs[i], ys[0], zs[j]) << "L" << point(xs[i], ys[1], zs[j]);
        out_ << "M" << point(xs[i], ys[j], zs[0]) << "L" << point(xs[i], ys[j], zs[1]);
      }
    }
    out_ << "\"/>\n</g>\n";

    // tick labels along the three edges through the origin corner
    out_ << "<g class=\"ticks\">\n";
    auto label_axis = [&](const char* cls, double lo, double hi, auto at) {
      auto ticks = nice_ticks(lo, hi);
      const double step = ticks.size() > 1 ? ticks[1] - ticks[0] : 0;
      for (double t : ticks) {
        auto [u, v] = at(t);
        out_ << "<text class=\"tick-label " << cls << "\" x=\"" << px(u) << "\" y=\"" << px(v)
             << "\" text-anchor=\"middle\">" << tick_text(t, step) << "</text>\n";
      }
    };
    label_axis("x", b.xmin, b.xmax, [&](double t) {
      auto p = proj(t, b.ymax, b.zmin);
      return std::pair{p.first + 6, p.second + 14};
    });
    label_axis("y", b.ymin, b.ymax, [&](double t) {
      auto p = proj(b.xmax, t, b.zmin);
      return std::pair{p.first - 6, p.second + 14};
    });
    label_axis("z", b.zmin, b.zmax, [&](double t) {
      auto p = proj(b.xmin, b.ymax, t);
      return std::pair{p.first - 18, p.second + 4};
    });
    out_ << "</g>\n";
    {
      auto [u, v] = proj((b.xmin + b.xmax) / 2, b.ymax, b.zmin);
      out_ << "<text class=\"x-label\" x=\"" << px(u + 20) << "\" y=\"" << px(v + 30) << "\">" << esc(m.x_label) << "</text>\n";
      auto [u2, v2] = proj(b.xmax, (b.ymin + b.ymax) / 2, b.zmin);
      out_ << "<text class=\"y-label\" x=\"" << px(u2 - 30) << "\" y=\"" << px(v2 + 30) << "\">" << esc(m.y_label) << "</text>\n";
      auto [u3, v3] = proj(b.xmin, b.ymax, (b.zmin + b.zmax) / 2);
      out_ << "<text class=\"z-label\" x=\"" << px(u3 - 40) << "\" y=\"" << px(v3) << "\">" << esc(m.z_label) << "</text>\n";
    }

    int color = 0;
    for (const auto& s : m.surfaces) {
      const auto& fd = s.field;
      auto at = [&](std::size_t i, std::size_t j) {
        const std::size_t k = i * fd.ny + j;
        return fd.mesh ? point(fd.x[k], fd.y[k], fd.z[k]) : point(fd.x[i], fd.y[j], fd.z[k]);
      };
      auto finite = [&](std::size_t i, std::size_t j) {
        const std::size_t k = i * fd.ny + j;
        return std::isfinite(fd.z[k]) && (!fd.mesh || (std::isfinite(fd.x[k]) && std::isfinite(fd.y[k])));
      };
      const std::size_t si = std::max<std::size_t>(1, (fd.nx + 39) / 40), sj = std::max<std::size_t>(1, (fd.ny + 39) / 40);
      out_ << "<path class=\"mesh\" data-ref=\"" << esc(s.ref) << "\" fill=\"none\" stroke=\"" << kPalette[color++ % 8]
           << "\" stroke-width=\"0.6\" d=\"";
      auto line = [&](auto next, std::size_t count) {
        bool pen = false;
        for (std::size_t q = 0; q < count; ++q) {
          auto [i, j] = next(q);
          if (!finite(i, j)) {
            pen = false;
            continue;
          }
          out_ << (pen ? "L" : "M") << at(i, j);
          pen = true;
        }
      };
      for (std::size_t i = 0; i < fd.nx; i += si) line([&](std::size_t q) { return std::pair{i, q}; }, fd.ny);
      if ((fd.nx - 1) % si) line([&](std::size_t q) { return std::pair{fd.nx - 1, q}; }, fd.ny);
      for (std::size_t j = 0; j < fd.ny; j += sj) line([&](std::size_t q) { return std::pair{q, j}; }, fd.nx);
      if ((fd.ny - 1) % sj) line([&](std::size_t q) { return std::pair{q, fd.ny - 1}; }, fd.nx);
      out_ << "\"/>\n";
    }
    for (const auto& c : m.curves) {
      out_ << "<path class=\"curve\" data-ref=\"" << esc(c.ref) << "\" fill=\"none\" stroke=\"" << kPalette[c.color]
           << "\" stroke-width=\"1.5\" d=\"";
      bool pen = false;
      for (std::size_t i = 0; i < c.x.size(); ++i) {
        if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i])) {
          pen = false;
          continue;
        }
        out_ << (pen ? "L" : "M") << point(c.x[i], c.y[i], b.zmin);
        pen = true;
      }
      out_ << "\"/>\n";
    }
    for (const auto& mk : m.markers) {
      auto [u, v] = proj(mk.x, mk.y, b.zmin);
      cross(mk, u, v);
    }
  }

  // Legend ------------------------------------------------------------------

  void legend(const AxisModel& m, const Frame& f) {
    std::vector<std::pair<std::string, int>> entries;
    for (const auto& c : m.curves) entries.emplace_back(c.label, c.color);
    for (const auto& t : m.traces) entries.emplace_back(t.label, t.color);
    if (entries.empty()) return;
    std::size_t longest = 0;
    for (const auto& e : entries) longest = std::max(longest, e.first.size());
    const double w = 34 + 6.5 * static_cast<double>(longest), h = 8 + 16.0 * static_cast<double>(entries.size());
    const double x = f.left + f.width - w - 6, y = f.top + 6;
    out_ << "<g class=\"legend\">\n<rect x=\"" << px(x) << "\" y=\"" << px(y) << "\" width=\"" << px(w) << "\" height=\""
         << px(h) << "\" fill=\"#ffffff\" fill-opacity=\"0.85\" stroke=\"#444444\"/>\n";
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const double ey = y + 14 + 16.0 * static_cast<double>(k);
      out_ << "<line x1=\"" << px(x + 6) << "\" y1=\"" << px(ey - 4) << "\" x2=\"" << px(x + 24) << "\" y2=\"" << px(ey - 4)
           << "\" stroke=\"" << kPalette[entries[k].second] << "\" stroke-width=\"2\"/>\n";
      out_ << "<text class=\"legend-label\" x=\"" << px(x + 28) << "\" y=\"" << px(ey) << "\">" << esc(entries[k].first)
           << "</text>\n";
    }
    out_ << "</g>\n";
  }

  const WindowModel& w_;
  int width_, height_;
  std::ostringstream out_;
};

}  // namespace

std::string render_svg(const WindowModel& w, int width, int height) { return SvgWriter(w, width, height).run(); }

// Sessions -------------------------------------------------------------------

std::string save_session(const ir::ComputeIR& ir, const rt::Valuation& v) {
  std::string out = "session " + ir.doc_id + " version 1\n";
  for (const auto& p : ir.params) {
    if (p.visibility == Visibility::hidden) continue;
    auto it = v.find(p.symbol);
    if (it == v.end()) continue;
    out += p.symbol + " = ";
    if (const Matrix* m = std::get_if<Matrix>(&it->second)) {
      out += format_matrix(*m);
    } else {
      out += format_real(std::get<double>(it->second));
    }
    out += "\n";
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

LoadedSession load_session(std::string_view text, const ir::ComputeIR& ir) {
  LoadedSession out{rt::default_valuation(ir), {}};
  bool header = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "session line " + std::to_string(line_no) + ": ";
    if (!header) {
      std::istringstream in{std::string(line)};
      std::string kw, doc, version_kw;
      int version = 0;
      if (!(in >> kw >> doc >> version_kw >> version) || kw != "session" || version_kw != "version") {
        throw Error(where + "expected 'session <document> version 1'");
      }
      if (doc != ir.doc_id) throw Error(where + "session belongs to '" + doc + "', not '" + ir.doc_id + "'");
      if (version != 1) throw Error(where + "unsupported session version " + std::to_string(version));
      header = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(where + "expected 'symbol = value'");
    const std::string symbol(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const ir::ParamDecl* p = ir.param(symbol);
    if (!p) {
      out.warnings.push_back("unknown parameter " + symbol);
      continue;
    }
    if (p->visibility == Visibility::hidden) {
      out.warnings.push_back("hidden parameter " + symbol + " ignored");
      continue;
    }
    rt::ParamValue pv;
    if (p->kind == ir::ParamKind::matrix) {
      try {
        pv = parse_matrix(value);
      } catch (const Error& e) {
        throw Error(where + e.what());
      }
    } else {
      auto d = parse_real(value);
      if (!d) throw Error(where + "'" + std::string(value) + "' is not a number");
      pv = *d;
    }
    try {
      if (auto w = rt::set_param(ir, out.valuation, symbol, pv)) out.warnings.push_back(*w);
    } catch (const rt::RunError& e) {
      throw Error(where + e.what());
    }
  }
  if (!header) throw Error("session file has no header line");
  return out;
}

}  // namespace simml::render
