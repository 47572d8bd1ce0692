#include <map>
#include <sstream>

#include "simml/compiler.hpp"

namespace simml::ir {

namespace {

std::string plain(const expr::Expr& e) { return expr::to_string(e); }

// Element-wise operators for expressions evaluated over arrays.
std::string dotted(const expr::Expr& e) {
  std::string in = expr::to_string(e), out;
  for (char c : in) {
    if (c == '*' || c == '/' || c == '^') out += '.';
    out += c;
  }
  return out;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\'') out += c;  // Scilab doubles quotes to escape them
    out += c;
  }
  return out + "\"";
}

std::string matrix_text(const Matrix& m) {
  std::string out = "[";
  for (std::size_t r = 0; r < m.rows; ++r) {
    if (r) out += ";";
    for (std::size_t c = 0; c < m.cols; ++c) out += (c ? " " : "") + format_real(m.at(r, c));
  }
  return out + "]";
}

class ScriptWriter {
 public:
  ScriptWriter(const ComputeIR& ir, const std::vector<WindowSpec>& display) : ir_(ir), display_(display) {}

  std::string run() {
    out_ << "// Simulation " << ir_.doc_id << "\n";
    if (!ir_.language.empty()) out_ << "// Language " << ir_.language << "\n";
    if (ir_.functions.empty() && ir_.tasks.empty() && ir_.params.empty() && display_.empty()) return out_.str();
    out_ << "\n";
    for (const auto& f : ir_.functions) function(f);
    parameters();
    for (const auto& t : ir_.tasks) std::visit([&](const auto& v) { task(v); }, t);
    plots();
    return out_.str();
  }

 private:
  void function(const FunctionDef& f) {
    out_ << "function [" << join(f.outputs) << "]=" << f.name << "(" << join(f.inputs) << ")\n";
    for (const auto& a : f.body) {
      switch (a.kind) {
        case Assign::Kind::alias: out_ << a.lhs << "=" << a.source << ";\n"; break;
        case Assign::Kind::select:
          out_ << a.lhs << "=" << a.source << "(" << a.row << ":" << a.row << ",1);\n";
          break;
        case Assign::Kind::stack: {
          out_ << a.lhs << "=[";
          for (std::size_t k = 0; k < a.items.size(); ++k) out_ << (k ? ";" : "") << "(" << plain(a.items[k]) << ")";
          out_ << "];\n";
          break;
        }
      }
    }
    out_ << "endfunction\n\n";
  }

  void parameters() {
    if (ir_.params.empty()) return;
    out_ << "// Parameters\n";
    for (const auto& p : ir_.params) {
      switch (p.kind) {
        case ParamKind::scalar:
        case ParamKind::coordinate: out_ << p.symbol << "=" << format_real(p.default_value) << ";\n"; break;
        case ParamKind::matrix: out_ << p.symbol << "=" << matrix_text(p.default_matrix) << ";\n"; break;
        case ParamKind::selector: {
          std::size_t sel = static_cast<std::size_t>(p.default_value);
          out_ << p.symbol << "=" << sel << ";  // " << p.options.at(sel) << "\n";
          out_ << "_" << p.symbol << "_table=[";
          for (std::size_t r = 0; r < p.table.size(); ++r) {
            out_ << (r ? ";" : "");
            for (std::size_t c = 0; c < p.table[r].size(); ++c) out_ << (c ? " " : "") << format_real(p.table[r][c]);
          }
          out_ << "];\n";
          for (std::size_t c = 0; c < p.members.size(); ++c) {
            out_ << p.members[c] << "=_" << p.symbol << "_table(" << p.symbol << "+1," << c + 1 << ");\n";
          }
          break;
        }
      }
    }
    for (const auto& pl : ir_.polylines) {
      out_ << pl.label << "=[";
      for (std::size_t k = 0; k < pl.vertices.size(); ++k) {
        out_ << (k ? ";" : "") << plain(pl.vertices[k].first) << " " << plain(pl.vertices[k].second);
      }
      out_ << "];\n";
    }
    out_ << "\n";
  }

  void task(const DiscretizeTask& t) {
    for (const auto& a : t.axes) {
      out_ << "// " << (t.axes.size() == 1 ? "Domain " : "Axis ") << a.symbol << "\n";
      if (a.spacing == Spacing::linear) {
        out_ << a.symbol << "=linspace(" << plain(a.lower) << "," << plain(a.upper) << "," << a.n_points << ")';\n";
      } else {
        out_ << a.symbol << "=logspace(log10(" << plain(a.lower) << "),log10(" << plain(a.upper) << "),"
             << a.n_points << ")';\n";
      }
    }
    if (t.axes.size() == 2) {
      out_ << "[_" << t.axes[0].symbol << "_g,_" << t.axes[1].symbol << "_g]=ndgrid(" << t.axes[0].symbol << ","
           << t.axes[1].symbol << ");\n";
    } else {
      lower_[t.label] = plain(t.axes[0].lower);
    }
  }

  void task(const OdeSolveTask& t) {
    out_ << "// Script code for the " << t.label << " ode\n";
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      out_ << "_X0(" << k + 1 << ":" << k + 1 << ",1)=" << plain(t.initial[k]) << ";\n";
    }
    out_ << "_X=ode(_X0," << lower_[t.time] << "," << t.time << "," << t.function << ");\n";
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      out_ << t.states[k] << "=_X(" << k + 1 << ":" << k + 1 << ",:)';\n";
    }
  }

  void task(const OutputEvalTask& t) { out_ << t.symbol << "=" << dotted(t.value) << ";\n"; }

  void task(const NewtonTask& t) {
    out_ << "// Script code for the " << t.label << " nonlinear system\n";
    for (std::size_t k = 0; k < t.unknowns.size(); ++k) {
      out_ << "_x0(" << k + 1 << ":" << k + 1 << ",1)=" << plain(t.initial[k]) << ";\n";
    }
    out_ << "_x=fsolve(_x0," << t.function << ");\n";
    for (std::size_t k = 0; k < t.unknowns.size(); ++k) {
      out_ << t.unknowns[k] << "=_x(" << k + 1 << ":" << k + 1 << ",1);\n";
    }
  }

  // Replaces the domain axes by their ndgrid matrices until restore().
  void enter_grid(const std::string& x, const std::string& y) {
    out_ << "_" << x << "=" << x << ";" << x << "=_" << x << "_g;_" << y << "=" << y << ";" << y << "=_" << y << "_g;\n";
  }

  void restore(const std::string& x, const std::string& y) {
    out_ << x << "=_" << x << ";" << y << "=_" << y << ";\n";
  }

  void task(const ImplicitTraceTask& t) {
    out_ << "// Implicit curve " << t.label << "\n";
    enter_grid(t.x, t.y);
    out_ << t.label << "=" << dotted(t.f) << ";\n";
    restore(t.x, t.y);
  }

  void task(const SampleTask& t) {
    out_ << "// " << (t.surface ? "Surface " : "Curve ") << t.label << "\n";
    static const char* suffix[] = {"_x", "_y", "_z"};
    if (t.surface) enter_grid(t.axes[0], t.axes[1]);
    if (t.parametric) {
      for (std::size_t k = 0; k < t.exprs.size(); ++k) out_ << t.label << suffix[k] << "=" << dotted(t.exprs[k]) << ";\n";
    } else {
      out_ << t.label << "=" << dotted(t.exprs.front()) << ";\n";
    }
    if (t.surface) restore(t.axes[0], t.axes[1]);
  }

  void task(const PdeTask& t) {
    out_ << "// Diffusion problem " << t.label << " on the rectangle " << t.x << " x " << t.y << "\n";
    out_ << "//   -div(P grad u) + c u = f with P=[" << plain(t.p11) << " " << plain(t.p12) << "; " << plain(t.p21)
         << " " << plain(t.p22) << "], c=" << plain(t.c) << ", f=" << plain(t.f) << "\n";
    for (const auto& b : t.boundary) {
      out_ << "//   " << to_string(b.edge) << ": " << (b.kind == BoundaryKind::dirichlet ? "u = " : "flux = ")
           << plain(b.value) << "\n";
    }
    out_ << "// no Scilab built-in solves this problem; " << t.label << " is computed by the runtime\n";
    out_ << t.label << "=zeros(size(" << t.x << ",1),size(" << t.y << ",1));\n";
  }

  void plots() {
    if (display_.empty()) return;
    out_ << "\n// Display\n";
    for (std::size_t w = 0; w < display_.size(); ++w) {
      const auto& win = display_[w];
      out_ << "scf(" << w << ");\nclf();\n";
      const int rows = win.layout_rows(), cols = win.layout_cols();
      for (std::size_t a = 0; a < win.axes.size(); ++a) {
        const auto& axis = win.axes[a];
        if (win.axes.size() > 1) out_ << "subplot(" << rows << "," << cols << "," << a + 1 << ");\n";
        std::vector<std::string> legends;
        bool first_curve = true;
        for (const auto& d : axis.items) {
          const ResultDecl* r = ir_.result(d.ref);
          if (!r) continue;
          std::string call = plot_call(*r, axis.dims == 3);
          if (call.empty()) continue;
          if (d.kind == DrawKind::curve2d && r->role != Role::trace) {
            if (!first_curve) out_ << "hold(\"on\");\n";
            first_curve = false;
            legends.push_back(quoted(r->name));
          }
          out_ << call << "\n";
        }
        if (!first_curve) out_ << "hold(\"off\");\n";
        if (!legends.empty()) out_ << "legend([" << join(legends, ";") << "]);\n";
      }
    }
  }

  std::string plot_call(const ResultDecl& r, bool three_d) {
    switch (r.role) {
      case Role::series: return "plot(" + r.abscissa + "," + r.symbol + ");";
      case Role::curve: return "plot(" + r.symbol + "_x," + r.symbol + "_y);";
      case Role::trace: {
        auto comma = r.abscissa.find(',');
        return "contour2d(" + r.abscissa.substr(0, comma) + "," + r.abscissa.substr(comma + 1) + "," + r.symbol +
               ",[0 0]);";
      }
      case Role::field: {
        auto comma = r.abscissa.find(',');
        std::string xy = r.abscissa.substr(0, comma) + "," + r.abscissa.substr(comma + 1);
        return three_d ? "plot3d(" + xy + "," + r.symbol + ");" : "grayplot(" + xy + "," + r.symbol + ");";
      }
      case Role::mesh: return "surf(" + r.symbol + "_x," + r.symbol + "_y," + r.symbol + "_z);";
      case Role::point: {
        if (const ParamDecl* p = ir_.param(r.symbol); p && p->kind == ParamKind::matrix) {
          return "plot(" + r.symbol + "(:,1)," + r.symbol + "(:,2),\"+\");";
        }
        for (const auto& p : ir_.points) {
          if (p.label == r.symbol) return "plot(" + p.x_symbol + "," + p.y_symbol + ",\"+\");";
        }
        return "";
      }
      case Role::scalar: return "";
    }
    return "";
  }

  static std::string join(const std::vector<std::string>& v, const char* sep = ",") {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? sep : "") + v[k];
    return out;
  }

  const ComputeIR& ir_;
  const std::vector<WindowSpec>& display_;
  std::ostringstream out_;
  std::map<std::string, std::string> lower_;
};

}  // namespace

std::string emit_script(const ComputeIR& ir, const std::vector<WindowSpec>& display) {
  return ScriptWriter(ir, display).run();
}

}  // namespace simml::ir
