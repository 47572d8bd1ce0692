#include <algorithm>
#include <fstream>
#include <map>

#include "simml/service.hpp"
#include "simml/xml.hpp"

namespace simml::service {

namespace {

const char* const kStyle =
    "body{font-family:sans-serif;max-width:60em;margin:2em auto;color:#222}"
    "h2{border-bottom:1px solid #ccc}ul{list-style:none;padding:0}li{margin:.3em 0}"
    ".meta{color:#666}img{max-width:100%;border:1px solid #ddd}"
    ".launch{display:inline-block;margin:1em 0;padding:.4em 1em;background:#3b6ea5;color:#fff;"
    "text-decoration:none;border-radius:3px}";

std::string page_head(const std::string& title) {
  return "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>" + xml::escape(title) +
         "</title>\n<style>" + kStyle + "</style>\n</head>\n<body>\n";
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  out.close();
  if (!out) throw Error("cannot write " + p.string());
}

std::string thumbnail(const CompiledDoc& c, const rt::SolverConfig& cfg) {
  const ir::ComputeIR& ir = c.ir.compute;
  rt::Valuation v = rt::default_valuation(ir);
  rt::project_points(ir, v);
  rt::RunResult r = rt::run(ir, v, cfg);
  render::WindowModel window;
  window.title = c.view.doc.header.title.text();
  try {
    render::PlotModel model = render::build_plot_model(c.view.doc.display, ir, r);
    if (!model.windows.empty()) window = std::move(model.windows.front());
  } catch (const render::RenderError&) {
  }
  return render::render_svg(window);
}

std::string simulation_page(const RegistryEntry& e, const CompiledDoc& c) {
  const SimulationDoc& doc = c.view.doc;
  const std::string title = doc.header.title.text();
  std::string h = page_head(title);
  h += "<p><a href=\"../index.html\">All simulations</a></p>\n";
  h += "<h1>" + xml::escape(title) + "</h1>\n";
  std::string meta;
  if (!doc.header.author.empty()) meta += xml::escape(doc.header.author);
  if (!doc.header.date.empty()) meta += (meta.empty() ? "" : ", ") + xml::escape(doc.header.date);
  if (!meta.empty()) h += "<p class=\"meta\">" + meta + "</p>\n";
  if (!doc.header.keywords.empty()) {
    h += "<p class=\"meta\">Keywords: ";
    for (std::size_t i = 0; i < doc.header.keywords.size(); ++i)
      h += (i ? ", " : "") + xml::escape(doc.header.keywords[i]);
    h += "</p>\n";
  }
  h += "<img src=\"" + xml::escape(e.doc_id) + ".svg\" alt=\"" + xml::escape(title) + "\">\n";
  h += "<p><a class=\"launch\" href=\"/?simulation=" + xml::escape(e.doc_id) + "\">Launch</a></p>\n";
  for (const auto& block : doc.notes) {
    for (const auto& para : block.paragraphs) h += "<p>" + xml::escape(para) + "</p>\n";
  }
  h += "</body>\n</html>\n";
  return h;
}

}  // namespace

std::vector<std::string> publish_static(const Registry& registry, const std::filesystem::path& out_dir,
                                        const rt::SolverConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "simulations", ec);
  if (ec) throw Error("cannot create " + (out_dir / "simulations").string() + ": " + ec.message());

  std::vector<std::string> written;
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> groups;  // category -> (id, title)
  for (const RegistryEntry* e : registry.entries()) {
    auto c = registry.compiled(e->doc_id, "");
    const std::string base = "simulations/" + e->doc_id;
    write_file(out_dir / (base + ".svg"), thumbnail(*c, cfg));
    write_file(out_dir / (base + ".html"), simulation_page(*e, *c));
    written.push_back(base + ".html");
    written.push_back(base + ".svg");
    const auto& kw = e->doc.header.keywords;
    groups[kw.empty() ? "Uncategorized" : kw.front()].emplace_back(e->doc_id, e->doc.header.title.text());
  }

  std::string h = page_head("Simulations");
  h += "<h1>Simulations</h1>\n";
  if (groups.empty()) h += "<p>No simulations.</p>\n";
  for (const auto& [category, items] : groups) {
    h += "<h2>" + xml::escape(category) + "</h2>\n<ul>\n";
    for (const auto& [id, title] : items) {
      h += "<li><a href=\"simulations/" + xml::escape(id) + ".html\">" + xml::escape(title) + "</a></li>\n";
    }
    h += "</ul>\n";
  }
  h += "</body>\n</html>\n";
  write_file(out_dir / "index.html", h);
  written.push_back("index.html");
  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace simml::service
