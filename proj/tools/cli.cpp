#include "cli.hpp"

#include <pthread.h>

#include <csignal>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "simml/compiler.hpp"
#include "simml/render.hpp"
#include "simml/runtime.hpp"
#include "simml/service.hpp"

namespace simml::cli {

namespace {

struct UsageError : Error {
  using Error::Error;
};

struct Loaded {
  LocalizedView view;
  ir::Compiled compiled;
};

/// Parses and validates; prints diagnostics. Empty when the document has errors.
std::optional<SimulationDoc> load_valid(const std::string& file, bool lax, std::ostream& err, bool print_warnings) {
  ParseOutcome out = load_document(file, ParseOptions{lax});
  for (const auto& d : out.errors) err << file << ":" << d.str() << "\n";
  if (print_warnings)
    for (const auto& d : out.warnings) err << file << ":" << d.str() << "\n";
  if (!out.ok()) return std::nullopt;
  ValidationReport report = validate(*out.doc);
  for (const auto& d : report.errors) err << file << ":" << d.str() << "\n";
  if (print_warnings)
    for (const auto& d : report.warnings) err << file << ":" << d.str() << "\n";
  if (!report.ok()) return std::nullopt;
  return std::move(out.doc);
}

std::optional<Loaded> load_compiled(const std::string& file, bool lax, const std::optional<std::string>& lang,
                                    std::ostream& err) {
  auto doc = load_valid(file, lax, err, false);
  if (!doc) return std::nullopt;
  Loaded l{resolve_language(*doc, lang), {}};
  for (const auto& w : l.view.warnings) err << "warning: " << w << "\n";
  l.compiled = ir::lower(l.view);
  return l;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  f.close();
  if (!f) throw Error("cannot write " + path);
}

/// Defaults, then a session file, then each `sym=value` override in order.
rt::Valuation build_valuation(const ir::ComputeIR& ir, const std::string& session_file,
                              const std::vector<std::string>& sets, std::ostream& err) {
  rt::Valuation v = rt::default_valuation(ir);
  if (!session_file.empty()) {
    std::ifstream in(session_file, std::ios::binary);
    if (!in) throw UsageError("cannot read session file " + session_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    render::LoadedSession s;
    try {
      s = render::load_session(ss.str(), ir);
    } catch (const Error& e) {
      throw UsageError(session_file + ": " + e.what());
    }
    for (const auto& w : s.warnings) err << "warning: " << w << "\n";
    v = std::move(s.valuation);
  }
  for (const auto& assignment : sets) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects sym=value, got '" + assignment + "'");
    std::string sym = assignment.substr(0, eq);
    std::string text = assignment.substr(eq + 1);
    sym.erase(sym.find_last_not_of(" \t") + 1);
    sym.erase(0, sym.find_first_not_of(" \t"));
    const ir::ParamDecl* p = ir.param(sym);
    if (!p) throw UsageError("unknown parameter '" + sym + "'");
    rt::ParamValue value;
    if (p->kind == ir::ParamKind::matrix) {
      try {
        value = parse_matrix(text);
      } catch (const Error& e) {
        throw UsageError("bad matrix for '" + sym + "': " + e.what());
      }
    } else if (auto d = parse_real(text)) {
      value = *d;
    } else {
      throw UsageError("bad value for '" + sym + "': '" + text + "'");
    }
    try {
      if (auto w = rt::set_param(ir, v, sym, value)) err << "warning: " << *w << "\n";
    } catch (const rt::RunError& e) {
      throw UsageError(e.what());
    }
  }
  rt::project_points(ir, v);
  return v;
}

void report_failure(const rt::RunResult& r, std::ostream& err) {
  if (r.ok()) return;
  err << "error: " << *r.diagnostics.error;
  if (r.diagnostics.error_code) err << " [" << *r.diagnostics.error_code << "]";
  err << "\n";
}

int serve(const service::ServerConfig& cfg, std::ostream& out, std::ostream& err) {
  auto registry = std::make_shared<service::Registry>(cfg.simulations);
  for (const auto& p : registry->problems()) err << "skipped " << p << "\n";
  service::ServiceOptions opts;
  opts.session_ttl = cfg.session_ttl;
  opts.static_dir = cfg.static_dir;
  service::Service svc(registry, opts);
  service::HttpServer server(svc);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigset_t old;
  pthread_sigmask(SIG_BLOCK, &set, &old);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  bool listened = server.listen(cfg.host, cfg.port, [&](int port) {
    out << "serving " << registry->entries().size() << " simulations on http://" << cfg.host << ":" << port << "\n";
    out.flush();
  });
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_SETMASK, &old, nullptr);
  if (!listened) {
    err << "error: cannot listen on " << cfg.host << ":" << cfg.port << "\n";
    return failed;
  }
  return ok;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Declarative simulation toolchain", "simml"};
  app.require_subcommand(0, 1);

  std::string serve_dir;
  app.add_option("--serve", serve_dir, "Serve a directory of simulations (same as the serve subcommand)");

  std::string file, lang, output, out_dir = ".", out_format = "json", session_file, dir;
  std::vector<std::string> sets;
  bool lax = false;
  int window = 0;
  std::string config_file, listen, static_dir;
  long long ttl = 0;

  auto add_doc = [&](CLI::App* sub) {
    sub->add_option("file", file, "Simulation document")->required();
    sub->add_flag("--lax", lax, "Report unknown elements and attributes as warnings");
  };

  auto* validate_cmd = app.add_subcommand("validate", "Check a document and print its diagnostics");
  add_doc(validate_cmd);

  auto* compile_cmd = app.add_subcommand("compile", "Write compute.json, ui.json and the script");
  add_doc(compile_cmd);
  compile_cmd->add_option("--lang", lang, "Language tag");
  compile_cmd->add_option("-o,--output", out_dir, "Output directory (default .)");

  auto* run_cmd = app.add_subcommand("run", "Run with default values plus overrides");
  add_doc(run_cmd);
  run_cmd->add_option("--lang", lang, "Language tag");
  run_cmd->add_option("--set", sets, "sym=value override (repeatable)");
  run_cmd->add_option("--session", session_file, "Session file applied before --set");
  run_cmd->add_option("--out", out_format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  run_cmd->add_option("-o,--output", output, "Output file (default stdout)");

  auto* render_cmd = app.add_subcommand("render", "Render one display window of the default run as SVG");
  add_doc(render_cmd);
  render_cmd->add_option("--lang", lang, "Language tag");
  render_cmd->add_option("--set", sets, "sym=value override (repeatable)");
  render_cmd->add_option("--session", session_file, "Session file applied before --set");
  render_cmd->add_option("--window", window, "Window index")->check(CLI::NonNegativeNumber);
  render_cmd->add_option("-o,--output", output, "Output file (default stdout)");

  auto* publish_cmd = app.add_subcommand("publish", "Write the static HTML site for a directory");
  publish_cmd->add_option("dir", dir, "Simulations directory")->required();
  publish_cmd->add_option("-o,--output", output, "Site directory")->required();
  publish_cmd->add_flag("--lax", lax, "Report unknown elements and attributes as warnings");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  serve_cmd->add_option("dir", dir, "Simulations directory");
  serve_cmd->add_option("--config", config_file, "JSON configuration file");
  serve_cmd->add_option("--listen", listen, "host:port");
  serve_cmd->add_option("--ttl", ttl, "Session lifetime in seconds")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--static", static_dir, "Directory served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }

  try {
    if (*validate_cmd) {
      auto doc = load_valid(file, lax, out, true);
      if (!doc) {
        out << file << ": invalid\n";
        return invalid;
      }
      out << file << ": ok\n";
      return ok;
    }

    if (*compile_cmd) {
      auto l = load_compiled(file, lax, lang.empty() ? std::nullopt : std::optional(lang), err);
      if (!l) return invalid;
      std::filesystem::path dir_path(out_dir);
      std::filesystem::create_directories(dir_path);
      const std::string stem = std::filesystem::path(file).stem().string();
      write_text((dir_path / "compute.json").string(), ir::emit_compute(l->compiled.compute), out);
      write_text((dir_path / "ui.json").string(), ir::emit_ui(l->compiled.ui), out);
      write_text((dir_path / (stem + ".sce")).string(), ir::emit_script(l->compiled.compute, l->view.doc.display), out);
      return ok;
    }

    if (*run_cmd || *render_cmd) {
      auto l = load_compiled(file, lax, lang.empty() ? std::nullopt : std::optional(lang), err);
      if (!l) return invalid;
      const ir::ComputeIR& ir = l->compiled.compute;
      rt::Valuation v = build_valuation(ir, session_file, sets, err);
      rt::RunResult r = rt::run(ir, v);
      for (const auto& w : r.diagnostics.warnings) err << "warning: " << w << "\n";
      report_failure(r, err);
      if (*run_cmd) {
        write_text(output, out_format == "csv" ? rt::to_csv(r, ir) : rt::to_json(r) + "\n", out);
        return r.ok() ? ok : failed;
      }
      render::PlotModel model;
      try {
        model = render::build_plot_model(l->view.doc.display, ir, r);
      } catch (const render::RenderError& e) {
        err << "error: " << e.what() << "\n";
        return failed;
      }
      if (static_cast<std::size_t>(window) >= model.windows.size()) {
        err << "error: the document has " << model.windows.size() << " display window(s)\n";
        return usage;
      }
      write_text(output, render::render_svg(model.windows[window]), out);
      return r.ok() ? ok : failed;
    }

    if (*publish_cmd) {
      service::Registry registry(dir, ParseOptions{lax});
      for (const auto& p : registry.problems()) err << "skipped " << p << "\n";
      auto files = service::publish_static(registry, output);
      out << "wrote " << files.size() << " files to " << output << "\n";
      return registry.problems().empty() ? ok : invalid;
    }

    if (*serve_cmd || !serve_dir.empty()) {
      service::ServerConfig cfg;
      if (!config_file.empty()) {
        std::ifstream in(config_file, std::ios::binary);
        if (!in) throw UsageError("cannot read configuration " + config_file);
        std::ostringstream ss;
        ss << in.rdbuf();
        cfg = service::parse_config(ss.str(), cfg);
      }
      cfg = service::apply_env(cfg);
      if (!serve_dir.empty()) cfg.simulations = serve_dir;
      if (!dir.empty()) cfg.simulations = dir;
      if (!listen.empty()) cfg = service::parse_config(nlohmann::json{{"listen", listen}}.dump(), cfg);
      if (ttl > 0) cfg.session_ttl = std::chrono::seconds(ttl);
      if (!static_dir.empty()) cfg.static_dir = static_dir;
      if (!std::filesystem::is_directory(cfg.simulations))
        throw UsageError("not a directory: " + cfg.simulations.string());
      return serve(cfg, out, err);
    }

    err << app.help();
    return usage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return failed;
  }
}

}  // namespace simml::cli
