#include "simml/service.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "simml/xml.hpp"

namespace simml::service {

using nlohmann::json;

// Registry ---------------------------------------------------------------

Registry::Registry(const std::filesystem::path& dir, const ParseOptions& options) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (std::filesystem::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && it->path().extension() == ".xml") files.push_back(it->path());
  }
  if (ec) throw Error("cannot read simulations directory " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    ParseOutcome out = load_document(f.string(), options);
    if (!out.ok()) {
      problems_.push_back(f.filename().string() + ": " + (out.errors.empty() ? "unreadable" : out.errors.front().str()));
      continue;
    }
    ValidationReport report = validate(*out.doc);
    if (!report.ok()) {
      problems_.push_back(f.filename().string() + ": " + report.errors.front().str());
      continue;
    }
    std::string id = out.doc->id;
    std::set<std::string> langs = out.doc->languages();
    docs_[id] = RegistryEntry{id, f, std::move(*out.doc), std::move(langs)};
  }
}

void Registry::add(SimulationDoc doc, std::filesystem::path path) {
  ValidationReport report = validate(doc);
  if (!report.ok()) throw Error("document '" + doc.id + "' does not validate: " + report.errors.front().str());
  std::string id = doc.id;
  std::set<std::string> langs = doc.languages();
  std::lock_guard lock(cache_mutex_);
  for (auto it = cache_.begin(); it != cache_.end();) {
    it = it->first.first == id ? cache_.erase(it) : std::next(it);
  }
  docs_[id] = RegistryEntry{id, std::move(path), std::move(doc), std::move(langs)};
}

const RegistryEntry* Registry::find(const std::string& doc_id) const {
  auto it = docs_.find(doc_id);
  return it == docs_.end() ? nullptr : &it->second;
}

std::vector<const RegistryEntry*> Registry::entries() const {
  std::vector<const RegistryEntry*> out;
  for (const auto& [id, e] : docs_) out.push_back(&e);
  return out;
}

std::shared_ptr<const CompiledDoc> Registry::compiled(const std::string& doc_id, const std::string& language) const {
  const RegistryEntry* e = find(doc_id);
  if (!e) throw Error("unknown simulation '" + doc_id + "'");
  std::lock_guard lock(cache_mutex_);
  auto key = std::make_pair(doc_id, language);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  auto c = std::make_shared<CompiledDoc>();
  c->view = resolve_language(e->doc, language.empty() ? std::nullopt : std::optional<std::string>(language));
  c->ir = ir::lower(c->view);
  cache_[key] = c;
  return c;
}

// Sessions ---------------------------------------------------------------

std::string new_session_id() {
  std::random_device rd;
  static const char* hex = "0123456789abcdef";
  std::string id;
  for (int i = 0; i < 4; ++i) {
    std::uint32_t word = rd();
    for (int k = 0; k < 8; ++k) id += hex[(word >> (28 - 4 * k)) & 0xF];
  }
  return id;
}

struct Service::Session {
  std::mutex mutex;
  std::string id;
  std::string doc_id;
  std::string language;
  std::shared_ptr<const CompiledDoc> compiled;
  rt::Valuation valuation;
  rt::RunResult result;
  std::uint64_t runs = 0;
  std::chrono::steady_clock::time_point last_activity;  // guarded by sessions_mutex_

  void rerun(const rt::SolverConfig& cfg) {
    result = rt::run(compiled->ir.compute, valuation, cfg);
    ++runs;
  }
};

namespace {

Response json_response(int status, const json& body) {
  return Response{status, "application/json", body.dump()};
}

Response error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", message}});
}

json valuation_json(const rt::Valuation& v) {
  json out = json::object();
  for (const auto& [sym, val] : v) {
    if (const double* d = std::get_if<double>(&val)) {
      out[sym] = *d;
    } else {
      const Matrix& m = std::get<Matrix>(val);
      json rows = json::array();
      for (std::size_t i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m.at(i, j));
        rows.push_back(row);
      }
      out[sym] = rows;
    }
  }
  return out;
}

/// Numbers, numeric strings, "[a b; c d]" strings and nested arrays.
rt::ParamValue value_from_json(const ir::ParamDecl& p, const json& j) {
  const bool matrix = p.kind == ir::ParamKind::matrix;
  if (j.is_number()) {
    if (matrix) throw Error("parameter '" + p.symbol + "' expects a matrix");
    return j.get<double>();
  }
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (matrix) return parse_matrix(s);
    if (auto d = parse_real(s)) return *d;
    throw Error("malformed value for '" + p.symbol + "'");
  }
  if (j.is_array() && matrix) {
    Matrix m;
    m.rows = j.size();
    for (const auto& row : j) {
      if (!row.is_array()) throw Error("malformed matrix for '" + p.symbol + "'");
      if (m.cols == 0 && m.data.empty()) m.cols = row.size();
      if (row.size() != m.cols) throw Error("ragged matrix for '" + p.symbol + "'");
      for (const auto& x : row) {
        if (!x.is_number()) throw Error("malformed matrix for '" + p.symbol + "'");
        m.data.push_back(x.get<double>());
      }
    }
    if (m.rows == 0 || m.cols == 0) throw Error("empty matrix for '" + p.symbol + "'");
    return m;
  }
  throw Error("malformed value for '" + p.symbol + "'");
}

std::optional<json> parse_object(const std::string& body, bool allow_empty) {
  if (allow_empty && body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string content_type_for(const std::filesystem::path& p) {
  static const std::map<std::string, std::string> types = {
      {".html", "text/html; charset=utf-8"}, {".js", "text/javascript"}, {".css", "text/css"},
      {".svg", "image/svg+xml"},             {".json", "application/json"}, {".png", "image/png"},
      {".txt", "text/plain; charset=utf-8"}, {".ico", "image/x-icon"}};
  auto it = types.find(p.extension().string());
  return it == types.end() ? "application/octet-stream" : it->second;
}

bool editable(const ir::ParamDecl& p) { return p.visibility == Visibility::editable; }

}  // namespace

Service::Service(std::shared_ptr<const Registry> registry, ServiceOptions options, Clock clock)
    : registry_(std::move(registry)), options_(std::move(options)), clock_(std::move(clock)) {
  if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
}

Service::~Service() = default;

void Service::sweep() {
  const auto now = clock_();
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->last_activity >= options_.session_ttl) {
      expired_.insert(it->first);
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

std::size_t Service::session_count() {
  std::lock_guard lock(sessions_mutex_);
  sweep();
  return sessions_.size();
}

std::shared_ptr<Service::Session> Service::acquire(const std::string& sid, Response& error) {
  std::lock_guard lock(sessions_mutex_);
  sweep();
  auto it = sessions_.find(sid);
  if (it == sessions_.end()) {
    error = expired_.count(sid) ? error_response(410, "session expired") : error_response(404, "unknown session");
    return nullptr;
  }
  it->second->last_activity = clock_();
  return it->second;
}

Response Service::dispatch(const Request& request) {
  if (request.body.size() > options_.max_body) return error_response(413, "request body too large");
  try {
    return route(request);
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

Response Service::route(const Request& req) {
  const auto parts = split_path(req.path);
  if (parts.empty() || parts[0] != "api") {
    if (req.method == "GET" && options_.static_dir) return serve_static(req.path);
    return error_response(404, "not found");
  }
  if (parts.size() == 2 && parts[1] == "simulations") {
    if (req.method != "GET") return error_response(405, "method not allowed");
    return list_simulations();
  }
  if (parts.size() == 4 && parts[1] == "simulations" && parts[3] == "sessions") {
    if (req.method != "POST") return error_response(405, "method not allowed");
    return create_session(parts[2], req.body);
  }
  if (parts.size() >= 3 && parts[1] == "sessions") {
    std::string rest;
    for (std::size_t i = 3; i < parts.size(); ++i) rest += (i > 3 ? "/" : "") + parts[i];
    return session_route(req, parts[2], rest);
  }
  return error_response(404, "not found");
}

Response Service::list_simulations() {
  json list = json::array();
  for (const RegistryEntry* e : registry_->entries()) {
    list.push_back({{"doc_id", e->doc_id},
                    {"title", e->doc.header.title.text()},
                    {"keywords", e->doc.header.keywords},
                    {"languages", e->languages}});
  }
  return json_response(200, list);
}

Response Service::create_session(const std::string& doc_id, const std::string& body) {
  if (!registry_->find(doc_id)) return error_response(404, "unknown simulation '" + doc_id + "'");
  auto req = parse_object(body, true);
  if (!req) return error_response(400, "malformed request body");
  std::string language;
  if (req->contains("language")) {
    if (!(*req)["language"].is_string()) return error_response(400, "language must be a string");
    language = (*req)["language"].get<std::string>();
  }
  auto s = std::make_shared<Session>();
  s->id = new_session_id();
  s->doc_id = doc_id;
  s->language = language;
  s->compiled = registry_->compiled(doc_id, language);
  s->valuation = rt::default_valuation(s->compiled->ir.compute);
  rt::project_points(s->compiled->ir.compute, s->valuation);
  s->rerun(options_.solver);
  s->last_activity = clock_();
  json out{{"session_id", s->id},
           {"doc_id", doc_id},
           {"language", language},
           {"run", s->runs},
           {"ui_form", json::parse(ir::emit_ui(s->compiled->ir.ui))},
           {"result", json::parse(rt::to_json(s->result))},
           {"warnings", s->compiled->view.warnings}};
  {
    std::lock_guard lock(sessions_mutex_);
    sessions_[s->id] = s;
  }
  return json_response(201, out);
}

Response Service::session_route(const Request& req, const std::string& sid, const std::string& rest) {
  Response err;
  auto s = acquire(sid, err);
  if (!s) return err;
  std::lock_guard lock(s->mutex);
  const ir::ComputeIR& ir = s->compiled->ir.compute;
  const std::string& m = req.method;

  auto run_response = [&](std::vector<std::string> warnings, json extra = json::object()) {
    s->rerun(options_.solver);
    json out{{"session_id", s->id},
             {"run", s->runs},
             {"result", json::parse(rt::to_json(s->result))},
             {"warnings", std::move(warnings)}};
    out.update(extra);
    return json_response(200, out);
  };

  if (rest.empty()) {
    if (m == "DELETE") {
      std::lock_guard map_lock(sessions_mutex_);
      sessions_.erase(sid);
      return Response{204, "", ""};
    }
    if (m == "GET") {
      return json_response(200, json{{"session_id", s->id},
                                     {"doc_id", s->doc_id},
                                     {"language", s->language},
                                     {"run", s->runs},
                                     {"valuation", valuation_json(s->valuation)},
                                     {"result", json::parse(rt::to_json(s->result))}});
    }
    return error_response(405, "method not allowed");
  }

  if (rest == "params") {
    if (m != "PATCH") return error_response(405, "method not allowed");
    auto body = parse_object(req.body, false);
    if (!body) return error_response(400, "malformed request body");
    rt::Valuation next = s->valuation;
    std::vector<std::string> warnings;
    bool moved_point = false;
    for (const auto& [sym, value] : body->items()) {
      const ir::ParamDecl* p = ir.param(sym);
      if (!p) return error_response(400, "unknown parameter '" + sym + "'");
      if (!editable(*p)) return error_response(400, "parameter '" + sym + "' is not editable");
      try {
        if (auto w = rt::set_param(ir, next, sym, value_from_json(*p, value))) warnings.push_back(*w);
      } catch (const Error& e) {
        return error_response(400, e.what());
      }
      for (const auto& pt : ir.points) moved_point |= pt.x_symbol == sym || pt.y_symbol == sym;
    }
    if (moved_point) rt::project_points(ir, next);
    s->valuation = std::move(next);
    return run_response(std::move(warnings));
  }

  if (rest.rfind("point/", 0) == 0) {
    if (m != "POST") return error_response(405, "method not allowed");
    const std::string label = rest.substr(6);
    auto pt = std::find_if(ir.points.begin(), ir.points.end(), [&](const auto& d) { return d.label == label; });
    if (pt == ir.points.end()) return error_response(404, "unknown point '" + label + "'");
    auto body = parse_object(req.body, false);
    if (!body || !(*body)["x"].is_number() || !(*body)["y"].is_number())
      return error_response(400, "expected {\"x\": number, \"y\": number}");
    rt::Valuation next = s->valuation;
    std::vector<std::string> warnings;
    try {
      if (auto w = rt::set_param(ir, next, pt->x_symbol, (*body)["x"].get<double>())) warnings.push_back(*w);
      if (auto w = rt::set_param(ir, next, pt->y_symbol, (*body)["y"].get<double>())) warnings.push_back(*w);
    } catch (const Error& e) {
      return error_response(400, e.what());
    }
    rt::project_points(ir, next);
    s->valuation = std::move(next);
    json point{{"label", label},
               {"x", std::get<double>(s->valuation.at(pt->x_symbol))},
               {"y", std::get<double>(s->valuation.at(pt->y_symbol))}};
    return run_response(std::move(warnings), json{{"point", point}});
  }

  if (rest.rfind("plot/", 0) == 0) {
    if (m != "GET") return error_response(405, "method not allowed");
    std::string name = rest.substr(5);
    if (name.size() < 5 || name.substr(name.size() - 4) != ".svg") return error_response(404, "not found");
    name.resize(name.size() - 4);
    std::size_t index = 0;
    auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), index);
    if (ec != std::errc() || ptr != name.data() + name.size()) return error_response(404, "not found");
    render::PlotModel model;
    try {
      model = render::build_plot_model(s->compiled->view.doc.display, ir, s->result);
    } catch (const render::RenderError& e) {
      return error_response(409, e.what());
    }
    if (index >= model.windows.size()) return error_response(404, "no window " + name);
    return Response{200, "image/svg+xml", render::render_svg(model.windows[index])};
  }

  if (rest == "export.csv") {
    if (m != "GET") return error_response(405, "method not allowed");
    return Response{200, "text/csv; charset=utf-8", rt::to_csv(s->result, ir)};
  }

  if (rest == "session-file") {
    if (m == "GET") return Response{200, "text/plain; charset=utf-8", render::save_session(ir, s->valuation)};
    if (m != "PUT") return error_response(405, "method not allowed");
    render::LoadedSession loaded;
    try {
      loaded = render::load_session(req.body, ir);
    } catch (const Error& e) {
      return error_response(400, e.what());
    }
    rt::project_points(ir, loaded.valuation);
    s->valuation = std::move(loaded.valuation);
    return run_response(std::move(loaded.warnings), json{{"valuation", valuation_json(s->valuation)}});
  }

  if (rest == "language") {
    if (m != "POST") return error_response(405, "method not allowed");
    auto body = parse_object(req.body, false);
    if (!body) return error_response(400, "malformed request body");
    json lang = body->contains("lang") ? (*body)["lang"] : body->value("language", json());
    if (!lang.is_string()) return error_response(400, "expected {\"lang\": string}");
    s->language = lang.get<std::string>();
    s->compiled = registry_->compiled(s->doc_id, s->language);
    return json_response(200, json{{"session_id", s->id},
                                   {"run", s->runs},
                                   {"language", s->language},
                                   {"ui_form", json::parse(ir::emit_ui(s->compiled->ir.ui))},
                                   {"warnings", s->compiled->view.warnings}});
  }

  return error_response(404, "not found");
}

Response Service::serve_static(const std::string& path) {
  std::filesystem::path rel;
  for (const auto& part : split_path(path)) {
    if (part == ".." || part == ".") return error_response(404, "not found");
    rel /= part;
  }
  std::filesystem::path full = *options_.static_dir / rel;
  std::error_code ec;
  if (std::filesystem::is_directory(full, ec)) full /= "index.html";
  std::ifstream in(full, std::ios::binary);
  if (!in) return error_response(404, "not found");
  std::ostringstream ss;
  ss << in.rdbuf();
  return Response{200, content_type_for(full), ss.str()};
}

// Configuration ----------------------------------------------------------

namespace {

void set_listen(ServerConfig& cfg, const std::string& listen) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw Error("listen address must be host:port, got '" + listen + "'");
  int port = 0;
  const std::string p = listen.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
  if (ec != std::errc() || ptr != p.data() + p.size() || port < 0 || port > 65535)
    throw Error("bad port in listen address '" + listen + "'");
  cfg.host = listen.substr(0, colon);
  cfg.port = port;
}

std::chrono::seconds parse_ttl(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v <= 0) throw Error("session TTL must be a positive integer");
  return std::chrono::seconds(v);
}

}  // namespace

ServerConfig parse_config(const std::string& json_text, ServerConfig cfg) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "listen" && value.is_string()) {
      set_listen(cfg, value.get<std::string>());
    } else if (key == "simulations" && value.is_string()) {
      cfg.simulations = value.get<std::string>();
    } else if (key == "session_ttl" && value.is_number_integer() && value.get<long long>() > 0) {
      cfg.session_ttl = std::chrono::seconds(value.get<long long>());
    } else if (key == "static" && value.is_string()) {
      cfg.static_dir = value.get<std::string>();
    } else {
      throw Error("bad configuration key '" + key + "'");
    }
  }
  return cfg;
}

ServerConfig apply_env(ServerConfig cfg, const std::function<const char*(const char*)>& getenv) {
  auto get = getenv ? getenv : [](const char* k) -> const char* { return std::getenv(k); };
  if (const char* v = get("SIMML_LISTEN")) set_listen(cfg, v);
  if (const char* v = get("SIMML_SIMULATIONS")) cfg.simulations = v;
  if (const char* v = get("SIMML_SESSION_TTL")) cfg.session_ttl = parse_ttl(v);
  if (const char* v = get("SIMML_STATIC")) cfg.static_dir = std::filesystem::path(v);
  return cfg;
}

}  // namespace simml::service
