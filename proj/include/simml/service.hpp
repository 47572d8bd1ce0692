#pragma once

// Simulation registry, HTTP session API and the static site publisher.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "simml/compiler.hpp"
#include "simml/render.hpp"
#include "simml/runtime.hpp"

namespace simml::service {

/// A document localized to one language and compiled. Immutable once built.
struct CompiledDoc {
  LocalizedView view;
  ir::Compiled ir;
};

struct RegistryEntry {
  std::string doc_id;
  std::filesystem::path path;
  SimulationDoc doc;
  std::set<std::string> languages;
};

/// Documents served by one process. Read-only after loading, except the
/// compile cache, which is keyed by (doc_id, language).
class Registry {
 public:
  Registry() = default;
  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  /// Loads every *.xml under dir. Documents with parse or validation errors
  /// are skipped and described in problems().
  explicit Registry(const std::filesystem::path& dir, const ParseOptions& options = {});

  /// Throws Error when the document does not validate.
  void add(SimulationDoc doc, std::filesystem::path path = {});

  const RegistryEntry* find(const std::string& doc_id) const;
  /// Sorted by doc_id.
  std::vector<const RegistryEntry*> entries() const;
  const std::vector<std::string>& problems() const { return problems_; }

  /// Throws Error on an unknown document.
  std::shared_ptr<const CompiledDoc> compiled(const std::string& doc_id, const std::string& language) const;

 private:
  std::map<std::string, RegistryEntry> docs_;
  std::vector<std::string> problems_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<std::string, std::string>, std::shared_ptr<const CompiledDoc>> cache_;
};

struct Request {
  std::string method;
  std::string path;  // without query string
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

using Clock = std::function<std::chrono::steady_clock::time_point()>;

struct ServiceOptions {
  std::chrono::seconds session_ttl{30 * 60};
  std::size_t max_body = 1 << 20;
  rt::SolverConfig solver;
  std::optional<std::filesystem::path> static_dir;  // served for non-API GETs
};

class Service {
 public:
  explicit Service(std::shared_ptr<const Registry> registry, ServiceOptions options = {}, Clock clock = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Thread-safe. Handles one request end to end.
  Response dispatch(const Request& request);

  /// Live (non-expired) sessions.
  std::size_t session_count();
  const ServiceOptions& options() const { return options_; }

 private:
  struct Session;
  std::shared_ptr<Session> acquire(const std::string& sid, Response& error);
  void sweep();
  Response route(const Request& request);
  Response list_simulations();
  Response create_session(const std::string& doc_id, const std::string& body);
  Response session_route(const Request& request, const std::string& sid, const std::string& rest);
  Response serve_static(const std::string& path);

  std::shared_ptr<const Registry> registry_;
  ServiceOptions options_;
  Clock clock_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::set<std::string> expired_;
};

/// 32 lowercase hex digits from the system entropy source.
std::string new_session_id();

// Configuration ----------------------------------------------------------

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path simulations = "simulations";
  std::chrono::seconds session_ttl{30 * 60};
  std::optional<std::filesystem::path> static_dir;
};

/// JSON object with optional keys "listen" ("host:port"), "simulations",
/// "session_ttl" (seconds) and "static". Throws Error on malformed input.
ServerConfig parse_config(const std::string& json_text, ServerConfig base = {});
/// SIMML_LISTEN, SIMML_SIMULATIONS, SIMML_SESSION_TTL and SIMML_STATIC
/// override the corresponding keys. The getter defaults to std::getenv.
ServerConfig apply_env(ServerConfig cfg, const std::function<const char*(const char*)>& getenv = {});

/// Blocking HTTP server over dispatch(). The ready callback receives the
/// bound port (useful with port 0).
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  /// Returns false when the address cannot be bound.
  bool listen(const std::string& host, int port, const std::function<void(int)>& ready = {});
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Static publication ------------------------------------------------------

/// Writes index.html, simulations/<doc>.html and simulations/<doc>.svg.
/// Returns the written paths relative to out_dir, sorted. Throws Error on
/// I/O failure.
std::vector<std::string> publish_static(const Registry& registry, const std::filesystem::path& out_dir,
                                        const rt::SolverConfig& cfg = {});

}  // namespace simml::service
