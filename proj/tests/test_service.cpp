#include <atomic>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "doctest.h"
#include "simml/service.hpp"
#include "simml/xml.hpp"

using namespace simml;
using namespace simml::service;
using nlohmann::json;

namespace {

std::shared_ptr<Registry> corpus() {
  static auto reg = std::make_shared<Registry>(std::filesystem::path(SIMML_CORPUS_DIR));
  return reg;
}

struct FakeClock {
  std::shared_ptr<std::chrono::steady_clock::time_point> now =
      std::make_shared<std::chrono::steady_clock::time_point>(std::chrono::steady_clock::time_point{});
  Clock clock() const {
    auto n = now;
    return [n] { return *n; };
  }
  void advance(std::chrono::seconds s) { *now += s; }
};

json body(const Response& r) { return json::parse(r.body); }

std::string create(Service& svc, const std::string& doc, const std::string& req = "") {
  Response r = svc.dispatch({"POST", "/api/simulations/" + doc + "/sessions", req});
  REQUIRE(r.status == 201);
  return body(r)["session_id"].get<std::string>();
}

std::vector<double> series_y(const json& result, const std::string& sym) {
  return result["series"][sym]["y"].get<std::vector<double>>();
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("simml_" + name + "_" + new_session_id().substr(0, 8));
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("registry loads the corpus with zero validation errors") {
  auto reg = corpus();
  CHECK(reg->problems().empty());
  CHECK(reg->entries().size() == 8);
  for (const RegistryEntry* e : reg->entries()) CHECK(validate(e->doc).ok());
  const RegistryEntry* p = reg->find("pendulum");
  REQUIRE(p);
  CHECK(p->languages.count("french") == 1);
  CHECK(reg->find("nope") == nullptr);
}

TEST_CASE("registry skips documents that fail to parse or validate") {
  auto dir = temp_dir("reg");
  std::filesystem::copy_file(std::filesystem::path(SIMML_CORPUS_DIR) / "pendulum.xml", dir / "pendulum.xml");
  std::ofstream(dir / "broken.xml") << "<simulation><header>";
  std::ofstream(dir / "notes.txt") << "ignored";
  Registry reg(dir);
  CHECK(reg.entries().size() == 1);
  REQUIRE(reg.problems().size() == 1);
  CHECK(reg.problems()[0].rfind("broken.xml:", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("compile cache is keyed by document and language") {
  auto reg = corpus();
  auto a = reg->compiled("pendulum", "");
  auto b = reg->compiled("pendulum", "");
  auto f = reg->compiled("pendulum", "french");
  CHECK(a.get() == b.get());
  CHECK(a.get() != f.get());
  CHECK(f->ir.ui.language == "french");
  CHECK_THROWS_AS(reg->compiled("nope", ""), Error);
}

TEST_CASE("session ids carry 128 bits and do not repeat") {
  std::set<std::string> ids;
  for (int i = 0; i < 1000; ++i) {
    std::string id = new_session_id();
    CHECK(id.size() == 32);
    CHECK(id.find_first_not_of("0123456789abcdef") == std::string::npos);
    ids.insert(id);
  }
  CHECK(ids.size() == 1000);
}

TEST_CASE("list simulations") {
  Service svc(corpus());
  Response r = svc.dispatch({"GET", "/api/simulations", ""});
  CHECK(r.status == 200);
  json list = body(r);
  REQUIRE(list.size() == 8);
  json pendulum;
  for (const auto& e : list) {
    if (e["doc_id"] == "pendulum") pendulum = e;
  }
  CHECK(pendulum["title"] == "Simple pendulum");
  CHECK(pendulum["keywords"] == json({"Mechanics", "ODE"}));
  CHECK(pendulum["languages"] == json({"french"}));
}

TEST_CASE("create session runs the defaults") {
  Service svc(corpus());
  Response r = svc.dispatch({"POST", "/api/simulations/pendulum/sessions", ""});
  REQUIRE(r.status == 201);
  json b = body(r);
  CHECK(b["session_id"].get<std::string>().size() == 32);
  CHECK(b["run"] == 1);
  bool found = false;
  for (const auto& page : b["ui_form"]["pages"]) found |= page["title"] == "Resolution parameters";
  CHECK(found);
  CHECK(series_y(b["result"], "theta").size() == 200);
  CHECK(b["result"]["series"]["theta"]["y"][0] == 2.0);

  // Same as a direct run of the compiled plan.
  auto c = corpus()->compiled("pendulum", "");
  rt::Valuation v = rt::default_valuation(c->ir.compute);
  rt::project_points(c->ir.compute, v);
  CHECK(b["result"] == json::parse(rt::to_json(rt::run(c->ir.compute, v))));

  CHECK(svc.dispatch({"POST", "/api/simulations/nope/sessions", ""}).status == 404);
  CHECK(svc.dispatch({"POST", "/api/simulations/pendulum/sessions", "{bad"}).status == 400);
  CHECK(svc.dispatch({"POST", "/api/simulations/pendulum/sessions", "{\"language\": 3}"}).status == 400);
  CHECK(svc.dispatch({"GET", "/api/simulations/pendulum/sessions", ""}).status == 405);
}

TEST_CASE("create session in another language") {
  Service svc(corpus());
  Response r = svc.dispatch({"POST", "/api/simulations/pendulum/sessions", "{\"language\": \"french\"}"});
  REQUIRE(r.status == 201);
  json b = body(r);
  CHECK(b["ui_form"]["language"] == "french");
  CHECK(b["ui_form"]["title"] == "Pendule simple");
  CHECK(b["warnings"].empty());

  json de = body(svc.dispatch({"POST", "/api/simulations/pendulum/sessions", "{\"language\": \"german\"}"}));
  CHECK(!de["warnings"].empty());
  CHECK(de["ui_form"]["title"] == "Simple pendulum");
}

TEST_CASE("PATCH theta_0 re-runs with the new value") {
  Service svc(corpus());
  Response first = svc.dispatch({"POST", "/api/simulations/pendulum/sessions", ""});
  json f = body(first);
  const std::string sid = f["session_id"];
  Response r = svc.dispatch({"PATCH", "/api/sessions/" + sid + "/params", "{\"theta_0\": 1.0}"});
  REQUIRE(r.status == 200);
  json b = body(r);
  CHECK(b["run"] == 2);
  auto before = series_y(f["result"], "theta");
  auto after = series_y(b["result"], "theta");
  CHECK(max_abs_diff(before, after) > 0);
  CHECK(after[0] == 1.0);

  // Oracle: two independent integrations with different initial angles.
  auto c = corpus()->compiled("pendulum", "");
  rt::Valuation v = rt::default_valuation(c->ir.compute);
  rt::project_points(c->ir.compute, v);
  auto r2 = rt::run(c->ir.compute, v);
  rt::set_param(c->ir.compute, v, "theta_0", 1.0);
  auto r1 = rt::run(c->ir.compute, v);
  CHECK(after == r1.series.at("theta").y);
  CHECK(before == r2.series.at("theta").y);
}

TEST_CASE("PATCH clamps, validates and rejects atomically") {
  Service svc(corpus());
  const std::string sid = create(svc, "pendulum");
  const std::string url = "/api/sessions/" + sid + "/params";

  json b = body(svc.dispatch({"PATCH", url, "{\"tf\": 50}"}));
  REQUIRE(b["warnings"].size() == 1);
  CHECK(b["result"]["series"]["theta"]["x"].back() == 10.0);

  auto state = [&] { return body(svc.dispatch({"GET", "/api/sessions/" + sid, ""})); };
  json s0 = state();
  CHECK(s0["valuation"]["tf"] == 10.0);
  CHECK(svc.dispatch({"PATCH", url, "{\"L\": 2, \"nope\": 1}"}).status == 400);
  CHECK(svc.dispatch({"PATCH", url, "{\"L\": \"abc\"}"}).status == 400);
  CHECK(svc.dispatch({"PATCH", url, "{\"L\": true}"}).status == 400);
  CHECK(svc.dispatch({"PATCH", url, "[1, 2]"}).status == 400);
  CHECK(svc.dispatch({"PATCH", url, "not json"}).status == 400);
  json s1 = state();
  CHECK(s1["valuation"] == s0["valuation"]);
  CHECK(s1["run"] == s0["run"]);

  // Numeric strings are accepted.
  CHECK(body(svc.dispatch({"PATCH", url, "{\"L\": \"2.5\"}"}))["run"] == 3);
  CHECK(state()["valuation"]["L"] == 2.5);
}

TEST_CASE("PATCH on matrix and hidden parameters") {
  Service svc(corpus());
  const std::string sid = create(svc, "regression");
  const std::string url = "/api/sessions/" + sid + "/params";
  Response r = svc.dispatch({"PATCH", url, "{\"data\": [[0, 1], [1, 3], [2, 5]]}"});
  REQUIRE(r.status == 200);
  r = svc.dispatch({"PATCH", url, "{\"data\": \"[0 1; 1 3]\"}"});
  REQUIRE(r.status == 200);
  CHECK(svc.dispatch({"PATCH", url, "{\"data\": [[0, 1], [1]]}"}).status == 400);
  CHECK(svc.dispatch({"PATCH", url, "{\"data\": 4}"}).status == 400);

  const std::string tid = create(svc, "titration");
  CHECK(svc.dispatch({"PATCH", "/api/sessions/" + tid + "/params", "{\"Kw\": 1}"}).status == 400);
}

TEST_CASE("point endpoint projects onto the constraint") {
  Service svc(corpus());
  const std::string sid = create(svc, "pendulum");
  Response r = svc.dispatch({"POST", "/api/sessions/" + sid + "/point/point0", "{\"x\": 0.7, \"y\": 1.5}"});
  REQUIRE(r.status == 200);
  json b = body(r);
  CHECK(b["point"]["x"] == 0.0);
  CHECK(b["point"]["y"] == 1.5);
  CHECK(b["result"]["series"]["theta"]["y"][0] == 1.5);
  CHECK(b["result"]["points"]["point0"][0] == json({0.0, 1.5}));

  b = body(svc.dispatch({"POST", "/api/sessions/" + sid + "/point/point0", "{\"x\": 0.3, \"y\": 5}"}));
  CHECK(b["point"]["y"] == 3.14);

  CHECK(svc.dispatch({"POST", "/api/sessions/" + sid + "/point/nope", "{\"x\": 0, \"y\": 0}"}).status == 404);
  CHECK(svc.dispatch({"POST", "/api/sessions/" + sid + "/point/point0", "{\"x\": 0}"}).status == 400);

  // Moving a point coordinate through PATCH also projects.
  b = body(svc.dispatch({"PATCH", "/api/sessions/" + sid + "/params", "{\"zero\": 4, \"theta_0\": -1}"}));
  json st = body(svc.dispatch({"GET", "/api/sessions/" + sid, ""}));
  CHECK(st["valuation"]["zero"] == 0.0);
  CHECK(st["valuation"]["theta_0"] == -1.0);
}

TEST_CASE("plot, CSV and session file downloads") {
  Service svc(corpus());
  const std::string sid = create(svc, "pendulum");
  Response svg = svc.dispatch({"GET", "/api/sessions/" + sid + "/plot/0.svg", ""});
  CHECK(svg.status == 200);
  CHECK(svg.content_type == "image/svg+xml");
  auto root = xml::parse(svg.body);
  CHECK(root.name == "svg");
  CHECK(svc.dispatch({"GET", "/api/sessions/" + sid + "/plot/9.svg", ""}).status == 404);
  CHECK(svc.dispatch({"GET", "/api/sessions/" + sid + "/plot/x.svg", ""}).status == 404);
  CHECK(svc.dispatch({"GET", "/api/sessions/deadbeef/plot/0.svg", ""}).status == 404);

  Response csv = svc.dispatch({"GET", "/api/sessions/" + sid + "/export.csv", ""});
  CHECK(csv.status == 200);
  CHECK(csv.content_type.rfind("text/csv", 0) == 0);
  CHECK(csv.body.rfind("t,theta,theta_dot,theta_lin\n", 0) == 0);

  Response file = svc.dispatch({"GET", "/api/sessions/" + sid + "/session-file", ""});
  CHECK(file.status == 200);
  CHECK(file.body.rfind("session pendulum version 1\n", 0) == 0);
}

TEST_CASE("session file upload restores values and re-runs") {
  Service svc(corpus());
  const std::string a = create(svc, "pendulum");
  svc.dispatch({"PATCH", "/api/sessions/" + a + "/params", "{\"L\": 2, \"theta_0\": 0.5}"});
  const std::string saved = svc.dispatch({"GET", "/api/sessions/" + a + "/session-file", ""}).body;

  const std::string b = create(svc, "pendulum");
  Response r = svc.dispatch({"PUT", "/api/sessions/" + b + "/session-file", saved});
  REQUIRE(r.status == 200);
  CHECK(body(r)["run"] == 2);
  json sa = body(svc.dispatch({"GET", "/api/sessions/" + a, ""}));
  json sb = body(svc.dispatch({"GET", "/api/sessions/" + b, ""}));
  CHECK(sa["valuation"] == sb["valuation"]);
  CHECK(sa["result"] == sb["result"]);
  CHECK(svc.dispatch({"GET", "/api/sessions/" + b + "/session-file", ""}).body == saved);

  CHECK(svc.dispatch({"PUT", "/api/sessions/" + b + "/session-file", "session laplace version 1\n"}).status == 400);
  CHECK(svc.dispatch({"PUT", "/api/sessions/" + b + "/session-file", "garbage"}).status == 400);
  CHECK(body(svc.dispatch({"GET", "/api/sessions/" + b, ""}))["valuation"] == sa["valuation"]);
}

TEST_CASE("language switch keeps the valuation") {
  Service svc(corpus());
  const std::string sid = create(svc, "pendulum");
  svc.dispatch({"PATCH", "/api/sessions/" + sid + "/params", "{\"L\": 3}"});
  Response r = svc.dispatch({"POST", "/api/sessions/" + sid + "/language", "{\"lang\": \"french\"}"});
  REQUIRE(r.status == 200);
  json b = body(r);
  CHECK(b["run"] == 2);
  CHECK(b["ui_form"]["language"] == "french");
  bool found = false;
  for (const auto& page : b["ui_form"]["pages"]) found |= page["title"] == "Paramčtres de résolution";
  CHECK(found);
  json st = body(svc.dispatch({"GET", "/api/sessions/" + sid, ""}));
  CHECK(st["valuation"]["L"] == 3.0);
  CHECK(st["language"] == "french");
  std::string svg = svc.dispatch({"GET", "/api/sessions/" + sid + "/plot/0.svg", ""}).body;
  CHECK(svg.find("Solution exacte") != std::string::npos);
  CHECK(svc.dispatch({"POST", "/api/sessions/" + sid + "/language", "{}"}).status == 400);
}

TEST_CASE("delete and unknown routes") {
  Service svc(corpus());
  const std::string sid = create(svc, "pendulum");
  CHECK(svc.session_count() == 1);
  Response r = svc.dispatch({"DELETE", "/api/sessions/" + sid, ""});
  CHECK(r.status == 204);
  CHECK(r.body.empty());
  CHECK(svc.session_count() == 0);
  CHECK(svc.dispatch({"GET", "/api/sessions/" + sid + "/export.csv", ""}).status == 404);
  CHECK(svc.dispatch({"DELETE", "/api/sessions/" + sid, ""}).status == 404);
  CHECK(svc.dispatch({"GET", "/api/nothing", ""}).status == 404);
  CHECK(svc.dispatch({"GET", "/index.html", ""}).status == 404);
  CHECK(svc.dispatch({"POST", "/api/simulations", ""}).status == 405);
}

TEST_CASE("request bodies over the cap are refused") {
  ServiceOptions opts;
  Service svc(corpus(), opts);
  const std::string sid = create(svc, "pendulum");
  std::string big(opts.max_body + 1, ' ');
  CHECK(svc.dispatch({"PATCH", "/api/sessions/" + sid + "/params", big}).status == 413);
  std::string fits = "{\"L\": 2}" + std::string(opts.max_body - 8, ' ');
  CHECK(svc.dispatch({"PATCH", "/api/sessions/" + sid + "/params", fits}).status == 200);
}

TEST_CASE("idle sessions expire with 410 and are reclaimed") {
  FakeClock clock;
  ServiceOptions opts;
  Service svc(corpus(), opts, clock.clock());
  const std::string a = create(svc, "pendulum");
  const std::string b = create(svc, "pendulum");
  clock.advance(std::chrono::minutes(20));
  CHECK(svc.dispatch({"GET", "/api/sessions/" + b + "/export.csv", ""}).status == 200);  // touches b
  clock.advance(std::chrono::minutes(10));
  CHECK(svc.dispatch({"GET", "/api/sessions/" + a + "/export.csv", ""}).status == 410);
  CHECK(svc.dispatch({"PATCH", "/api/sessions/" + a + "/params", "{\"L\": 2}"}).status == 410);
  CHECK(svc.session_count() == 1);
  CHECK(svc.dispatch({"GET", "/api/sessions/" + b, ""}).status == 200);
  clock.advance(std::chrono::minutes(30));
  CHECK(svc.session_count() == 0);
  CHECK(svc.dispatch({"GET", "/api/sessions/" + b, ""}).status == 410);
  CHECK(svc.dispatch({"GET", "/api/sessions/deadbeef", ""}).status == 404);
}

TEST_CASE("run counter grows with every mutation") {
  Service svc(corpus());
  const std::string sid = create(svc, "pendulum");
  const std::string base = "/api/sessions/" + sid;
  std::vector<int> runs;
  runs.push_back(body(svc.dispatch({"PATCH", base + "/params", "{\"L\": 2}"}))["run"]);
  runs.push_back(body(svc.dispatch({"POST", base + "/point/point0", "{\"x\": 0, \"y\": 1}"}))["run"]);
  const std::string saved = svc.dispatch({"GET", base + "/session-file", ""}).body;
  runs.push_back(body(svc.dispatch({"PUT", base + "/session-file", saved}))["run"]);
  runs.push_back(body(svc.dispatch({"POST", base + "/language", "{\"lang\": \"french\"}"}))["run"]);
  runs.push_back(body(svc.dispatch({"PATCH", base + "/params", "{\"L\": 1}"}))["run"]);
  CHECK(runs == std::vector<int>{2, 3, 4, 4, 5});
}

TEST_CASE("sessions are isolated under interleaved requests") {
  Service svc(corpus());
  const std::string a = create(svc, "pendulum");
  const std::string b = create(svc, "pendulum");
  json b0 = body(svc.dispatch({"GET", "/api/sessions/" + b, ""}));

  std::thread ta([&] {
    for (int i = 1; i <= 20; ++i)
      svc.dispatch({"PATCH", "/api/sessions/" + a + "/params", "{\"theta_0\": " + std::to_string(0.05 * i) + "}"});
  });
  std::thread tb([&] {
    for (int i = 0; i < 20; ++i) svc.dispatch({"GET", "/api/sessions/" + b + "/plot/0.svg", ""});
  });
  ta.join();
  tb.join();

  json a1 = body(svc.dispatch({"GET", "/api/sessions/" + a, ""}));
  json b1 = body(svc.dispatch({"GET", "/api/sessions/" + b, ""}));
  CHECK(a1["run"] == 21);
  CHECK(a1["valuation"]["theta_0"] == 1.0);
  CHECK(b1 == b0);

  // Interleaved single-threaded: alternate PATCHes hit only their own session.
  for (int i = 0; i < 5; ++i) {
    svc.dispatch({"PATCH", "/api/sessions/" + a + "/params", "{\"L\": " + std::to_string(1 + i) + "}"});
    svc.dispatch({"PATCH", "/api/sessions/" + b + "/params", "{\"g0\": " + std::to_string(5 + i) + "}"});
  }
  a1 = body(svc.dispatch({"GET", "/api/sessions/" + a, ""}));
  b1 = body(svc.dispatch({"GET", "/api/sessions/" + b, ""}));
  CHECK(a1["valuation"]["g0"] == 9.81);
  CHECK(a1["valuation"]["L"] == 5.0);
  CHECK(b1["valuation"]["L"] == 1.0);
  CHECK(b1["valuation"]["g0"] == 9.0);
  CHECK(b1["valuation"]["theta_0"] == 2.0);
}

TEST_CASE("concurrent PATCHes on one session are serialized") {
  Service svc(corpus());
  const std::string sid = create(svc, "pendulum");
  std::mutex m;
  std::set<int> seen;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) {
        json b = body(svc.dispatch({"PATCH", "/api/sessions/" + sid + "/params",
                                    "{\"L\": " + std::to_string(1 + t) + "}"}));
        std::lock_guard lock(m);
        seen.insert(b["run"].get<int>());
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(seen.size() == 40);
  CHECK(*seen.begin() == 2);
  CHECK(*seen.rbegin() == 41);
}

TEST_CASE("static mount serves files and refuses traversal") {
  auto dir = temp_dir("static");
  std::ofstream(dir / "index.html") << "<p>hello</p>";
  std::filesystem::create_directories(dir / "js");
  std::ofstream(dir / "js" / "app.js") << "let x = 1;";
  ServiceOptions opts;
  opts.static_dir = dir / "js" / "..";
  Service svc(corpus(), opts);
  Response r = svc.dispatch({"GET", "/", ""});
  CHECK(r.status == 200);
  CHECK(r.body == "<p>hello</p>");
  CHECK(r.content_type.rfind("text/html", 0) == 0);
  r = svc.dispatch({"GET", "/js/app.js", ""});
  CHECK(r.body == "let x = 1;");
  CHECK(r.content_type == "text/javascript");
  CHECK(svc.dispatch({"GET", "/js/../../etc/passwd", ""}).status == 404);
  CHECK(svc.dispatch({"GET", "/missing.css", ""}).status == 404);
  CHECK(svc.dispatch({"POST", "/index.html", ""}).status == 404);
  CHECK(svc.dispatch({"GET", "/api/simulations", ""}).status == 200);
  std::filesystem::remove_all(dir);
}

TEST_CASE("configuration file and environment overrides") {
  ServerConfig c = parse_config(R"({"listen": "0.0.0.0:9000", "simulations": "/srv/sims", "session_ttl": 60})");
  CHECK(c.host == "0.0.0.0");
  CHECK(c.port == 9000);
  CHECK(c.simulations == "/srv/sims");
  CHECK(c.session_ttl == std::chrono::seconds(60));
  CHECK(!c.static_dir);
  CHECK_THROWS_AS(parse_config("[]"), Error);
  CHECK_THROWS_AS(parse_config(R"({"listen": "nohost"})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"listen": "h:70000"})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"session_ttl": -5})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"colour": "red"})"), Error);

  std::map<std::string, std::string> env = {{"SIMML_LISTEN", "localhost:1234"}, {"SIMML_SESSION_TTL", "5"},
                                            {"SIMML_STATIC", "/www"}};
  auto get = [&](const char* k) -> const char* {
    auto it = env.find(k);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  ServerConfig e = apply_env(c, get);
  CHECK(e.host == "localhost");
  CHECK(e.port == 1234);
  CHECK(e.simulations == "/srv/sims");
  CHECK(e.session_ttl == std::chrono::seconds(5));
  CHECK(*e.static_dir == "/www");
  env["SIMML_SESSION_TTL"] = "soon";
  CHECK_THROWS_AS(apply_env(c, get), Error);
}

TEST_CASE("HTTP transport round trip") {
  Service svc(corpus());
  HttpServer server(svc);
  std::promise<int> port_promise;
  std::thread th([&] { server.listen("127.0.0.1", 0, [&](int p) { port_promise.set_value(p); }); });
  const int port = port_promise.get_future().get();
  REQUIRE(port > 0);

  httplib::Client cli("127.0.0.1", port);
  auto list = cli.Get("/api/simulations");
  REQUIRE(list);
  CHECK(list->status == 200);
  CHECK(json::parse(list->body).size() == 8);

  auto created = cli.Post("/api/simulations/pendulum/sessions", "{}", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string sid = json::parse(created->body)["session_id"];

  auto patched = cli.Patch("/api/sessions/" + sid + "/params", "{\"theta_0\": 1.0}", "application/json");
  REQUIRE(patched);
  CHECK(patched->status == 200);
  CHECK(json::parse(patched->body)["run"] == 2);

  auto svg = cli.Get("/api/sessions/" + sid + "/plot/0.svg");
  REQUIRE(svg);
  CHECK(svg->get_header_value("Content-Type") == "image/svg+xml");

  auto missing = cli.Get("/api/sessions/deadbeef/plot/0.svg");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  auto del = cli.Delete("/api/sessions/" + sid);
  REQUIRE(del);
  CHECK(del->status == 204);

  server.stop();
  th.join();
}

TEST_CASE("static publisher writes a deterministic tree") {
  Registry reg;
  for (const char* name : {"pendulum", "lissajous"}) {
    auto out = load_document(std::string(SIMML_CORPUS_DIR) + "/" + name + ".xml");
    REQUIRE(out.doc);
    reg.add(*out.doc);
  }
  auto dir = temp_dir("site");
  auto files = publish_static(reg, dir);
  CHECK(files == std::vector<std::string>{"index.html", "simulations/lissajous.html", "simulations/lissajous.svg",
                                          "simulations/pendulum.html", "simulations/pendulum.svg"});
  std::size_t on_disk = 0;
  for (const auto& f : std::filesystem::recursive_directory_iterator(dir)) on_disk += f.is_regular_file();
  CHECK(on_disk == 5);

  std::map<std::string, std::string> first;
  for (const auto& f : files) first[f] = slurp(dir / f);
  publish_static(reg, dir);
  for (const auto& f : files) CHECK(slurp(dir / f) == first[f]);

  const std::string& index = first["index.html"];
  CHECK(index.find("<h2>Mechanics</h2>") != std::string::npos);
  CHECK(index.find("href=\"simulations/pendulum.html\">Simple pendulum</a>") != std::string::npos);
  const std::string& page = first["simulations/pendulum.html"];
  CHECK(page.find("<h1>Simple pendulum</h1>") != std::string::npos);
  CHECK(page.find("S. Mottelet") != std::string::npos);
  CHECK(page.find("<img src=\"pendulum.svg\"") != std::string::npos);
  CHECK(page.find("class=\"launch\"") != std::string::npos);
  CHECK(page.find("A mass hanging from a rigid rod") != std::string::npos);
  CHECK(page.find("Une masse") == std::string::npos);
  CHECK(xml::parse(first["simulations/pendulum.svg"]).name == "svg");
  CHECK(first["simulations/pendulum.svg"].find("class=\"curve\"") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("publishing an empty registry gives an empty index") {
  Registry reg;
  auto dir = temp_dir("empty");
  auto files = publish_static(reg, dir);
  CHECK(files == std::vector<std::string>{"index.html"});
  CHECK(slurp(dir / "index.html").find("No simulations.") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("publishing the whole corpus groups by first keyword") {
  auto dir = temp_dir("corpus");
  auto files = publish_static(*corpus(), dir);
  CHECK(files.size() == 17);
  const std::string index = slurp(dir / "index.html");
  for (const RegistryEntry* e : corpus()->entries()) {
    CHECK(index.find("simulations/" + e->doc_id + ".html") != std::string::npos);
    CHECK(xml::parse(slurp(dir / ("simulations/" + e->doc_id + ".svg"))).name == "svg");
  }
  std::filesystem::remove_all(dir);
}
