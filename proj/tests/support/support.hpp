#pragma once

// Shared test plumbing: temp dirs, fixture loading, and the two Case B replay
// drivers (CLI and HTTP) used by the interface tests and the acceptance run.

#include <httplib.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ghosty/ghosty.hpp"

namespace ghosty::testing {

namespace fs = std::filesystem;

inline std::string fixture_path(const std::string& name) { return std::string(GHOSTY_FIXTURE_DIR) + "/" + name; }

inline json load_json(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file);
  return json::parse(in);
}

inline json fixture(const std::string& name) { return load_json(fixture_path(name)); }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "ghosty-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline json all_ticked() {
  return {{"uses_verbs", true}, {"includes_emotion", true}, {"cross_domain_comprehensible", true}, {"reversibility_pass", true}};
}

inline Timestamp ts(const std::string& iso) { return *parse_iso8601(iso); }

// ---------------------------------------------------------------------------
// HTTP

/// An HttpServer on a free loopback port, served from a background thread.
class LiveServer {
 public:
  LiveServer(api::Service& svc, api::GeneratorConfig gen = {}) : server_(svc, std::move(gen)) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.run(); });
    server_.wait_until_ready();
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(std::chrono::seconds(10));
    return c;
  }

 private:
  api::HttpServer server_;
  int port_ = 0;
  std::thread thread_;
};

struct HttpReply {
  int status = 0;
  json body;
};

inline HttpReply http_post(httplib::Client& c, const std::string& path, const json& body) {
  auto res = c.Post(path, body.dump(), "application/json");
  if (!res) throw std::runtime_error("POST " + path + " failed: " + httplib::to_string(res.error()));
  return {res->status, json::parse(res->body)};
}

inline HttpReply http_get(httplib::Client& c, const std::string& path) {
  auto res = c.Get(path);
  if (!res) throw std::runtime_error("GET " + path + " failed: " + httplib::to_string(res.error()));
  return {res->status, json::parse(res->body)};
}

/// POSTs and insists on an ok envelope; returns its data.
inline json http_ok(httplib::Client& c, const std::string& path, const json& body) {
  auto r = http_post(c, path, body);
  if (r.status != 200 || !r.body.value("ok", false))
    throw std::runtime_error("POST " + path + " -> " + std::to_string(r.status) + " " + r.body.dump());
  return r.body.at("data");
}

// ---------------------------------------------------------------------------
// Case B: PRECOG signals -> convergences -> contrarian -> integration ->
// collider -> timing grid -> actions -> finalize.

inline const char* kCaseBClock = "2026-01-15T09:00:00Z";

inline void replay_case_b_http(const std::string& store_path, const json& doc) {
  ledger::Store store(store_path, nullptr);
  api::Service svc(store, EngineConfig{}, fixed_clock(ts(doc.at("clock"))));
  LiveServer server(svc);
  auto c = server.client();
  const json& p = doc.at("precog");

  const auto precog_id = http_ok(c, "/sessions",
                                 {{"protocol", "precog"}, {"theme_key", p.at("theme_key")}, {"horizon", p.at("horizon")}})
                             .at("result")
                             .at("id")
                             .get<std::string>();
  const std::string ps = "/sessions/" + precog_id + "/steps/";
  for (const auto& s : p.at("signals")) http_ok(c, ps + "signal", s);
  for (const auto& cv : p.at("convergences")) http_ok(c, ps + "convergence", cv);
  http_ok(c, ps + "contrarian", p.at("contrarian"));

  const json& in = doc.at("integration");
  const json created = http_ok(c, "/sessions",
                               {{"protocol", "integration"},
                                {"precog_session_id", precog_id},
                                {"theme", in.at("theme")},
                                {"selection", in.at("selection")},
                                {"externals", in.at("externals")}});
  const auto run_id = created.at("result").at("id").get<std::string>();
  const auto collider_id = created.at("result").at("collider_session_id").get<std::string>();
  const std::string cs = "/sessions/" + collider_id + "/steps/";
  for (const auto& [fid, text] : doc.at("ghosts").items())
    http_ok(c, cs + "ghost", {{"fragment_id", fid}, {"structural_description", text}, {"checklist", all_ticked()}});
  for (const auto& s : doc.at("scores")) http_ok(c, cs + "score", s);
  for (const auto& v : doc.at("visions")) http_ok(c, cs + "vision", v);
  for (const auto& b : doc.at("bridges")) http_ok(c, cs + "bridge", b);
  http_ok(c, cs + "complete", json::object());

  const std::string rs = "/sessions/" + run_id + "/steps/";
  for (const auto& g : doc.at("grid")) http_ok(c, rs + "map", g);
  http_ok(c, rs + "actions", json::object());
  http_ok(c, ps + "finalize", json::object());
}

// ---------------------------------------------------------------------------
// CLI

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run_cli(const Environment& env, std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = api::cli_dispatch(std::move(args), env, out, err);
  return {code, out.str(), err.str()};
}

inline Environment cli_env(const std::string& store_path, const std::string& clock = {}) {
  Environment env;
  env.store_path = store_path;
  env.fixed_clock = clock;
  return env;
}

inline std::string cli_ok(const Environment& env, std::vector<std::string> args) {
  std::string shown;
  for (const auto& a : args) shown += a + " ";
  auto r = run_cli(env, std::move(args));
  if (r.code != 0) throw std::runtime_error("ghosty " + shown + "-> exit " + std::to_string(r.code) + ": " + r.err);
  return r.out;
}

inline std::string first_word(const std::string& s) { return s.substr(0, s.find_first_of(" \n")); }

inline void replay_case_b_cli(const std::string& store_path, const json& doc, const std::string& scratch_dir) {
  const Environment env = cli_env(store_path, doc.at("clock"));
  const json& p = doc.at("precog");

  const std::string precog_id = first_word(cli_ok(
      env, {"session", "new", "--protocol", "precog", "--theme", p.at("theme_key"), "--horizon", p.at("horizon")}));
  for (const auto& s : p.at("signals")) {
    std::vector<std::string> args{"signal", "add", precog_id, "--key", s.at("key"), "--description", s.at("description")};
    for (const auto& e : s.at("evidence")) args.insert(args.end(), {"--evidence", e.get<std::string>()});
    args.insert(args.end(), {"--strength", s.at("strength"), "--direction", s.at("direction"), "--confidence",
                             s.at("confidence"), "--source", s.at("source_kind")});
    cli_ok(env, args);
  }
  for (const auto& cv : p.at("convergences")) {
    std::string keys;
    for (const auto& k : cv.at("signal_keys")) keys += (keys.empty() ? "" : ",") + k.get<std::string>();
    cli_ok(env, {"converge", "add", precog_id, "--signals", keys, "--hypothesis", cv.at("hypothesis"), "--logic",
                 cv.at("causal_logic"), "--confidence", cv.at("confidence"), "--rationale", cv.at("confidence_rationale")});
  }
  json scenarios = {{"scenarios", p.at("contrarian").at("scenarios")}};
  cli_ok(env, {"contrarian", "set", precog_id, "--json", scenarios.dump(), "--overestimation",
               p.at("contrarian").at("overestimation_reason")});

  const json& in = doc.at("integration");
  const std::string externals = scratch_dir + "/externals.json";
  write_file(externals, in.at("externals").dump());
  std::string selection;
  for (const auto& s : in.at("selection")) selection += (selection.empty() ? "" : ",") + s.get<std::string>();
  const std::string started = cli_ok(env, {"integrate", "start", "--precog", precog_id, "--theme", in.at("theme"),
                                           "--select", selection, "--externals-file", externals});
  const std::string run_id = first_word(started);
  const std::string collider_id = first_word(started.substr(run_id.size() + 1));

  for (const auto& [fid, text] : doc.at("ghosts").items())
    cli_ok(env, {"ghost", "set", collider_id, "--fragment", fid, "--text", text.get<std::string>(), "--verbs",
                 "--emotion", "--cross-domain", "--reversible"});
  for (const auto& s : doc.at("scores"))
    cli_ok(env, {"collide", "score", collider_id, "--pair", s.at("pair"), "--score", s.at("score"), "--rationale",
                 s.at("rationale")});
  for (const auto& v : doc.at("visions")) {
    const auto& r = v.at("ratings");
    const std::string ratings = std::to_string(r[0].get<int>()) + "," + std::to_string(r[1].get<int>()) + "," +
                                std::to_string(r[2].get<int>()) + "," + std::to_string(r[3].get<int>());
    cli_ok(env, {"vision", "add", collider_id, "--collision", v.at("collision_id"), "--name", v.at("name"),
                 "--one-line", v.at("one_line"), "--emotion", v.at("emotion"), "--image", v.at("cinematic_image"),
                 "--why-now", v.at("why_now"), "--ratings", ratings});
  }
  for (const auto& b : doc.at("bridges")) {
    std::vector<std::string> args{"bridge", "set", collider_id, "--vision", b.at("vision_id"), "--mvv", b.at("mvv")};
    for (const auto& cap : b.at("existing_capabilities")) args.insert(args.end(), {"--capability", cap.get<std::string>()});
    for (const auto& k : b.at("kill_conditions")) args.insert(args.end(), {"--kill", k.get<std::string>()});
    args.insert(args.end(), {"--first-step", b.at("first_step_24h")});
    cli_ok(env, args);
  }
  cli_ok(env, {"session", "finalize", collider_id});

  for (const auto& g : doc.at("grid")) {
    std::vector<std::string> args{"integrate", "map", run_id, "--vision", g.at("vision_id"), "--label", g.at("label"),
                                  "--market", g.at("market_phase"), "--competitive", g.at("competitive"),
                                  "--external", g.at("external_window")};
    if (g.contains("readiness")) args.insert(args.end(), {"--readiness", g.at("readiness")});
    cli_ok(env, args);
  }
  cli_ok(env, {"integrate", "actions", run_id});
  cli_ok(env, {"session", "finalize", precog_id});
}

}  // namespace ghosty::testing
