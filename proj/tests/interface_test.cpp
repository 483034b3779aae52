#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <regex>

#include "support.hpp"

using namespace ghosty;
using namespace ghosty::api;
using namespace ghosty::testing;

namespace {

const char* kClock = "2026-01-15T09:00:00Z";

template <class F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an Error";
  return Error(ErrorCode::BadRequest, "none");
}

struct Harness {
  TempDir dir;
  ledger::Store store{dir.file("ledger.jsonl"), nullptr};
  Service svc{store, EngineConfig{}, fixed_clock(ts(kClock))};
};

/// Runs Case D through the service to completion. Returns the session id.
std::string build_case_d(Service& svc) {
  const auto d = fixture("case_d.json");
  const auto id = svc.create({{"protocol", "ghosty"}, {"theme", d["theme"]}, {"fragments", d["fragments"]}})
                      .at("result")
                      .at("id")
                      .get<std::string>();
  for (const auto& [fid, text] : d["ghosts"].items())
    svc.step(id, "ghost", {{"fragment_id", fid}, {"structural_description", text}, {"checklist", all_ticked()}});
  for (const auto& s : d["scores"]) svc.step(id, "score", s);
  for (const auto& v : d["visions"]) svc.step(id, "vision", v);
  for (const auto& b : d["bridges"]) svc.step(id, "bridge", b);
  svc.step(id, "complete", json::object());
  return id;
}

/// Case D fragments and ghosts, every pair scored Boring.
std::string build_all_boring(Service& svc) {
  const auto d = fixture("case_d.json");
  const auto id = svc.create({{"protocol", "ghosty"}, {"theme", d["theme"]}, {"fragments", d["fragments"]}})
                      .at("result")
                      .at("id")
                      .get<std::string>();
  for (const auto& [fid, text] : d["ghosts"].items())
    svc.step(id, "ghost", {{"fragment_id", fid}, {"structural_description", text}, {"checklist", all_ticked()}});
  for (const auto& s : d["scores"]) svc.step(id, "score", {{"pair", s["pair"]}, {"score", "boring"}});
  return id;
}

/// Case B with one signal dropped, one added and one strengthened.
json case_b_followup() {
  json doc = fixture("case_b.json");
  auto& signals = doc["precog"]["signals"];
  json next = json::array();
  for (auto s : signals) {
    if (s["key"] == "S6") continue;
    if (s["key"] == "S5") s["strength"] = "strong";
    next.push_back(s);
  }
  json added = next.back();
  added["key"] = "S7";
  added["description"] = "Regional insurers start pricing the new risk class";
  next.push_back(added);
  signals = next;
  for (auto& cv : doc["precog"]["convergences"])
    for (auto& k : cv["signal_keys"])
      if (k == "S6") k = "S7";
  return doc;
}

/// Tiny generator stand-in on a free port.
class StubGenerator {
 public:
  explicit StubGenerator(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/generate", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubGenerator() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/generate"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

void echo_handler(const httplib::Request& req, httplib::Response& res) {
  const json in = json::parse(req.body);
  std::string text = "draft for " + in["step_kind"].get<std::string>();
  if (in["context"].contains("fragment")) text += ": " + in["context"]["fragment"]["text"].get<std::string>();
  res.set_content(json{{"candidate_text", text}, {"metadata", {{"model", "stub"}}}}.dump(), "application/json");
}

}  // namespace

// --- CLI ---------------------------------------------------------------------------

TEST(Cli, DryGridEvalPrintsJudgment) {
  TempDir dir;
  const auto r = run_cli(cli_env(dir.file("l.jsonl")), {"grid", "eval", "--market", "acceleration", "--competitive",
                                                       "fast-follower", "--readiness", "ready", "--external", "open"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "Go (sum=4, escalation: required)\n");
}

TEST(Cli, TwoFragmentsFailStartWithValidationExit) {
  TempDir dir;
  const auto env = cli_env(dir.file("l.jsonl"), kClock);
  const auto id = first_word(cli_ok(env, {"session", "new", "--protocol", "ghosty", "--theme", "thin"}));
  EXPECT_EQ(id, "ghosty-1");
  cli_ok(env, {"fragment", "add", id, "--text", "Night buses run half empty", "--domain", "transit", "--kind", "observation"});
  cli_ok(env, {"fragment", "add", id, "--text", "Choirs breathe in shifts", "--domain", "music", "--kind", "aesthetic"});
  const auto r = run_cli(env, {"session", "start", id});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("count_out_of_range"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("field fragments"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExit64) {
  TempDir dir;
  const auto env = cli_env(dir.file("l.jsonl"));
  EXPECT_EQ(run_cli(env, {}).code, 64);
  EXPECT_EQ(run_cli(env, {"teleport"}).code, 64);
  EXPECT_EQ(run_cli(env, {"session", "new"}).code, 64);
  const auto r = run_cli(env, {"grid", "eval", "--market"});
  EXPECT_EQ(r.code, 64);
  EXPECT_NE(r.err.find("usage error"), std::string::npos);
}

TEST(Cli, StorageErrorsExit2) {
  const auto r = run_cli(cli_env("/nonexistent-dir/deeper/l.jsonl"), {"session", "new", "--protocol", "precog", "--theme", "x"});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("storage_failure"), std::string::npos);
}

TEST(Cli, ValidationErrorNamesField) {
  TempDir dir;
  const auto env = cli_env(dir.file("l.jsonl"), kClock);
  const auto id = first_word(cli_ok(env, {"session", "new", "--protocol", "precog", "--theme", "t"}));
  const auto r = run_cli(env, {"signal", "add", id, "--key", "S1", "--description", "d", "--strength", "strong",
                               "--direction", "accelerating", "--source", "media"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("field "), std::string::npos) << r.err;
}

TEST(Cli, HistoryDiffFlagsPriorityRows) {
  TempDir dir;
  const auto store = dir.file("l.jsonl");
  replay_case_b_cli(store, fixture("case_b.json"), dir.path());
  replay_case_b_cli(store, case_b_followup(), dir.path());
  const std::string theme = fixture("case_b.json")["precog"]["theme_key"];
  const auto out = cli_ok(cli_env(store, kClock), {"history", "diff", "--theme", theme});

  EXPECT_NE(out.find("precog-1 -> precog-2"), std::string::npos) << out;
  EXPECT_TRUE(std::regex_search(out, std::regex(R"((^|\n)! S6 +dead)"))) << out;
  EXPECT_TRUE(std::regex_search(out, std::regex(R"((^|\n)! S7 +new)"))) << out;
  EXPECT_TRUE(std::regex_search(out, std::regex(R"((^|\n)  S5 +strengthened +emerging -> strong)"))) << out;
  EXPECT_TRUE(std::regex_search(out, std::regex(R"((^|\n)  S1 +stable)"))) << out;
  // Priority rows come first.
  EXPECT_LT(out.find("! S"), out.find("  S"));
}

TEST(Cli, ScoreRubricPrintsTotal) {
  TempDir dir;
  const auto env = cli_env(dir.file("l.jsonl"), kClock);
  for (const auto& [file, total] : {std::pair{"rubric_case_d_treatment.json", 74}, std::pair{"rubric_case_d_control.json", 49}}) {
    const auto out = cli_ok(env, {"score", "rubric", "--file", fixture_path(file)});
    EXPECT_NE(out.find(": " + std::to_string(total) + "/80"), std::string::npos) << out;
  }
  EXPECT_EQ(cli_ok(env, {"score", "rubric", "--target", "x", "--scores", "10,10,10,10,10,10,10,10", "--no-persist"}),
            "x: 80/80\n");
  EXPECT_EQ(run_cli(env, {"score", "rubric", "--target", "x", "--scores", "11,0,0,0,0,0,0,0"}).code, 1);
}

TEST(Cli, BatchRunPrintsAggregates) {
  TempDir dir;
  const auto out = cli_ok(cli_env(dir.file("l.jsonl"), kClock), {"batch", "run", "--fixtures", fixture_path("batch_eight_runs.json")});
  EXPECT_NE(out.find("success rate 0.8750, failure rate 0.1250"), std::string::npos) << out;
  EXPECT_NE(out.find("visions 9, per successful run 1.29"), std::string::npos) << out;
  EXPECT_NE(out.find("electric 0/6 (0.0%)  visions 0  failure"), std::string::npos) << out;
}

TEST(Cli, PredictionLoop) {
  TempDir dir;
  const auto env = cli_env(dir.file("l.jsonl"), kClock);
  EXPECT_EQ(cli_ok(env, {"predict", "add", "--theme", "t", "--statement", "s", "--start", "2026", "--end", "2027"}), "p1\n");
  const auto out = cli_ok(env, {"predict", "eval", "p1", "--outcome", "hit"});
  EXPECT_NE(out.find("hit 1, miss 0, partial 0, pending 0"), std::string::npos) << out;
  EXPECT_EQ(run_cli(env, {"predict", "eval", "p1", "--outcome", "miss"}).code, 1);
}

TEST(Cli, GenerateWithoutEndpointIsUnconfigured) {
  TempDir dir;
  Environment env = cli_env(dir.file("l.jsonl"), kClock);
  {
    ledger::Store store(env.store_path, nullptr);
    Service svc(store, EngineConfig{}, fixed_clock(ts(kClock)));
    build_case_d(svc);
  }
  const auto r = run_cli(env, {"generate", "ghosty-1", "--kind", "ghost", "--target", "f1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("unconfigured"), std::string::npos) << r.err;
}

TEST(Cli, ServeOnBusyPortExits2) {
  Harness h;
  LiveServer server(h.svc);
  TempDir dir;
  const auto r = run_cli(cli_env(dir.file("l.jsonl")), {"serve", "--port", std::to_string(server.port())});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("port_in_use"), std::string::npos);
}

// --- dual path ---------------------------------------------------------------------

TEST(DualPath, CaseBLedgersAreByteIdentical) {
  TempDir dir;
  const auto doc = fixture("case_b.json");
  replay_case_b_cli(dir.file("cli.jsonl"), doc, dir.path());
  replay_case_b_http(dir.file("http.jsonl"), doc);
  const auto a = read_file(dir.file("cli.jsonl"));
  const auto b = read_file(dir.file("http.jsonl"));
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, b);

  ledger::Store store(dir.file("http.jsonl"), nullptr);
  Service svc(store, EngineConfig{}, fixed_clock(ts(kClock)));
  const auto c = svc.load_collider("ghosty-1");
  EXPECT_EQ(c.status, collider::Status::Completed);
  EXPECT_EQ(collider::pair_count(c), doc["expected"]["pairs"].get<std::size_t>());
  std::vector<std::string> electric;
  for (const auto& x : c.collisions)
    if (x.score == collider::CollisionScore::Electric) electric.push_back(x.pair.key());
  EXPECT_EQ(json(electric), doc["expected"]["electric"]);
  EXPECT_EQ(svc.load_precog("precog-1").status, precog::Status::Completed);
  EXPECT_EQ(svc.load_run("integration-1").mappings.size(), doc["grid"].size());
}

TEST(DualPath, RestartReconstructsViews) {
  TempDir dir;
  replay_case_b_http(dir.file("l.jsonl"), fixture("case_b.json"));
  json before, after;
  {
    ledger::Store store(dir.file("l.jsonl"), nullptr);
    Service svc(store, EngineConfig{}, fixed_clock(ts(kClock)));
    for (const auto* id : {"precog-1", "ghosty-1", "integration-1"}) before[id] = svc.load(id).payload;
  }
  ledger::Store store(dir.file("l.jsonl"), nullptr);
  Service svc(store, EngineConfig{}, fixed_clock(ts(kClock)));
  LiveServer server(svc);
  auto c = server.client();
  for (const auto* id : {"precog-1", "ghosty-1", "integration-1"})
    after[id] = http_get(c, std::string("/sessions/") + id).body["data"]["session"];
  EXPECT_EQ(before, after);
}

// --- HTTP --------------------------------------------------------------------------

TEST(Http, Health) {
  Harness h;
  LiveServer server(h.svc);
  auto c = server.client();
  const auto r = http_get(c, "/health");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["ok"], true);
  EXPECT_EQ(r.body["data"]["status"], "ok");
  EXPECT_EQ(r.body["data"]["records"], 0);
}

TEST(Http, RatingOutOfRangeNamesField) {
  Harness h;
  const auto d = fixture("case_d.json");
  LiveServer server(h.svc);
  auto c = server.client();
  const auto id = http_ok(c, "/sessions", {{"protocol", "ghosty"}, {"theme", d["theme"]}, {"fragments", d["fragments"]}})
                      .at("result")
                      .at("id")
                      .get<std::string>();
  const std::string steps = "/sessions/" + id + "/steps/";
  for (const auto& [fid, text] : d["ghosts"].items())
    http_ok(c, steps + "ghost", {{"fragment_id", fid}, {"structural_description", text}, {"checklist", all_ticked()}});
  for (const auto& s : d["scores"]) http_ok(c, steps + "score", s);

  json vision = d["visions"][0];
  vision["ratings"] = {6, 4, 4, 4};
  auto r = http_post(c, steps + "vision", vision);
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["ok"], false);
  EXPECT_EQ(r.body["error"]["code"], "rating_out_of_range");
  EXPECT_EQ(r.body["error"]["field_path"], "ratings.novelty");

  vision["ratings"] = {{"novelty", 5}, {"feasibility", 4}, {"resonance", 4}, {"timing", 0}};
  r = http_post(c, steps + "vision", vision);
  EXPECT_EQ(r.body["error"]["field_path"], "ratings.timing");
}

TEST(Http, GatesAfterFullMatrix) {
  Harness h;
  const auto d = fixture("case_d.json");
  LiveServer server(h.svc);
  auto c = server.client();
  const auto id = http_ok(c, "/sessions", {{"protocol", "ghosty"}, {"theme", d["theme"]}, {"fragments", d["fragments"]}})
                      .at("result")
                      .at("id")
                      .get<std::string>();
  const std::string steps = "/sessions/" + id + "/steps/";
  for (const auto& [fid, text] : d["ghosts"].items())
    http_ok(c, steps + "ghost", {{"fragment_id", fid}, {"structural_description", text}, {"checklist", all_ticked()}});

  http_ok(c, steps + "score", d["scores"][0]);
  auto g = http_get(c, "/sessions/" + id + "/gates").body["data"];
  EXPECT_TRUE(g["collision_gate"].is_null());
  EXPECT_EQ(g["pending_pairs"].size(), 9u);

  for (std::size_t i = 1; i < d["scores"].size(); ++i) http_ok(c, steps + "score", d["scores"][i]);
  g = http_get(c, "/sessions/" + id + "/gates").body["data"];
  EXPECT_EQ(g["pairs_scored"], 10);
  EXPECT_EQ(g["collision_gate"]["electric_ids"], d["expected"]["electric"]);
  EXPECT_EQ(g["collision_gate"]["electric_inflation"], false);
  EXPECT_EQ(g["status"], "crystallizing");
}

TEST(Http, MalformedBodyIsBadRequest) {
  Harness h;
  LiveServer server(h.svc);
  auto c = server.client();
  auto res = c.Post("/sessions", "{\"protocol\": ", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  const json body = json::parse(res->body);
  EXPECT_EQ(body["ok"], false);
  EXPECT_EQ(body["error"]["code"], "bad_request");

  res = c.Post("/sessions", "[1,2]", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST(Http, ErrorStatusMapping) {
  Harness h;
  LiveServer server(h.svc);
  auto c = server.client();
  auto r = http_get(c, "/sessions/ghosty-99");
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(r.body["error"]["code"], "unknown_session");

  const auto id = http_ok(c, "/sessions", {{"protocol", "ghosty"}, {"theme", "t"}}).at("result").at("id").get<std::string>();
  r = http_post(c, "/sessions/" + id + "/steps/score", {{"pair", "f1+f2"}, {"score", "electric"}, {"rationale", "x"}});
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body["error"]["code"], "wrong_phase");

  r = http_post(c, "/sessions", {{"protocol", "ghosty"}, {"theme", ""}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"]["field_path"], "theme");
}

TEST(Http, HomogeneousCreateRecordsAbort) {
  Harness h;
  LiveServer server(h.svc);
  auto c = server.client();
  json frags = json::array();
  for (const auto* t : {"Pallet density", "Truck fill rates", "Dock scheduling"})
    frags.push_back({{"text", t}, {"domain_tag", "logistics"}, {"source_kind", "quantitative-data"}});
  const auto r = http_post(c, "/sessions", {{"protocol", "ghosty"}, {"theme", "t"}, {"fragments", frags}});
  EXPECT_EQ(r.body["ok"], false);
  EXPECT_EQ(r.body["error"]["code"], "homogeneous_fragments");
  EXPECT_EQ(r.body["data"]["session"]["status"], "aborted_preflight");
  EXPECT_EQ(h.store.size(), 1u);
}

TEST(Http, BusyPortIsPortInUse) {
  Harness h;
  LiveServer first(h.svc);
  HttpServer second(h.svc);
  const auto e = error_of([&] { second.bind("127.0.0.1", first.port()); });
  EXPECT_EQ(e.code(), ErrorCode::PortInUse);
}

TEST(Http, HistoryPredictionsAndRubric) {
  TempDir dir;
  const auto store_path = dir.file("l.jsonl");
  replay_case_b_cli(store_path, fixture("case_b.json"), dir.path());
  replay_case_b_cli(store_path, case_b_followup(), dir.path());
  ledger::Store store(store_path, nullptr);
  Service svc(store, EngineConfig{}, fixed_clock(ts(kClock)));
  LiveServer server(svc);
  auto c = server.client();

  const std::string theme = fixture("case_b.json")["precog"]["theme_key"];
  auto d = http_get(c, "/themes/" + theme + "/history/diff").body["data"];
  EXPECT_EQ(d["from"], "precog-1");
  EXPECT_EQ(d["to"], "precog-2");
  ASSERT_GE(d["deltas"].size(), 2u);
  EXPECT_EQ(d["deltas"][0]["priority"], true);
  EXPECT_EQ(d["deltas"][1]["priority"], true);
  const auto reversed = http_get(c, "/themes/" + theme + "/history/diff?from=precog-2&to=precog-1").body["data"];
  EXPECT_EQ(reversed["deltas"].size(), d["deltas"].size());
  EXPECT_EQ(http_get(c, "/themes/" + theme + "/history/diff?from=precog-1").status, 400);

  const auto p = http_ok(c, "/predictions", {{"theme_key", theme}, {"statement", "Gig platforms bundle insurance"}});
  EXPECT_EQ(p["id"], "p1");
  const auto ev = http_ok(c, "/predictions/p1/evaluation", {{"outcome", "partial"}, {"timing_accuracy", "a year early"}});
  EXPECT_EQ(ev["prediction"]["outcome"], "partial");
  EXPECT_EQ(ev["summary"]["partial"], 1);
  EXPECT_EQ(http_post(c, "/predictions/p9/evaluation", {{"outcome", "hit"}}).body["error"]["code"], "unknown_prediction");

  const auto rubric = http_ok(c, "/rubric", fixture("rubric_case_d_treatment.json"));
  EXPECT_EQ(rubric["total"], 74);
  EXPECT_EQ(rubric["max"], 80);
  const auto bad = http_post(c, "/rubric", {{"target_ref", "x"}, {"scores", {1, 2, 3}}});
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(bad.body["error"]["code"], "bad_rubric");
}

// --- generator ---------------------------------------------------------------------

TEST(Generator, EchoDraftIsNotCommitted) {
  Harness h;
  const auto id = build_case_d(h.svc);
  const auto rev = h.svc.load(id).revision;
  const auto records = h.store.size();
  StubGenerator gen(echo_handler);

  const auto out = request_generation({gen.url(), std::chrono::milliseconds(2000)},
                                      draft_request(h.svc, id, StepKind::Ghost, "f1"));
  EXPECT_EQ(out.candidate_text, "draft for ghost: The emotional concept of hiding affection");
  EXPECT_EQ(out.metadata["model"], "stub");

  LiveServer server(h.svc, {gen.url(), std::chrono::milliseconds(2000)});
  auto c = server.client();
  const auto data = http_ok(c, "/sessions/" + id + "/drafts/collision-rationale", {{"target", "f1+f4"}});
  EXPECT_EQ(data["candidate_text"], "draft for collision_rationale");
  EXPECT_EQ(data["committed"], false);
  EXPECT_EQ(h.svc.load(id).revision, rev);
  EXPECT_EQ(h.store.size(), records);
}

TEST(Generator, RemoteErrorCarriesBodyExcerpt) {
  StubGenerator gen([](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("model overloaded, retry later" + std::string(400, '.'), "text/plain");
  });
  const auto e = error_of([&] { request_generation({gen.url(), std::chrono::milliseconds(2000)}, {}); });
  EXPECT_EQ(e.code(), ErrorCode::RemoteError);
  const std::string msg = e.what();
  EXPECT_NE(msg.find("HTTP 500"), std::string::npos) << msg;
  EXPECT_NE(msg.find("model overloaded"), std::string::npos) << msg;
  EXPECT_LT(msg.size(), 300u);
}

TEST(Generator, SlowEndpointTimesOut) {
  StubGenerator gen([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(R"({"candidate_text":"late"})", "application/json");
  });
  const auto start = std::chrono::steady_clock::now();
  const auto e = error_of([&] { request_generation({gen.url(), std::chrono::milliseconds(200)}, {}); });
  EXPECT_EQ(e.code(), ErrorCode::Timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(1400));
}

TEST(Generator, UnconfiguredLeavesManualPathWorking) {
  Harness h;
  const auto e = error_of([] { request_generation({}, {}); });
  EXPECT_EQ(e.code(), ErrorCode::Unconfigured);

  LiveServer server(h.svc);
  auto c = server.client();
  const auto d = fixture("case_d.json");
  const auto id = http_ok(c, "/sessions", {{"protocol", "ghosty"}, {"theme", d["theme"]}, {"fragments", d["fragments"]}})
                      .at("result")
                      .at("id")
                      .get<std::string>();
  const auto r = http_post(c, "/sessions/" + id + "/drafts/ghost", {{"target", "f1"}});
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(r.body["error"]["code"], "unconfigured");
  http_ok(c, "/sessions/" + id + "/steps/ghost",
          {{"fragment_id", "f1"}, {"structural_description", d["ghosts"]["f1"]}, {"checklist", all_ticked()}});
}

TEST(Generator, UnreachableEndpointIsRemoteError) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  const auto e = error_of([&] {
    request_generation({"http://127.0.0.1:" + std::to_string(port) + "/generate", std::chrono::milliseconds(500)}, {});
  });
  EXPECT_TRUE(e.code() == ErrorCode::RemoteError || e.code() == ErrorCode::Timeout) << code_name(e.code());
}

// --- export ------------------------------------------------------------------------

TEST(Export, CaseDMarkdownTrace) {
  Harness h;
  const auto id = build_case_d(h.svc);
  const auto md = export_report(h.svc, id, ReportFormat::Markdown);
  const auto d = fixture("case_d.json");
  for (const auto& [fid, text] : d["ghosts"].items())
    EXPECT_NE(md.find("- " + fid + " -> *" + text.get<std::string>() + "*"), std::string::npos) << fid;
  EXPECT_NE(md.find("| f1 x f3 | electric | Body betrayal x concealment |"), std::string::npos);
  EXPECT_NE(md.find("| f1 x f4 | electric | Hiding x armor |"), std::string::npos);
  EXPECT_NE(md.find("Gate: 2 Electric -> advance"), std::string::npos);
  EXPECT_NE(md.find("### v1: Armor That Reveals"), std::string::npos);
  EXPECT_NE(md.find("Ratings: Novelty 5, Feasibility 4, Resonance 4, Timing 4"), std::string::npos);
  // Steps appear in protocol order.
  EXPECT_LT(md.find("## 1."), md.find("## 2."));
  EXPECT_LT(md.find("## 2."), md.find("## 3."));
  EXPECT_LT(md.find("## 3."), md.find("## 4."));
  EXPECT_LT(md.find("## 4."), md.find("## 5."));
  EXPECT_TRUE(md.ends_with("**Status: completed**\n"));
}

TEST(Export, DataRoundTripsByteIdentical) {
  Harness h;
  const auto id = build_case_d(h.svc);
  const auto doc = export_report(h.svc, id, ReportFormat::Data);
  EXPECT_EQ(doc, h.svc.load(id).payload.dump());
  EXPECT_EQ(reimport_data(doc), doc);

  TempDir dir;
  replay_case_b_http(dir.file("l.jsonl"), fixture("case_b.json"));
  ledger::Store store(dir.file("l.jsonl"), nullptr);
  Service svc(store, EngineConfig{}, fixed_clock(ts(kClock)));
  for (const auto* sid : {"precog-1", "ghosty-1", "integration-1"}) {
    const auto data = export_report(svc, sid, ReportFormat::Data);
    EXPECT_EQ(reimport_data(data), data) << sid;
  }
}

TEST(Export, AbortedSessionEndsWithReason) {
  Harness h;
  const auto id = build_all_boring(h.svc);
  const auto md = export_report(h.svc, id, ReportFormat::Markdown);
  EXPECT_TRUE(md.ends_with("**Terminal: aborted_no_electric**: No Electric collisions found\n")) << md;
}

TEST(Export, OverHttpAndCli) {
  TempDir dir;
  const auto store_path = dir.file("l.jsonl");
  {
    ledger::Store store(store_path, nullptr);
    Service svc(store, EngineConfig{}, fixed_clock(ts(kClock)));
    build_case_d(svc);
    LiveServer server(svc);
    auto c = server.client();
    const auto r = http_get(c, "/sessions/ghosty-1/export?format=data").body["data"];
    EXPECT_EQ(r["format"], "data");
    EXPECT_EQ(r["document"], svc.load("ghosty-1").payload.dump());
    EXPECT_EQ(http_get(c, "/sessions/ghosty-7/export").status, 404);
  }
  const auto out = cli_ok(cli_env(store_path, kClock), {"export", "ghosty-1", "--format", "md"});
  EXPECT_NE(out.find("Armor That Reveals"), std::string::npos);
  EXPECT_EQ(run_cli(cli_env(store_path, kClock), {"export", "ghosty-1", "--format", "pdf"}).code, 1);
}

// --- concurrency -------------------------------------------------------------------

TEST(Http, ConcurrentScoresOnOneSessionSerialize) {
  Harness h;
  const auto d = fixture("case_d.json");
  const auto id = h.svc.create({{"protocol", "ghosty"}, {"theme", d["theme"]}, {"fragments", d["fragments"]}})
                      .at("result")
                      .at("id")
                      .get<std::string>();
  for (const auto& [fid, text] : d["ghosts"].items())
    h.svc.step(id, "ghost", {{"fragment_id", fid}, {"structural_description", text}, {"checklist", all_ticked()}});
  LiveServer server(h.svc);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (const auto& s : d["scores"])
    threads.emplace_back([&, s] {
      auto c = server.client();
      if (http_post(c, "/sessions/" + id + "/steps/score", s).status == 200) ++ok;
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 10);
  const auto s = h.svc.load_collider(id);
  EXPECT_EQ(s.collisions.size(), 10u);
  EXPECT_EQ(h.svc.load(id).revision, 6 + 10);
}
