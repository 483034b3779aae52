#pragma once

// Store-backed session service. Every mutating step loads the latest snapshot
// of a session from the ledger, applies one core operation, and appends the new
// snapshot as record "<session id>@<revision>". The CLI and the HTTP server are
// thin adapters over this class, so identical step sequences produce identical
// ledgers.

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ghosty/collider.hpp"
#include "ghosty/config.hpp"
#include "ghosty/integration.hpp"
#include "ghosty/ledger.hpp"
#include "ghosty/precog.hpp"
#include "ghosty/serialize.hpp"

namespace ghosty::api {

/// Latest snapshot of one session-like entity, plus its revision count.
struct Snapshot {
  ledger::Protocol protocol = ledger::Protocol::Ghosty;
  std::string kind;
  json payload;
  int revision = 0;
};

/// Thrown when a step leaves a terminal state behind (pre-flight abort): the
/// snapshot was persisted, but the caller must still see the error.
class PersistedError : public Error {
 public:
  PersistedError(const Error& e, json session) : Error(e), session_(std::move(session)) {}
  const json& session() const { return session_; }

 private:
  json session_;
};

class Service {
 public:
  Service(ledger::Store& store, EngineConfig cfg = {}, Clock clock = system_clock())
      : store_(store), cfg_(std::move(cfg)), clock_(std::move(clock)) {}

  const EngineConfig& config() const { return cfg_; }
  ledger::Store& store() { return store_; }

  // -------------------------------------------------------------------------
  // Reads

  /// Replays the store and returns the latest snapshot of every entity.
  std::map<std::string, Snapshot> snapshots() {
    std::map<std::string, Snapshot> out;
    for (const auto& r : store_.records()) {
      const std::string kind = r.payload_kind();
      if (kind != "collider_session" && kind != "precog_session" && kind != "integration_run") continue;
      auto& snap = out[r.payload.at("id").get<std::string>()];
      snap.protocol = r.protocol;
      snap.kind = kind;
      snap.payload = r.payload;
      ++snap.revision;
    }
    return out;
  }

  Snapshot load(const std::string& id) {
    auto all = snapshots();
    auto it = all.find(id);
    if (it == all.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'", "session_id");
    return it->second;
  }

  collider::Session load_collider(const std::string& id) { return parse<collider::Session>(expect(id, "collider_session")); }
  precog::Session load_precog(const std::string& id) { return parse<precog::Session>(expect(id, "precog_session")); }
  integration::Run load_run(const std::string& id) { return parse<integration::Run>(expect(id, "integration_run")); }

  // -------------------------------------------------------------------------
  // Creation

  /// body: {"protocol": "ghosty"|"precog"|"integration", ...}
  ///  ghosty:      {"theme", optional "fragments": [...] (3-5, starts the session)}
  ///  precog:      {"theme" | "theme_key", optional "horizon"}
  ///  integration: {"theme", "precog_session_id", "selection": [...], "externals": [...]}
  json create(const json& body) {
    io::expect_object(body, "");
    const auto protocol = io::enumeration<ledger::Protocol>(body, "protocol", "");
    std::lock_guard lk(create_mu_);
    switch (protocol) {
      case ledger::Protocol::Ghosty: return create_collider(body);
      case ledger::Protocol::Precog: return create_precog(body);
      case ledger::Protocol::Integration: return create_integration(body);
    }
    throw Error(ErrorCode::BadRequest, "unknown protocol", "protocol");
  }

  // -------------------------------------------------------------------------
  // Steps

  /// Applies one named step. Returns {"session": snapshot, "result": ...}.
  json step(const std::string& id, const std::string& step_name, const json& body) {
    auto lock = session_lock(id);
    const Snapshot snap = load(id);
    if (snap.kind == "collider_session") return collider_step(snap, step_name, body);
    if (snap.kind == "precog_session") return precog_step(snap, step_name, body);
    return integration_step(snap, step_name, body);
  }

  /// Gate view: collision gate, vision gates, timing judgments and escalation.
  json gates(const std::string& id) {
    const Snapshot snap = load(id);
    if (snap.kind == "collider_session") return collider_gates(parse<collider::Session>(snap.payload));
    if (snap.kind == "precog_session") return precog_gates(parse<precog::Session>(snap.payload));
    const auto run = parse<integration::Run>(snap.payload);
    return {{"collider", gates(run.collider_session_id)}, {"precog", gates(run.precog_session_id)}};
  }

  // -------------------------------------------------------------------------
  // Longitudinal views

  /// Completed PRECOG sessions on one theme, oldest first.
  std::vector<precog::Session> theme_sessions(const std::string& theme_key) {
    std::vector<std::string> order;
    std::map<std::string, json> latest;
    for (const auto& r : store_.records()) {
      if (r.payload_kind() != "precog_session" || r.theme_key != theme_key) continue;
      const auto id = r.payload.at("id").get<std::string>();
      if (!latest.contains(id)) order.push_back(id);
      latest[id] = r.payload;
    }
    std::vector<precog::Session> out;
    for (const auto& id : order) {
      auto s = parse<precog::Session>(latest[id]);
      if (s.status == precog::Status::Completed) out.push_back(std::move(s));
    }
    return out;
  }

  /// Signal delta between the two most recent completed sessions on a theme,
  /// or between two named sessions. Priority (New/Dead) rows come first.
  json history_diff(const std::string& theme_key, const std::string& from = {}, const std::string& to = {}) {
    precog::Session prev, curr;
    if (!from.empty() || !to.empty()) {
      if (from.empty() || to.empty())
        throw Error(ErrorCode::BadRequest, "give both from and to, or neither", from.empty() ? "from" : "to");
      prev = load_precog(from);
      curr = load_precog(to);
    } else {
      auto sessions = theme_sessions(theme_key);
      if (sessions.size() < 2)
        throw Error(ErrorCode::BadRequest,
                    "theme '" + theme_key + "' has " + std::to_string(sessions.size()) +
                        " completed session(s); a diff needs two",
                    "theme_key");
      prev = sessions[sessions.size() - 2];
      curr = sessions.back();
    }
    auto deltas = ledger::diff_signals(prev.signals, curr.signals);
    std::stable_partition(deltas.begin(), deltas.end(), [](const ledger::SignalDelta& d) { return d.priority; });
    return {{"theme_key", theme_key}, {"from", prev.id}, {"to", curr.id}, {"deltas", deltas}};
  }

  // -------------------------------------------------------------------------
  // Predictions and rubric

  json add_prediction(const json& body) {
    std::lock_guard lk(create_mu_);
    auto p = parse<ledger::PredictionRecord>(body);
    const auto id = ledger::record_prediction(store_, std::move(p), clock_());
    return ledger::predictions(store_).at(id);
  }

  json evaluate_prediction(const std::string& id, const json& body) {
    auto lock = session_lock("prediction:" + id);
    const auto outcome = io::enumeration<ledger::Outcome>(body, "outcome", "");
    auto p = ledger::evaluate_prediction(store_, id, outcome, io::str_or(body, "timing_accuracy", ""),
                                         io::str_or(body, "contrarian_value", ""), clock_());
    return {{"prediction", p}, {"summary", ledger::accuracy_summary(store_, p.theme_key)}};
  }

  json rubric(const json& body, bool persist = true) {
    io::expect_object(body, "");
    const json& scores_j = io::need(body, "scores", "");
    if (!scores_j.is_array()) throw Error(ErrorCode::BadRubric, "scores must be a list of 8 integers", "scores");
    std::vector<int> scores;
    for (std::size_t i = 0; i < scores_j.size(); ++i) {
      if (!scores_j[i].is_number_integer())
        throw Error(ErrorCode::BadRubric, "scores must be integers", io::index("scores", i));
      scores.push_back(scores_j[i].get<int>());
    }
    auto labels = io::find(body, "labels") ? io::strings_or_empty(body, "labels", "") : cfg_.rubric_labels;
    auto score = ledger::score_rubric(io::str(body, "target_ref", ""), scores, std::move(labels));
    if (persist) {
      std::lock_guard lk(create_mu_);
      const auto protocol = io::find(body, "protocol") ? io::enumeration<ledger::Protocol>(body, "protocol", "")
                                                       : ledger::Protocol::Ghosty;
      std::size_t n = 0;
      for (const auto& r : store_.records()) n += r.payload_kind() == "rubric" ? 1 : 0;
      store_.append({"rubric-" + std::to_string(n + 1), protocol, io::str_or(body, "theme_key", ""), clock_(),
                     ledger::kSchemaVersion, json(score)});
    }
    return score;
  }

 private:
  json expect(const std::string& id, const char* kind) {
    auto snap = load(id);
    if (snap.kind != kind)
      throw Error(ErrorCode::UnknownSession, "'" + id + "' is a " + snap.kind + ", not a " + kind, "session_id");
    return snap.payload;
  }

  std::unique_lock<std::mutex> session_lock(const std::string& id) {
    std::mutex* m;
    {
      std::lock_guard lk(locks_mu_);
      auto& slot = locks_[id];
      if (!slot) slot = std::make_unique<std::mutex>();
      m = slot.get();
    }
    return std::unique_lock(*m);
  }

  std::string next_id(const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& [id, snap] : snapshots())
      if (id.rfind(prefix + "-", 0) == 0) ++n;
    return prefix + "-" + std::to_string(n + 1);
  }

  void persist(ledger::Protocol protocol, const std::string& theme, const json& payload, int revision) {
    const std::string id = payload.at("id").get<std::string>();
    store_.append({id + "@" + std::to_string(revision), protocol, theme, clock_(), ledger::kSchemaVersion, payload});
  }

  // --- collider -------------------------------------------------------------

  json create_collider(const json& body) {
    collider::Session s;
    s.id = next_id("ghosty");
    s.theme = io::find(body, "theme") ? io::str(body, "theme", "") : io::str_or(body, "theme_key", "");
    require_text(s.theme, "theme");
    const Timestamp now = clock_();
    s.step_timestamps["draft"] = now;
    const auto fragments = parse_list<collider::Fragment>(body, "fragments", "");
    if (!fragments.empty()) {
      if (fragments.size() < collider::kMinFragments || fragments.size() > collider::kMaxFragments)
        throw Error(ErrorCode::CountOutOfRange, "need 3-5 fragments, got " + std::to_string(fragments.size()),
                    "fragments");
      for (auto f : fragments) collider::add_fragment(s, std::move(f));
      collider::start(s, now);
    }
    json payload = s;
    persist(ledger::Protocol::Ghosty, s.theme, payload, 1);
    if (s.status == collider::Status::AbortedPreflight)
      throw PersistedError(Error(ErrorCode::HomogeneousFragments, s.abort_reason, "fragments"), payload);
    return {{"session", payload}, {"result", {{"id", s.id}}}};
  }

  json collider_step(const Snapshot& snap, const std::string& step, const json& body) {
    auto s = parse<collider::Session>(snap.payload);
    const Timestamp now = clock_();
    const auto& cc = cfg_.collider;
    json result = json::object();
    if (step == "fragment") {
      result = collider::add_fragment(s, parse<collider::Fragment>(body));
    } else if (step == "start") {
      collider::start(s, now);
    } else if (step == "ghost") {
      const auto& g = collider::attach_ghost(s, parse<collider::Ghost>(body), now, cc);
      result = {{"fragment_id", g.fragment_id}, {"shallow_warning", g.shallow_warning}, {"overlap_ratio", g.overlap_ratio}};
    } else if (step == "score") {
      const auto pair = parse<collider::FragmentPair>(io::need(body, "pair", ""), "pair");
      const auto score = io::enumeration<collider::CollisionScore>(body, "score", "");
      result = collider::score_collision(s, pair, score, io::str_or(body, "rationale", ""), now, cc);
      if (s.status != collider::Status::Colliding) result["gate"] = collider::evaluate_collision_gate(s, cc);
    } else if (step == "gate") {
      result = collider::collision_gate(s, now, cc);
    } else if (step == "vision") {
      const auto g = collider::crystallize_vision(s, parse<collider::Vision>(body));
      result = {{"vision_id", g.vision_id}, {"advances", g.advances}};
    } else if (step == "bridge") {
      collider::attach_bridge(s, parse<collider::RealityBridge>(body), now);
    } else if (step == "complete" || step == "finalize") {
      collider::complete(s, now);
    } else {
      throw Error(ErrorCode::BadRequest, "unknown ghosty step '" + step + "'", "step_name");
    }
    json payload = s;
    persist(ledger::Protocol::Ghosty, s.theme, payload, snap.revision + 1);
    if (step == "start" && s.status == collider::Status::AbortedPreflight)
      throw PersistedError(Error(ErrorCode::HomogeneousFragments, s.abort_reason, "fragments"), payload);
    return {{"session", payload}, {"result", result}};
  }

  json collider_gates(const collider::Session& s) {
    json out = {{"session_id", s.id}, {"status", to_string(s.status)}};
    const auto total = s.fragments.size() >= 2 ? collider::pair_count(s) : 0;
    out["pairs_total"] = total;
    out["pairs_scored"] = s.collisions.size();
    if (s.status == collider::Status::Colliding) {
      json pending = json::array();
      for (const auto& p : collider::enumerate_pairs(s))
        if (!s.find_collision(p.key())) pending.push_back(p.key());
      out["pending_pairs"] = pending;
    }
    if (total > 0 && s.collisions.size() == total)
      out["collision_gate"] = collider::evaluate_collision_gate(s, cfg_.collider);
    else
      out["collision_gate"] = nullptr;
    json visions = json::array();
    for (const auto& v : s.visions)
      visions.push_back({{"vision_id", v.id}, {"advances", v.advances}, {"bridged", s.find_bridge(v.id) != nullptr}});
    out["visions"] = visions;
    out["unbridged_visions"] = collider::unbridged_visions(s);
    out["abort_reason"] = s.abort_reason;
    out["advisories"] = s.advisories;
    return out;
  }

  // --- precog ---------------------------------------------------------------

  json create_precog(const json& body) {
    const std::string theme = io::find(body, "theme_key") ? io::str(body, "theme_key", "") : io::str_or(body, "theme", "");
    require_text(theme, "theme");
    auto s = precog::create_session(next_id("precog"), theme, io::str_or(body, "horizon", ""), clock_());
    json payload = s;
    persist(ledger::Protocol::Precog, s.theme_key, payload, 1);
    return {{"session", payload}, {"result", {{"id", s.id}}}};
  }

  json precog_step(const Snapshot& snap, const std::string& step, const json& body) {
    auto s = parse<precog::Session>(snap.payload);
    const Timestamp now = clock_();
    json result = json::object();
    if (step == "signal") {
      precog::add_signal(s, parse<precog::Signal>(body));
    } else if (step == "convergence") {
      result = precog::add_convergence(s, parse<precog::ConvergencePoint>(body), now);
    } else if (step == "contrarian") {
      precog::set_contrarian(s, parse<precog::ContrarianView>(body), now);
    } else if (step == "grid") {
      const json* g = io::find(body, "grid");
      const auto grid = parse<precog::TimingGrid>(g ? *g : body, g ? "grid" : "");
      result = precog::add_grid_evaluation(s, io::str(body, "label", ""), grid, now, cfg_.timing);
    } else if (step == "action") {
      result = precog::add_action(s, parse<precog::ActionItem>(body), now);
    } else if (step == "finalize" || step == "complete") {
      precog::finalize(s, now);
    } else {
      throw Error(ErrorCode::BadRequest, "unknown precog step '" + step + "'", "step_name");
    }
    json payload = s;
    persist(ledger::Protocol::Precog, s.theme_key, payload, snap.revision + 1);
    return {{"session", payload}, {"result", result}};
  }

  json precog_gates(const precog::Session& s) {
    json evals = json::array();
    for (const auto& e : s.grid_evaluations) evals.push_back({{"label", e.label}, {"judgment", e.judgment}});
    return {{"session_id", s.id},
            {"status", to_string(s.status)},
            {"signals", s.signals.size()},
            {"grid_evaluations", evals},
            {"escalation_required", s.escalation_required()},
            {"completion_gaps", precog::completion_gaps(s)},
            {"advisories", s.advisories}};
  }

  // --- integration ----------------------------------------------------------

  json create_integration(const json& body) {
    const std::string precog_id = io::str(body, "precog_session_id", "");
    auto p = load_precog(precog_id);
    const auto selection = io::strings_or_empty(body, "selection", "");
    auto externals = parse_list<collider::Fragment>(body, "externals", "");
    auto fragments = integration::convergences_to_fragments(p, selection, externals);
    const std::string theme = io::str_or(body, "theme", "", p.theme_key);

    collider::Session c;
    c.id = next_id("ghosty");
    c.theme = theme;
    const Timestamp now = clock_();
    c.step_timestamps["draft"] = now;
    for (auto& f : fragments) collider::add_fragment(c, std::move(f));
    collider::start(c, now);

    integration::Run run;
    run.id = next_id("integration");
    run.precog_session_id = p.id;
    run.selected_convergences = selection;
    for (std::size_t i = selection.size(); i < c.fragments.size(); ++i) run.external_fragments.push_back(c.fragments[i]);
    run.collider_session_id = c.id;

    json cpayload = c;
    persist(ledger::Protocol::Ghosty, c.theme, cpayload, 1);
    json rpayload = run;
    persist(ledger::Protocol::Integration, p.theme_key, rpayload, 1);
    if (c.status == collider::Status::AbortedPreflight)
      throw PersistedError(Error(ErrorCode::HomogeneousFragments, c.abort_reason, "externals"), cpayload);
    return {{"session", rpayload}, {"result", {{"id", run.id}, {"collider_session_id", c.id}, {"fragments", c.fragments}}}};
  }

  json integration_step(const Snapshot& snap, const std::string& step, const json& body) {
    auto run = parse<integration::Run>(snap.payload);
    auto plock = session_lock(run.precog_session_id);
    const Snapshot psnap = load(run.precog_session_id);
    auto p = parse<precog::Session>(psnap.payload);
    const auto c = load_collider(run.collider_session_id);
    const Timestamp now = clock_();
    json result;
    if (step == "map") {
      integration::AxisReadings axes;
      axes.market_phase = io::enumeration<precog::MarketPhase>(body, "market_phase", "");
      axes.competitive = io::enumeration<precog::Competitive>(body, "competitive", "");
      axes.external_window = io::enumeration<precog::ExternalWindow>(body, "external_window", "");
      axes.readiness = io::optional_enum<precog::Readiness>(body, "readiness", "");
      axes.annotation = io::str_or(body, "annotation", "");
      result = integration::map_vision(run, p, c, io::str(body, "vision_id", ""), io::str_or(body, "label", ""), axes,
                                       now, cfg_.readiness, cfg_.timing);
    } else if (step == "actions") {
      result = {{"action_ids", integration::emit_actions(run, p, c, now)}};
    } else {
      throw Error(ErrorCode::BadRequest, "unknown integration step '" + step + "'", "step_name");
    }
    json ppayload = p;
    persist(ledger::Protocol::Precog, p.theme_key, ppayload, psnap.revision + 1);
    json rpayload = run;
    persist(ledger::Protocol::Integration, p.theme_key, rpayload, snap.revision + 1);
    return {{"session", rpayload}, {"result", result}, {"precog_session", ppayload}};
  }

  ledger::Store& store_;
  EngineConfig cfg_;
  Clock clock_;
  std::mutex create_mu_;
  std::mutex locks_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace ghosty::api
