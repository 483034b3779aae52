#pragma once

// JSON encoding of every engine type. Encoding goes through nlohmann's ADL
// to_json hooks; decoding goes through parse<T>(json, path) so that every
// failure carries the dotted field path of the offending value.

#include <json.hpp>

#include "ghosty/collider.hpp"
#include "ghosty/integration.hpp"
#include "ghosty/precog.hpp"

namespace ghosty {

using json = nlohmann::json;

namespace io {

inline std::string join(const std::string& base, std::string_view key) {
  return base.empty() ? std::string(key) : base + "." + std::string(key);
}
inline std::string index(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object())
    throw Error(ErrorCode::BadRequest, (path.empty() ? std::string("body") : path) + " must be an object", path);
}

inline const json* find(const json& j, std::string_view key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(std::string(key));
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

inline const json& need(const json& j, std::string_view key, const std::string& path) {
  expect_object(j, path);
  const json* v = find(j, key);
  if (!v) throw Error(ErrorCode::MissingField, join(path, key) + " is required", join(path, key));
  return *v;
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw Error(ErrorCode::BadRequest, path + " must be a string", path);
  return v.get<std::string>();
}

inline std::string str(const json& j, std::string_view key, const std::string& path) {
  return as_string(need(j, key, path), join(path, key));
}

inline std::string str_or(const json& j, std::string_view key, const std::string& path, std::string fallback = {}) {
  const json* v = find(j, key);
  return v ? as_string(*v, join(path, key)) : std::move(fallback);
}

inline int integer(const json& j, std::string_view key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number_integer()) throw Error(ErrorCode::BadRequest, join(path, key) + " must be an integer", join(path, key));
  return v.get<int>();
}

inline double number(const json& j, std::string_view key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number()) throw Error(ErrorCode::BadRequest, join(path, key) + " must be a number", join(path, key));
  return v.get<double>();
}

inline bool boolean_or(const json& j, std::string_view key, const std::string& path, bool fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw Error(ErrorCode::BadRequest, join(path, key) + " must be a boolean", join(path, key));
  return v->get<bool>();
}

inline std::vector<std::string> strings_or_empty(const json& j, std::string_view key, const std::string& path) {
  const json* v = find(j, key);
  if (!v) return {};
  const std::string p = join(path, key);
  if (!v->is_array()) throw Error(ErrorCode::BadRequest, p + " must be a list of strings", p);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v->size(); ++i) out.push_back(as_string((*v)[i], index(p, i)));
  return out;
}

template <class E>
E enumeration(const json& j, std::string_view key, const std::string& path) {
  return parse_enum<E>(str(j, key, path), join(path, key));
}

template <class E>
std::optional<E> optional_enum(const json& j, std::string_view key, const std::string& path) {
  const json* v = find(j, key);
  if (!v || v->is_null()) return std::nullopt;
  return parse_enum<E>(as_string(*v, join(path, key)), join(path, key));
}

inline json timestamps(const std::map<std::string, Timestamp>& m) {
  json out = json::object();
  for (const auto& [k, t] : m) out[k] = format_iso8601(t);
  return out;
}

inline std::map<std::string, Timestamp> read_timestamps(const json& j, std::string_view key, const std::string& path) {
  std::map<std::string, Timestamp> out;
  const json* v = find(j, key);
  if (!v) return out;
  for (const auto& [k, t] : v->items()) {
    const std::string p = join(join(path, key), k);
    auto ts = parse_iso8601(as_string(t, p));
    if (!ts) throw Error(ErrorCode::BadRequest, p + " is not an ISO-8601 UTC timestamp", p);
    out[k] = *ts;
  }
  return out;
}

template <class E>
json enum_list(const std::vector<E>& v) {
  json out = json::array();
  for (E e : v) out.push_back(std::string(to_string(e)));
  return out;
}

template <class E>
std::vector<E> read_enum_list(const json& j, std::string_view key, const std::string& path) {
  const auto names = strings_or_empty(j, key, path);
  const std::string p = join(path, key);
  std::vector<E> out;
  for (std::size_t i = 0; i < names.size(); ++i) out.push_back(parse_enum<E>(names[i], index(p, i)));
  return out;
}

}  // namespace io

template <class T>
T parse(const json& j, const std::string& path = {});

template <class T>
std::vector<T> parse_list(const json& j, std::string_view key, const std::string& path, bool required = false) {
  const json* v = io::find(j, key);
  const std::string p = io::join(path, key);
  if (!v) {
    if (required) throw Error(ErrorCode::MissingField, p + " is required", p);
    return {};
  }
  if (!v->is_array()) throw Error(ErrorCode::BadRequest, p + " must be a list", p);
  std::vector<T> out;
  for (std::size_t i = 0; i < v->size(); ++i) out.push_back(parse<T>((*v)[i], io::index(p, i)));
  return out;
}

// ---------------------------------------------------------------------------
// collider

namespace collider {

inline void to_json(json& j, const Fragment& f) {
  j = {{"id", f.id}, {"text", f.text}, {"domain_tag", f.domain_tag}, {"source_kind", to_string(f.source_kind)}};
  if (f.confidence) j["confidence"] = to_string(*f.confidence);
}

inline void to_json(json& j, const GhostChecklist& c) {
  j = {{"uses_verbs", c.uses_verbs},
       {"includes_emotion", c.includes_emotion},
       {"cross_domain_comprehensible", c.cross_domain_comprehensible},
       {"reversibility_pass", c.reversibility_pass}};
}

inline void to_json(json& j, const Ghost& g) {
  j = {{"fragment_id", g.fragment_id},
       {"structural_description", g.structural_description},
       {"checklist", g.checklist},
       {"shallow_warning", g.shallow_warning},
       {"overlap_ratio", g.overlap_ratio}};
}

inline void to_json(json& j, const Collision& c) {
  j = {{"id", c.id}, {"pair", {c.pair.first, c.pair.second}}, {"score", to_string(c.score)}, {"rationale", c.rationale}};
}

inline void to_json(json& j, const Ratings& r) {
  j = {{"novelty", r.novelty}, {"feasibility", r.feasibility}, {"resonance", r.resonance}, {"timing", r.timing}};
}

inline void to_json(json& j, const Vision& v) {
  j = {{"id", v.id},           {"collision_id", v.collision_id},     {"name", v.name},
       {"one_line", v.one_line}, {"emotion", v.emotion},             {"cinematic_image", v.cinematic_image},
       {"why_now", v.why_now},   {"ratings", v.ratings},             {"advances", v.advances}};
}

inline void to_json(json& j, const RealityBridge& b) {
  j = {{"vision_id", b.vision_id},
       {"mvv", b.mvv},
       {"existing_capabilities", b.existing_capabilities},
       {"kill_conditions", b.kill_conditions},
       {"first_step_24h", b.first_step_24h}};
}

inline void to_json(json& j, const GateOutcome& g) {
  j = {{"advance", g.advance},
       {"electric_ids", g.electric_ids},
       {"electric_inflation", g.electric_inflation},
       {"inflation_advisory", g.inflation_advisory}};
}

inline void to_json(json& j, const Session& s) {
  j = {{"kind", "collider_session"},
       {"id", s.id},
       {"theme", s.theme},
       {"fragments", s.fragments},
       {"ghosts", s.ghosts},
       {"collisions", s.collisions},
       {"visions", s.visions},
       {"bridges", s.bridges},
       {"status", to_string(s.status)},
       {"status_history", io::enum_list(s.status_history)},
       {"step_timestamps", io::timestamps(s.step_timestamps)},
       {"abort_reason", s.abort_reason},
       {"advisories", s.advisories}};
}

}  // namespace collider

template <>
inline collider::Fragment parse(const json& j, const std::string& path) {
  collider::Fragment f;
  f.id = io::str_or(j, "id", path);
  f.text = io::str(j, "text", path);
  // "domain" is accepted as a shorthand for domain_tag.
  f.domain_tag = io::find(j, "domain_tag") ? io::str(j, "domain_tag", path) : io::str(j, "domain", path);
  if (io::find(j, "source_kind")) f.source_kind = io::enumeration<collider::SourceKind>(j, "source_kind", path);
  f.confidence = io::optional_enum<Confidence>(j, "confidence", path);
  return f;
}

template <>
inline collider::GhostChecklist parse(const json& j, const std::string& path) {
  io::expect_object(j, path);
  return {io::boolean_or(j, "uses_verbs", path, false), io::boolean_or(j, "includes_emotion", path, false),
          io::boolean_or(j, "cross_domain_comprehensible", path, false),
          io::boolean_or(j, "reversibility_pass", path, false)};
}

template <>
inline collider::Ghost parse(const json& j, const std::string& path) {
  collider::Ghost g;
  g.fragment_id = io::str(j, "fragment_id", path);
  g.structural_description = io::str(j, "structural_description", path);
  g.checklist = parse<collider::GhostChecklist>(io::need(j, "checklist", path), io::join(path, "checklist"));
  g.shallow_warning = io::boolean_or(j, "shallow_warning", path, false);
  if (io::find(j, "overlap_ratio")) g.overlap_ratio = io::number(j, "overlap_ratio", path);
  return g;
}

template <>
inline collider::FragmentPair parse(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto plus = s.find('+');
    if (plus == std::string::npos) throw Error(ErrorCode::BadRequest, path + " must look like 'f1+f2'", path);
    return collider::FragmentPair::of(s.substr(0, plus), s.substr(plus + 1));
  }
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::BadRequest, path + " must be two fragment ids", path);
  return collider::FragmentPair::of(io::as_string(j[0], io::index(path, 0)), io::as_string(j[1], io::index(path, 1)));
}

template <>
inline collider::Collision parse(const json& j, const std::string& path) {
  collider::Collision c;
  c.pair = parse<collider::FragmentPair>(io::need(j, "pair", path), io::join(path, "pair"));
  c.id = io::str_or(j, "id", path, c.pair.key());
  c.score = io::enumeration<collider::CollisionScore>(j, "score", path);
  c.rationale = io::str_or(j, "rationale", path);
  return c;
}

template <>
inline collider::Ratings parse(const json& j, const std::string& path) {
  if (j.is_array()) {
    if (j.size() != 4) throw Error(ErrorCode::BadRequest, path + " must hold 4 ratings", path);
    auto at = [&](std::size_t i, const char* name) {
      if (!j[i].is_number_integer())
        throw Error(ErrorCode::BadRequest, io::join(path, name) + " must be an integer", io::join(path, name));
      return j[i].get<int>();
    };
    return {at(0, "novelty"), at(1, "feasibility"), at(2, "resonance"), at(3, "timing")};
  }
  return {io::integer(j, "novelty", path), io::integer(j, "feasibility", path), io::integer(j, "resonance", path),
          io::integer(j, "timing", path)};
}

template <>
inline collider::Vision parse(const json& j, const std::string& path) {
  collider::Vision v;
  v.id = io::str_or(j, "id", path);
  v.collision_id = io::str(j, "collision_id", path);
  v.name = io::str_or(j, "name", path);
  v.one_line = io::str_or(j, "one_line", path);
  v.emotion = io::str_or(j, "emotion", path);
  v.cinematic_image = io::str_or(j, "cinematic_image", path);
  v.why_now = io::str_or(j, "why_now", path);
  v.ratings = parse<collider::Ratings>(io::need(j, "ratings", path), io::join(path, "ratings"));
  v.advances = io::boolean_or(j, "advances", path, false);
  return v;
}

template <>
inline collider::RealityBridge parse(const json& j, const std::string& path) {
  collider::RealityBridge b;
  b.vision_id = io::str(j, "vision_id", path);
  b.mvv = io::str_or(j, "mvv", path);
  b.existing_capabilities = io::strings_or_empty(j, "existing_capabilities", path);
  b.kill_conditions = io::strings_or_empty(j, "kill_conditions", path);
  b.first_step_24h = io::str_or(j, "first_step_24h", path);
  return b;
}

template <>
inline collider::Session parse(const json& j, const std::string& path) {
  collider::Session s;
  s.id = io::str(j, "id", path);
  s.theme = io::str_or(j, "theme", path);
  s.fragments = parse_list<collider::Fragment>(j, "fragments", path);
  s.ghosts = parse_list<collider::Ghost>(j, "ghosts", path);
  s.collisions = parse_list<collider::Collision>(j, "collisions", path);
  s.visions = parse_list<collider::Vision>(j, "visions", path);
  s.bridges = parse_list<collider::RealityBridge>(j, "bridges", path);
  s.status = io::enumeration<collider::Status>(j, "status", path);
  s.status_history = io::read_enum_list<collider::Status>(j, "status_history", path);
  s.step_timestamps = io::read_timestamps(j, "step_timestamps", path);
  s.abort_reason = io::str_or(j, "abort_reason", path);
  s.advisories = io::strings_or_empty(j, "advisories", path);
  return s;
}

// ---------------------------------------------------------------------------
// precog

namespace precog {

inline void to_json(json& j, const Evidence& e) { j = {{"claim", e.claim}, {"source", e.source}}; }

inline void to_json(json& j, const Signal& s) {
  j = {{"key", s.key},
       {"description", s.description},
       {"evidence", s.evidence},
       {"strength", to_string(s.strength)},
       {"direction", to_string(s.direction)},
       {"source_kind", to_string(s.source_kind)}};
  j["confidence"] = s.confidence ? json(to_string(*s.confidence)) : json(nullptr);
}

inline void to_json(json& j, const ConvergencePoint& c) {
  j = {{"id", c.id},
       {"signal_keys", c.signal_keys},
       {"hypothesis", c.hypothesis},
       {"causal_logic", c.causal_logic},
       {"confidence", to_string(c.confidence)},
       {"confidence_rationale", c.confidence_rationale},
       {"multi_sentence_warning", c.multi_sentence_warning}};
}

inline void to_json(json& j, const ContrarianScenario& s) {
  j = {{"description", s.description},
       {"historical_analogy", s.historical_analogy},
       {"preconditions", s.preconditions},
       {"collapse_trigger", s.collapse_trigger},
       {"probability_low", s.probability_low},
       {"probability_high", s.probability_high}};
}

inline void to_json(json& j, const ContrarianView& v) {
  j = {{"overestimation_reason", v.overestimation_reason}, {"scenarios", v.scenarios}};
}

inline void to_json(json& j, const TimingGrid& g) {
  j = {{"market_phase", to_string(g.market_phase)},
       {"competitive", to_string(g.competitive)},
       {"readiness", to_string(g.readiness)},
       {"external_window", to_string(g.external_window)},
       {"annotation", g.annotation}};
}

inline void to_json(json& j, const TimingJudgment& t) {
  j = {{"overall", to_string(t.overall)},
       {"polarity_sum", t.polarity_sum},
       {"escalated_contrarian_required", t.escalated_contrarian_required}};
}

inline void to_json(json& j, const GridEvaluation& e) {
  j = {{"label", e.label}, {"grid", e.grid}, {"judgment", e.judgment}};
}

inline void to_json(json& j, const ActionItem& a) {
  j = {{"id", a.id},
       {"category", to_string(a.category)},
       {"action", a.action},
       {"trigger", a.trigger},
       {"cost_estimate", a.cost_estimate}};
}

inline void to_json(json& j, const Session& s) {
  j = {{"kind", "precog_session"},
       {"id", s.id},
       {"theme_key", s.theme_key},
       {"horizon", s.horizon},
       {"signals", s.signals},
       {"convergences", s.convergences},
       {"contrarian", s.contrarian ? json(*s.contrarian) : json(nullptr)},
       {"grid_evaluations", s.grid_evaluations},
       {"actions", s.actions},
       {"status", to_string(s.status)},
       {"status_history", io::enum_list(s.status_history)},
       {"step_timestamps", io::timestamps(s.step_timestamps)},
       {"advisories", s.advisories}};
}

}  // namespace precog

template <>
inline precog::Evidence parse(const json& j, const std::string& path) {
  if (j.is_string()) {
    // "claim|source" shorthand
    const auto s = j.get<std::string>();
    const auto bar = s.find('|');
    if (bar == std::string::npos) return {s, ""};
    return {trim(s.substr(0, bar)), trim(s.substr(bar + 1))};
  }
  return {io::str_or(j, "claim", path), io::str_or(j, "source", path)};
}

template <>
inline precog::Signal parse(const json& j, const std::string& path) {
  precog::Signal s;
  s.key = io::str(j, "key", path);
  s.description = io::str_or(j, "description", path);
  s.evidence = parse_list<precog::Evidence>(j, "evidence", path);
  s.strength = io::enumeration<precog::Strength>(j, "strength", path);
  s.direction = io::enumeration<precog::Direction>(j, "direction", path);
  s.confidence = io::optional_enum<Confidence>(j, "confidence", path);
  if (io::find(j, "source_kind")) s.source_kind = io::enumeration<precog::SignalSource>(j, "source_kind", path);
  return s;
}

template <>
inline precog::ConvergencePoint parse(const json& j, const std::string& path) {
  precog::ConvergencePoint c;
  c.id = io::str_or(j, "id", path);
  c.signal_keys = io::strings_or_empty(j, "signal_keys", path);
  c.hypothesis = io::str_or(j, "hypothesis", path);
  c.causal_logic = io::str_or(j, "causal_logic", path);
  c.confidence = io::enumeration<precog::ConvergenceConfidence>(j, "confidence", path);
  c.confidence_rationale = io::str_or(j, "confidence_rationale", path);
  c.multi_sentence_warning = io::boolean_or(j, "multi_sentence_warning", path, false);
  return c;
}

template <>
inline precog::ContrarianScenario parse(const json& j, const std::string& path) {
  precog::ContrarianScenario s;
  s.description = io::str_or(j, "description", path);
  s.historical_analogy = io::str_or(j, "historical_analogy", path);
  s.preconditions = io::strings_or_empty(j, "preconditions", path);
  s.collapse_trigger = io::str_or(j, "collapse_trigger", path);
  s.probability_low = io::number(j, "probability_low", path);
  s.probability_high = io::number(j, "probability_high", path);
  return s;
}

template <>
inline precog::ContrarianView parse(const json& j, const std::string& path) {
  return {io::str_or(j, "overestimation_reason", path), parse_list<precog::ContrarianScenario>(j, "scenarios", path)};
}

template <>
inline precog::TimingGrid parse(const json& j, const std::string& path) {
  return {io::enumeration<precog::MarketPhase>(j, "market_phase", path),
          io::enumeration<precog::Competitive>(j, "competitive", path),
          io::enumeration<precog::Readiness>(j, "readiness", path),
          io::enumeration<precog::ExternalWindow>(j, "external_window", path), io::str_or(j, "annotation", path)};
}

template <>
inline precog::TimingJudgment parse(const json& j, const std::string& path) {
  return {io::enumeration<precog::Overall>(j, "overall", path), io::integer(j, "polarity_sum", path),
          io::boolean_or(j, "escalated_contrarian_required", path, false)};
}

template <>
inline precog::GridEvaluation parse(const json& j, const std::string& path) {
  return {io::str(j, "label", path), parse<precog::TimingGrid>(io::need(j, "grid", path), io::join(path, "grid")),
          parse<precog::TimingJudgment>(io::need(j, "judgment", path), io::join(path, "judgment"))};
}

template <>
inline precog::ActionItem parse(const json& j, const std::string& path) {
  precog::ActionItem a;
  a.id = io::str_or(j, "id", path);
  a.category = io::enumeration<precog::ActionCategory>(j, "category", path);
  a.action = io::str_or(j, "action", path);
  a.trigger = io::str_or(j, "trigger", path);
  a.cost_estimate = io::str_or(j, "cost_estimate", path);
  return a;
}

template <>
inline precog::Session parse(const json& j, const std::string& path) {
  precog::Session s;
  s.id = io::str(j, "id", path);
  s.theme_key = io::str_or(j, "theme_key", path);
  s.horizon = io::str_or(j, "horizon", path);
  s.signals = parse_list<precog::Signal>(j, "signals", path);
  s.convergences = parse_list<precog::ConvergencePoint>(j, "convergences", path);
  if (const json* c = io::find(j, "contrarian")) s.contrarian = parse<precog::ContrarianView>(*c, io::join(path, "contrarian"));
  s.grid_evaluations = parse_list<precog::GridEvaluation>(j, "grid_evaluations", path);
  s.actions = parse_list<precog::ActionItem>(j, "actions", path);
  s.status = io::enumeration<precog::Status>(j, "status", path);
  s.status_history = io::read_enum_list<precog::Status>(j, "status_history", path);
  s.step_timestamps = io::read_timestamps(j, "step_timestamps", path);
  s.advisories = io::strings_or_empty(j, "advisories", path);
  return s;
}

// ---------------------------------------------------------------------------
// integration

namespace integration {

inline void to_json(json& j, const VisionMapping& m) {
  j = {{"vision_id", m.vision_id}, {"grid_label", m.grid_label}, {"action_ids", m.action_ids}};
}

inline void to_json(json& j, const Run& r) {
  j = {{"kind", "integration_run"},
       {"id", r.id},
       {"precog_session_id", r.precog_session_id},
       {"selected_convergences", r.selected_convergences},
       {"external_fragments", r.external_fragments},
       {"collider_session_id", r.collider_session_id},
       {"mappings", r.mappings},
       {"actions_emitted", r.actions_emitted}};
}

}  // namespace integration

template <>
inline integration::VisionMapping parse(const json& j, const std::string& path) {
  return {io::str(j, "vision_id", path), io::str(j, "grid_label", path), io::strings_or_empty(j, "action_ids", path)};
}

template <>
inline integration::Run parse(const json& j, const std::string& path) {
  integration::Run r;
  r.id = io::str(j, "id", path);
  r.precog_session_id = io::str(j, "precog_session_id", path);
  r.selected_convergences = io::strings_or_empty(j, "selected_convergences", path);
  r.external_fragments = parse_list<collider::Fragment>(j, "external_fragments", path);
  r.collider_session_id = io::str(j, "collider_session_id", path);
  r.mappings = parse_list<integration::VisionMapping>(j, "mappings", path);
  r.actions_emitted = io::boolean_or(j, "actions_emitted", path, false);
  return r;
}

}  // namespace ghosty
