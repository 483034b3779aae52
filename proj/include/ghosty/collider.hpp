#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ghosty/common.hpp"

namespace ghosty::collider {

enum class SourceKind { QuantitativeData, Observation, Aesthetic, GutFeeling, AbsentPattern, Experience, Constraint };

enum class CollisionScore { Boring, Interesting, Electric };

enum class Status { Draft, Ghosting, Colliding, Crystallizing, Bridging, Completed, AbortedPreflight, AbortedNoElectric };

}  // namespace ghosty::collider

namespace ghosty {

template <>
struct EnumNames<collider::SourceKind> {
  using K = collider::SourceKind;
  static constexpr std::array<std::pair<K, std::string_view>, 7> table{{
      {K::QuantitativeData, "quantitative_data"},
      {K::Observation, "observation"},
      {K::Aesthetic, "aesthetic"},
      {K::GutFeeling, "gut_feeling"},
      {K::AbsentPattern, "absent_pattern"},
      {K::Experience, "experience"},
      {K::Constraint, "constraint"},
  }};
};

template <>
struct EnumNames<collider::CollisionScore> {
  using S = collider::CollisionScore;
  static constexpr std::array<std::pair<S, std::string_view>, 3> table{{
      {S::Boring, "boring"},
      {S::Interesting, "interesting"},
      {S::Electric, "electric"},
  }};
};

template <>
struct EnumNames<collider::Status> {
  using S = collider::Status;
  static constexpr std::array<std::pair<S, std::string_view>, 8> table{{
      {S::Draft, "draft"},
      {S::Ghosting, "ghosting"},
      {S::Colliding, "colliding"},
      {S::Crystallizing, "crystallizing"},
      {S::Bridging, "bridging"},
      {S::Completed, "completed"},
      {S::AbortedPreflight, "aborted_preflight"},
      {S::AbortedNoElectric, "aborted_no_electric"},
  }};
};

}  // namespace ghosty

namespace ghosty::collider {

inline constexpr std::size_t kMinFragments = 3;
inline constexpr std::size_t kMaxFragments = 5;

struct Config {
  /// Shallow-ghost warning fires when the token overlap ratio exceeds this.
  double shallow_overlap_threshold = 0.6;
  /// Softer Electric-inflation advisory above this Electric share.
  double inflation_advisory_ratio = 0.7;
};

struct Fragment {
  std::string id;
  std::string text;
  std::string domain_tag;
  SourceKind source_kind = SourceKind::Observation;
  /// Only set on fragments carried over from a PRECOG convergence.
  std::optional<Confidence> confidence;

  bool operator==(const Fragment&) const = default;
};

struct GhostChecklist {
  bool uses_verbs = false;
  bool includes_emotion = false;
  bool cross_domain_comprehensible = false;
  bool reversibility_pass = false;

  bool complete() const { return uses_verbs && includes_emotion && cross_domain_comprehensible && reversibility_pass; }
  bool operator==(const GhostChecklist&) const = default;
};

struct Ghost {
  std::string fragment_id;
  std::string structural_description;
  GhostChecklist checklist;
  // Metadata filled in by attach_ghost.
  bool shallow_warning = false;
  double overlap_ratio = 0.0;

  bool operator==(const Ghost&) const = default;
};

/// Unordered pair of fragment ids, stored with first < second.
struct FragmentPair {
  std::string first;
  std::string second;

  static FragmentPair of(std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return {std::move(a), std::move(b)};
  }
  /// Collision ids are derived from the pair, e.g. "f1+f3".
  std::string key() const { return first + "+" + second; }

  auto operator<=>(const FragmentPair&) const = default;
};

struct Collision {
  std::string id;
  FragmentPair pair;
  CollisionScore score = CollisionScore::Boring;
  std::string rationale;

  bool operator==(const Collision&) const = default;
};

struct Ratings {
  int novelty = 0;
  int feasibility = 0;
  int resonance = 0;
  int timing = 0;

  int min() const { return std::min({novelty, feasibility, resonance, timing}); }
  bool operator==(const Ratings&) const = default;
};

struct Vision {
  std::string id;
  std::string collision_id;
  std::string name;
  std::string one_line;
  std::string emotion;
  std::string cinematic_image;
  std::string why_now;
  Ratings ratings;
  bool advances = false;

  bool operator==(const Vision&) const = default;
};

struct RealityBridge {
  std::string vision_id;
  std::string mvv;
  std::vector<std::string> existing_capabilities;
  std::vector<std::string> kill_conditions;
  std::string first_step_24h;

  bool operator==(const RealityBridge&) const = default;
};

struct Session {
  std::string id;
  std::string theme;
  std::vector<Fragment> fragments;
  std::vector<Ghost> ghosts;
  std::vector<Collision> collisions;
  std::vector<Vision> visions;
  std::vector<RealityBridge> bridges;
  Status status = Status::Draft;
  /// Status name -> time the session entered it.
  std::map<std::string, Timestamp> step_timestamps;
  /// Every status the session has occupied, in order.
  std::vector<Status> status_history{Status::Draft};
  std::string abort_reason;
  std::vector<std::string> advisories;

  const Fragment* find_fragment(std::string_view fid) const {
    for (const auto& f : fragments)
      if (f.id == fid) return &f;
    return nullptr;
  }
  const Ghost* find_ghost(std::string_view fid) const {
    for (const auto& g : ghosts)
      if (g.fragment_id == fid) return &g;
    return nullptr;
  }
  const Collision* find_collision(std::string_view cid) const {
    for (const auto& c : collisions)
      if (c.id == cid) return &c;
    return nullptr;
  }
  const Vision* find_vision(std::string_view vid) const {
    for (const auto& v : visions)
      if (v.id == vid) return &v;
    return nullptr;
  }
  const RealityBridge* find_bridge(std::string_view vid) const {
    for (const auto& b : bridges)
      if (b.vision_id == vid) return &b;
    return nullptr;
  }
  bool terminal() const {
    return status == Status::Completed || status == Status::AbortedPreflight || status == Status::AbortedNoElectric;
  }

  bool operator==(const Session&) const = default;
};

inline void enter(Session& s, Status next, Timestamp now) {
  s.status = next;
  s.status_history.push_back(next);
  s.step_timestamps[std::string(to_string(next))] = now;
}

inline void require_phase(const Session& s, std::initializer_list<Status> allowed) {
  for (Status a : allowed)
    if (s.status == a) return;
  std::string names;
  for (Status a : allowed) {
    if (!names.empty()) names += " or ";
    names += to_string(a);
  }
  throw Error(ErrorCode::WrongPhase,
              "session is " + std::string(to_string(s.status)) + ", operation requires " + names);
}

// ---------------------------------------------------------------------------
// Pre-flight diversity

struct CheckResult {
  bool pass = true;
  std::string reason;
};

/// Fails when every fragment carries the same (trimmed, case-folded) domain tag.
inline CheckResult preflight_diversity(const std::vector<Fragment>& fragments) {
  std::set<std::string> tags;
  for (const auto& f : fragments) tags.insert(casefold(trim(f.domain_tag)));
  if (tags.size() >= 2) return {true, {}};
  const std::string tag = tags.empty() ? std::string{} : *tags.begin();
  return {false, "homogeneous fragments: every fragment is tagged '" + tag +
                     "'; add at least one external-domain fragment"};
}

// ---------------------------------------------------------------------------
// Fragment harvest

inline void validate_fragment(const Fragment& f, const std::string& path) {
  require_text(f.id, path + ".id");
  require_text(f.text, path + ".text");
  require_text(f.domain_tag, path + ".domain_tag");
}

/// Appends a fragment while the session is still in Draft. Ids default to f1, f2, ...
inline const Fragment& add_fragment(Session& s, Fragment f) {
  require_phase(s, {Status::Draft});
  if (s.fragments.size() >= kMaxFragments)
    throw Error(ErrorCode::CountOutOfRange, "at most 5 fragments per session", "fragments");
  if (f.id.empty()) f.id = "f" + std::to_string(s.fragments.size() + 1);
  validate_fragment(f, "fragment");
  if (s.find_fragment(f.id)) throw Error(ErrorCode::DuplicateFragment, "fragment id '" + f.id + "' already used", "fragment.id");
  s.fragments.push_back(std::move(f));
  return s.fragments.back();
}

/// Closes the harvest: checks the 3..5 bound, then the pre-flight diversity
/// check. A homogeneous set is a recorded terminal outcome (AbortedPreflight),
/// so the session is returned rather than discarded; callers inspect status.
inline void start(Session& s, Timestamp now = now_utc()) {
  require_phase(s, {Status::Draft});
  const auto n = s.fragments.size();
  if (n < kMinFragments || n > kMaxFragments)
    throw Error(ErrorCode::CountOutOfRange,
                "need 3-5 fragments to leave Draft, have " + std::to_string(n), "fragments");
  if (auto pf = preflight_diversity(s.fragments); !pf.pass) {
    s.abort_reason = pf.reason;
    enter(s, Status::AbortedPreflight, now);
    return;
  }
  enter(s, Status::Ghosting, now);
}

inline Session create_session(std::string id, std::string theme, std::vector<Fragment> fragments,
                              Timestamp now = now_utc()) {
  Session s;
  s.id = std::move(id);
  s.theme = std::move(theme);
  s.step_timestamps["draft"] = now;
  if (fragments.size() < kMinFragments || fragments.size() > kMaxFragments)
    throw Error(ErrorCode::CountOutOfRange,
                "need 3-5 fragments, got " + std::to_string(fragments.size()), "fragments");
  for (auto& f : fragments) add_fragment(s, std::move(f));
  start(s, now);
  return s;
}

// ---------------------------------------------------------------------------
// Ghost extraction

namespace detail {

inline const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words{
      "a",     "an",    "the",   "and",  "or",    "but",   "of",    "to",   "in",    "on",   "at",    "by",
      "for",   "with",  "from",  "as",   "into",  "onto",  "is",    "are",  "was",   "were", "be",    "been",
      "being", "it",    "its",   "this", "that",  "these", "those", "so",   "than",  "then", "such",  "their",
      "them",  "they",  "there", "which", "who",  "whom",  "what",  "when", "where", "how",  "not",   "no",
      "do",    "does",  "did",   "has",  "have",  "had",   "i",     "we",   "you",   "he",   "she",   "his",
      "her",   "our",   "your",  "my",   "me",    "us",    "him",   "if",   "about", "over", "under", "own",
      "same",  "very",  "can",   "will", "would", "should", "could", "may", "might", "must", "yet",   "s"};
  return words;
}

}  // namespace detail

/// Case-folded alphanumeric tokens with stopwords removed, deduplicated.
inline std::set<std::string> content_tokens(std::string_view text) {
  std::set<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !detail::stopwords().contains(cur)) out.insert(cur);
    cur.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80)
      cur.push_back(static_cast<char>(std::tolower(u)));
    else
      flush();
  }
  flush();
  return out;
}

/// |tokens(ghost) ∩ tokens(fragment text ∪ domain tag)| / |tokens(ghost)|.
inline double ghost_overlap_ratio(const Fragment& fragment, std::string_view ghost_text) {
  const auto ghost = content_tokens(ghost_text);
  if (ghost.empty()) return 0.0;
  auto label = content_tokens(fragment.text);
  label.merge(content_tokens(fragment.domain_tag));
  std::size_t shared = 0;
  for (const auto& t : ghost) shared += label.contains(t) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(ghost.size());
}

enum class WarningLevel { None, Warn };

/// Advisory "Shallow Ghosting" detector; never blocks.
inline WarningLevel shallow_ghost_warning(const Fragment& fragment, std::string_view ghost_text,
                                          const Config& cfg = {}) {
  return ghost_overlap_ratio(fragment, ghost_text) > cfg.shallow_overlap_threshold ? WarningLevel::Warn
                                                                                   : WarningLevel::None;
}

/// Accepts a ghost for one fragment. Rejected ghosts leave the session untouched.
inline const Ghost& attach_ghost(Session& s, Ghost ghost, Timestamp now = now_utc(), const Config& cfg = {}) {
  require_phase(s, {Status::Ghosting});
  const Fragment* frag = s.find_fragment(ghost.fragment_id);
  if (!frag) throw Error(ErrorCode::UnknownFragment, "no fragment '" + ghost.fragment_id + "'", "fragment_id");
  if (s.find_ghost(ghost.fragment_id))
    throw Error(ErrorCode::DuplicateFragment, "fragment '" + ghost.fragment_id + "' already has a ghost",
                "fragment_id");
  require_text(ghost.structural_description, "structural_description");
  const auto& c = ghost.checklist;
  const std::pair<bool, const char*> checks[] = {{c.uses_verbs, "checklist.uses_verbs"},
                                                 {c.includes_emotion, "checklist.includes_emotion"},
                                                 {c.cross_domain_comprehensible, "checklist.cross_domain_comprehensible"},
                                                 {c.reversibility_pass, "checklist.reversibility_pass"}};
  for (const auto& [ok, path] : checks)
    if (!ok) throw Error(ErrorCode::ChecklistIncomplete, std::string(path) + " not asserted; ghost rejected", path);

  ghost.overlap_ratio = ghost_overlap_ratio(*frag, ghost.structural_description);
  ghost.shallow_warning = ghost.overlap_ratio > cfg.shallow_overlap_threshold;
  if (ghost.shallow_warning)
    s.advisories.push_back("shallow ghost on " + ghost.fragment_id +
                           ": ask why the fragment feels the way it does");
  s.ghosts.push_back(std::move(ghost));
  if (s.ghosts.size() == s.fragments.size()) enter(s, Status::Colliding, now);
  return s.ghosts.back();
}

// ---------------------------------------------------------------------------
// Collision matrix

/// All C(n,2) unordered pairs over a set of fragment ids, lexicographic.
inline std::vector<FragmentPair> all_pairs(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::vector<FragmentPair> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j) out.push_back({ids[i], ids[j]});
  return out;
}

inline std::vector<FragmentPair> enumerate_pairs(const Session& s) {
  require_phase(s, {Status::Colliding});
  std::vector<std::string> ids;
  for (const auto& f : s.fragments) ids.push_back(f.id);
  return all_pairs(std::move(ids));
}

inline std::size_t pair_count(const Session& s) {
  const auto n = s.fragments.size();
  return n * (n - 1) / 2;
}

struct GateOutcome {
  bool advance = false;
  std::vector<std::string> electric_ids;
  /// Every collision Electric with at least 3 pairs.
  bool electric_inflation = false;
  /// Electric share above Config::inflation_advisory_ratio.
  bool inflation_advisory = false;
};

/// Pure evaluation of the matrix gate; does not move the session.
inline GateOutcome evaluate_collision_gate(const Session& s, const Config& cfg = {}) {
  const auto pairs = pair_count(s);
  if (s.collisions.size() < pairs)
    throw Error(ErrorCode::IncompleteMatrix,
                std::to_string(pairs - s.collisions.size()) + " of " + std::to_string(pairs) + " pairs unscored");
  GateOutcome g;
  for (const auto& c : s.collisions)
    if (c.score == CollisionScore::Electric) g.electric_ids.push_back(c.id);
  g.advance = !g.electric_ids.empty();
  g.electric_inflation = pairs >= 3 && g.electric_ids.size() == pairs;
  g.inflation_advisory =
      pairs > 0 && static_cast<double>(g.electric_ids.size()) / static_cast<double>(pairs) > cfg.inflation_advisory_ratio;
  return g;
}

/// Applies the gate: Crystallizing with at least one Electric, otherwise the
/// legitimate terminal outcome AbortedNoElectric.
inline GateOutcome collision_gate(Session& s, Timestamp now = now_utc(), const Config& cfg = {}) {
  require_phase(s, {Status::Colliding});
  GateOutcome g = evaluate_collision_gate(s, cfg);
  if (g.advance) {
    if (g.electric_inflation)
      s.advisories.push_back("electric inflation: every collision scored Electric; if explainable in 2 seconds, it is Interesting at best");
    else if (g.inflation_advisory)
      s.advisories.push_back("electric share above advisory ratio; re-check for forced collisions");
    enter(s, Status::Crystallizing, now);
  } else {
    s.abort_reason = "No Electric collisions found";
    enter(s, Status::AbortedNoElectric, now);
  }
  return g;
}

/// Stores one pair score. When the last pair is scored the gate runs automatically.
inline const Collision& score_collision(Session& s, const FragmentPair& pair_in, CollisionScore score,
                                        std::string rationale, Timestamp now = now_utc(), const Config& cfg = {}) {
  require_phase(s, {Status::Colliding});
  const auto pair = FragmentPair::of(pair_in.first, pair_in.second);
  const auto pairs = enumerate_pairs(s);
  if (std::find(pairs.begin(), pairs.end(), pair) == pairs.end())
    throw Error(ErrorCode::UnknownPair, "'" + pair.key() + "' is not a fragment pair of this session", "pair");
  if (s.find_collision(pair.key()))
    throw Error(ErrorCode::DuplicatePair, "pair '" + pair.key() + "' already scored", "pair");
  if (score == CollisionScore::Electric && blank(rationale))
    throw Error(ErrorCode::MissingRationale, "Electric collisions need a rationale", "rationale");
  s.collisions.push_back({pair.key(), pair, score, std::move(rationale)});
  const std::size_t idx = s.collisions.size() - 1;
  if (s.collisions.size() == pairs.size()) collision_gate(s, now, cfg);
  return s.collisions[idx];
}

// ---------------------------------------------------------------------------
// Vision crystallization

struct VisionGate {
  std::string vision_id;
  bool advances = false;
};

inline void validate_ratings(const Ratings& r) {
  const std::pair<int, const char*> dims[] = {{r.novelty, "ratings.novelty"},
                                              {r.feasibility, "ratings.feasibility"},
                                              {r.resonance, "ratings.resonance"},
                                              {r.timing, "ratings.timing"}};
  for (const auto& [v, path] : dims)
    if (v < 1 || v > 5)
      throw Error(ErrorCode::RatingOutOfRange, std::string(path) + " must be in 1..5, got " + std::to_string(v), path);
}

/// The vision gate: every dimension at least 3.
inline bool vision_advances(const Ratings& r) { return r.min() >= 3; }

/// Stores the vision (rejected ones are kept for audit) and reports whether it advances.
inline VisionGate crystallize_vision(Session& s, Vision v) {
  require_phase(s, {Status::Crystallizing});
  const Collision* c = s.find_collision(v.collision_id);
  if (!c) throw Error(ErrorCode::UnknownCollision, "no collision '" + v.collision_id + "'", "collision_id");
  if (c->score != CollisionScore::Electric)
    throw Error(ErrorCode::NotElectric, "collision '" + v.collision_id + "' is not Electric", "collision_id");
  require_text(v.name, "name");
  require_text(v.one_line, "one_line");
  require_text(v.emotion, "emotion");
  require_text(v.cinematic_image, "cinematic_image");
  require_text(v.why_now, "why_now");
  validate_ratings(v.ratings);
  if (v.id.empty()) v.id = "v" + std::to_string(s.visions.size() + 1);
  if (s.find_vision(v.id)) throw Error(ErrorCode::DuplicateId, "vision id '" + v.id + "' already used", "id");
  v.advances = vision_advances(v.ratings);
  s.visions.push_back(std::move(v));
  return {s.visions.back().id, s.visions.back().advances};
}

// ---------------------------------------------------------------------------
// Reality bridge

inline void attach_bridge(Session& s, RealityBridge b, Timestamp now = now_utc()) {
  require_phase(s, {Status::Crystallizing, Status::Bridging});
  const Vision* v = s.find_vision(b.vision_id);
  if (!v) throw Error(ErrorCode::UnknownVision, "no vision '" + b.vision_id + "'", "vision_id");
  if (!v->advances)
    throw Error(ErrorCode::VisionNotAdvancing, "vision '" + b.vision_id + "' did not pass the rating gate", "vision_id");
  if (s.find_bridge(b.vision_id))
    throw Error(ErrorCode::DuplicateId, "vision '" + b.vision_id + "' already has a bridge", "vision_id");
  require_text(b.mvv, "mvv");
  if (b.kill_conditions.empty())
    throw Error(ErrorCode::EmptyKillConditions, "at least one kill condition required", "kill_conditions");
  for (std::size_t i = 0; i < b.kill_conditions.size(); ++i)
    require_text(b.kill_conditions[i], "kill_conditions[" + std::to_string(i) + "]", ErrorCode::EmptyKillConditions);
  require_text(b.first_step_24h, "first_step_24h");
  s.bridges.push_back(std::move(b));
  if (s.status == Status::Crystallizing) enter(s, Status::Bridging, now);
}

/// Advancing visions that have no reality bridge yet.
inline std::vector<std::string> unbridged_visions(const Session& s) {
  std::vector<std::string> out;
  for (const auto& v : s.visions)
    if (v.advances && !s.find_bridge(v.id)) out.push_back(v.id);
  return out;
}

/// Marks the run Completed; needs at least one bridged, advancing vision.
inline void complete(Session& s, Timestamp now = now_utc()) {
  require_phase(s, {Status::Bridging});
  if (s.bridges.empty())
    throw Error(ErrorCode::IncompleteSession, "no advancing vision has a reality bridge", "bridges");
  for (const auto& vid : unbridged_visions(s))
    s.advisories.push_back("vision " + vid + " advanced but was never bridged");
  enter(s, Status::Completed, now);
}

inline std::size_t electric_count(const Session& s) {
  return static_cast<std::size_t>(std::count_if(s.collisions.begin(), s.collisions.end(),
                                                [](const Collision& c) { return c.score == CollisionScore::Electric; }));
}

}  // namespace ghosty::collider
