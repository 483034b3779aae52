#pragma once

#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ghosty/common.hpp"

namespace ghosty::precog {

enum class Strength { Weak, Emerging, Strong };
enum class Direction { Decelerating, Stable, Accelerating };
enum class SignalSource { Numeric, Behavioral, Narrative, Absent };
enum class ConvergenceConfidence { High, Medium, Low };
enum class MarketPhase { PreEmergence, Emergence, Acceleration, Peak, Correction, Plateau };
enum class Competitive { FirstMover, FastFollower, Fortifier, TooLate, Undefined };
enum class Readiness { NotReady, PartiallyReady, Ready };
enum class ExternalWindow { Open, Opening, Closed };
enum class Overall { Go, Soon, Watch };
enum class ActionCategory { Now, Soon, Watch, Kill };
enum class Status { Mapping, Converging, Contrarian, Timing, Acting, Completed };

}  // namespace ghosty::precog

namespace ghosty {

#define GHOSTY_ENUM_TABLE(Type, N, ...)                                            \
  template <>                                                                      \
  struct EnumNames<Type> {                                                         \
    using E = Type;                                                                \
    static constexpr std::array<std::pair<E, std::string_view>, N> table{{__VA_ARGS__}}; \
  };

GHOSTY_ENUM_TABLE(precog::Strength, 3, {E::Weak, "weak"}, {E::Emerging, "emerging"}, {E::Strong, "strong"})
GHOSTY_ENUM_TABLE(precog::Direction, 3, {E::Decelerating, "decelerating"}, {E::Stable, "stable"},
                  {E::Accelerating, "accelerating"})
GHOSTY_ENUM_TABLE(precog::SignalSource, 4, {E::Numeric, "numeric"}, {E::Behavioral, "behavioral"},
                  {E::Narrative, "narrative"}, {E::Absent, "absent"})
GHOSTY_ENUM_TABLE(precog::ConvergenceConfidence, 3, {E::High, "high"}, {E::Medium, "medium"}, {E::Low, "low"})
GHOSTY_ENUM_TABLE(precog::MarketPhase, 6, {E::PreEmergence, "pre_emergence"}, {E::Emergence, "emergence"},
                  {E::Acceleration, "acceleration"}, {E::Peak, "peak"}, {E::Correction, "correction"},
                  {E::Plateau, "plateau"})
GHOSTY_ENUM_TABLE(precog::Competitive, 5, {E::FirstMover, "first_mover"}, {E::FastFollower, "fast_follower"},
                  {E::Fortifier, "fortifier"}, {E::TooLate, "too_late"}, {E::Undefined, "undefined"})
GHOSTY_ENUM_TABLE(precog::Readiness, 3, {E::NotReady, "not_ready"}, {E::PartiallyReady, "partially_ready"},
                  {E::Ready, "ready"})
GHOSTY_ENUM_TABLE(precog::ExternalWindow, 3, {E::Open, "open"}, {E::Opening, "opening"}, {E::Closed, "closed"})
GHOSTY_ENUM_TABLE(precog::Overall, 3, {E::Go, "go"}, {E::Soon, "soon"}, {E::Watch, "watch"})
GHOSTY_ENUM_TABLE(precog::ActionCategory, 4, {E::Now, "now"}, {E::Soon, "soon"}, {E::Watch, "watch"},
                  {E::Kill, "kill"})
GHOSTY_ENUM_TABLE(precog::Status, 6, {E::Mapping, "mapping"}, {E::Converging, "converging"},
                  {E::Contrarian, "contrarian"}, {E::Timing, "timing"}, {E::Acting, "acting"},
                  {E::Completed, "completed"})

#undef GHOSTY_ENUM_TABLE

}  // namespace ghosty

namespace ghosty::precog {

inline constexpr std::size_t kMinSignals = 3;
inline constexpr std::size_t kMaxSignals = 8;

// ---------------------------------------------------------------------------
// Timing grid configuration

/// Per-axis polarity (+1 favourable, 0 neutral, -1 unfavourable) and the
/// thresholds that turn the polarity sum into Go / Soon / Watch.
struct TimingRule {
  std::array<int, 6> market{-1, +1, +1, 0, -1, -1};
  std::array<int, 5> competitive{+1, +1, 0, -1, 0};
  std::array<int, 3> readiness{-1, 0, +1};
  std::array<int, 3> external{+1, 0, -1};
  int go_min = 3;    // sum >= go_min  -> Go
  int soon_min = 1;  // sum >= soon_min -> Soon, else Watch

  bool operator==(const TimingRule&) const = default;
};

struct Evidence {
  std::string claim;
  std::string source;
  bool operator==(const Evidence&) const = default;
};

struct Signal {
  std::string key;
  std::string description;
  std::vector<Evidence> evidence;
  Strength strength = Strength::Weak;
  Direction direction = Direction::Stable;
  /// Mandatory; optional only so a missing tag can be reported.
  std::optional<Confidence> confidence;
  SignalSource source_kind = SignalSource::Numeric;

  bool operator==(const Signal&) const = default;
};

struct ConvergencePoint {
  std::string id;
  std::vector<std::string> signal_keys;
  std::string hypothesis;
  std::string causal_logic;
  ConvergenceConfidence confidence = ConvergenceConfidence::Medium;
  std::string confidence_rationale;
  bool multi_sentence_warning = false;

  bool operator==(const ConvergencePoint&) const = default;
};

struct ContrarianScenario {
  std::string description;
  std::string historical_analogy;
  std::vector<std::string> preconditions;
  std::string collapse_trigger;
  double probability_low = 0.0;
  double probability_high = 0.0;

  bool operator==(const ContrarianScenario&) const = default;
};

struct ContrarianView {
  std::string overestimation_reason;
  std::vector<ContrarianScenario> scenarios;
  bool operator==(const ContrarianView&) const = default;
};

struct TimingGrid {
  MarketPhase market_phase = MarketPhase::PreEmergence;
  Competitive competitive = Competitive::Undefined;
  Readiness readiness = Readiness::NotReady;
  ExternalWindow external_window = ExternalWindow::Closed;
  std::string annotation;

  bool operator==(const TimingGrid&) const = default;
};

struct TimingJudgment {
  Overall overall = Overall::Watch;
  int polarity_sum = 0;
  bool escalated_contrarian_required = false;

  bool operator==(const TimingJudgment&) const = default;
};

struct GridEvaluation {
  std::string label;
  TimingGrid grid;
  TimingJudgment judgment;
  bool operator==(const GridEvaluation&) const = default;
};

struct ActionItem {
  std::string id;
  ActionCategory category = ActionCategory::Now;
  std::string action;
  std::string trigger;
  std::string cost_estimate;

  bool operator==(const ActionItem&) const = default;
};

struct Session {
  std::string id;
  std::string theme_key;
  std::string horizon;
  std::vector<Signal> signals;
  std::vector<ConvergencePoint> convergences;
  std::optional<ContrarianView> contrarian;
  std::vector<GridEvaluation> grid_evaluations;
  std::vector<ActionItem> actions;
  Status status = Status::Mapping;
  std::map<std::string, Timestamp> step_timestamps;
  std::vector<Status> status_history{Status::Mapping};
  std::vector<std::string> advisories;

  const Signal* find_signal(std::string_view key) const {
    for (const auto& s : signals)
      if (s.key == key) return &s;
    return nullptr;
  }
  const ConvergencePoint* find_convergence(std::string_view cid) const {
    for (const auto& c : convergences)
      if (c.id == cid) return &c;
    return nullptr;
  }
  bool escalation_required() const {
    for (const auto& g : grid_evaluations)
      if (g.judgment.escalated_contrarian_required) return true;
    return false;
  }

  bool operator==(const Session&) const = default;
};

inline void enter(Session& s, Status next, Timestamp now) {
  s.status = next;
  s.status_history.push_back(next);
  s.step_timestamps[std::string(to_string(next))] = now;
}

[[noreturn]] inline void wrong_phase(const Session& s, std::string_view op) {
  throw Error(ErrorCode::WrongPhase,
              std::string(op) + " not allowed while session is " + std::string(to_string(s.status)));
}

inline Session create_session(std::string id, std::string theme_key, std::string horizon, Timestamp now = now_utc()) {
  Session s;
  s.id = std::move(id);
  s.theme_key = std::move(theme_key);
  s.horizon = std::move(horizon);
  s.step_timestamps["mapping"] = now;
  return s;
}

// ---------------------------------------------------------------------------
// Step 1: signal map

inline void validate_signal(const Signal& sig, const std::string& prefix = {}) {
  require_text(sig.key, prefix + "key");
  require_text(sig.description, prefix + "description");
  if (!sig.confidence)
    throw Error(ErrorCode::MissingConfidence, "every signal needs a confidence tag", prefix + "confidence");
  if (sig.evidence.empty())
    throw Error(ErrorCode::EmptyEvidence, "at least one evidence entry required", prefix + "evidence");
  for (std::size_t i = 0; i < sig.evidence.size(); ++i) {
    const std::string p = prefix + "evidence[" + std::to_string(i) + "]";
    require_text(sig.evidence[i].claim, p + ".claim", ErrorCode::EmptyEvidence);
    require_text(sig.evidence[i].source, p + ".source", ErrorCode::EmptyEvidence);
  }
}

inline void add_signal(Session& s, Signal sig) {
  if (s.status != Status::Mapping) wrong_phase(s, "add_signal");
  if (s.signals.size() >= kMaxSignals)
    throw Error(ErrorCode::TooManySignals, "a signal map holds at most 8 signals", "signals");
  validate_signal(sig);
  if (s.find_signal(sig.key))
    throw Error(ErrorCode::DuplicateSignal, "signal key '" + sig.key + "' already mapped", "key");
  s.signals.push_back(std::move(sig));
}

// ---------------------------------------------------------------------------
// Step 2: convergence analysis

/// Count of sentence endings: a run of '.', '!' or '?' that closes the text or
/// is followed by whitespace and a capital letter. "Wait... it is" is one sentence.
inline int terminal_marks(std::string_view text) {
  auto is_mark = [](char c) { return c == '.' || c == '!' || c == '?'; };
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  int n = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_mark(text[i]) || (i + 1 < text.size() && is_mark(text[i + 1]))) continue;
    std::size_t j = i + 1;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j == text.size() || (j > i + 1 && std::isupper(static_cast<unsigned char>(text[j])))) ++n;
  }
  return n;
}

inline bool one_sentence(std::string_view text) { return terminal_marks(text) == 1; }

/// Leaving Mapping happens implicitly on the first convergence, once >= 3 signals exist.
inline const ConvergencePoint& add_convergence(Session& s, ConvergencePoint cp, Timestamp now = now_utc()) {
  if (s.status == Status::Mapping) {
    if (s.signals.size() < kMinSignals)
      throw Error(ErrorCode::WrongPhase,
                  "signal map needs at least 3 signals before convergence analysis, has " +
                      std::to_string(s.signals.size()),
                  "signals");
  } else if (s.status != Status::Converging) {
    wrong_phase(s, "add_convergence");
  }
  std::set<std::string> distinct(cp.signal_keys.begin(), cp.signal_keys.end());
  if (distinct.size() < 2)
    throw Error(ErrorCode::TooFewSignals, "a convergence point needs at least 2 distinct signals", "signal_keys");
  for (std::size_t i = 0; i < cp.signal_keys.size(); ++i)
    if (!s.find_signal(cp.signal_keys[i]))
      throw Error(ErrorCode::UnknownSignal, "no signal '" + cp.signal_keys[i] + "'",
                  "signal_keys[" + std::to_string(i) + "]");
  require_text(cp.hypothesis, "hypothesis");
  require_text(cp.causal_logic, "causal_logic");
  require_text(cp.confidence_rationale, "confidence_rationale");
  if (cp.id.empty()) cp.id = "c" + std::to_string(s.convergences.size() + 1);
  if (s.find_convergence(cp.id)) throw Error(ErrorCode::DuplicateId, "convergence id '" + cp.id + "' already used", "id");
  cp.multi_sentence_warning = !one_sentence(cp.hypothesis);
  if (cp.multi_sentence_warning)
    s.advisories.push_back("convergence " + cp.id + ": hypothesis should be a single sentence");
  if (s.status == Status::Mapping) enter(s, Status::Converging, now);
  s.convergences.push_back(std::move(cp));
  return s.convergences.back();
}

// ---------------------------------------------------------------------------
// Step 3: contrarian view

inline void validate_contrarian(const ContrarianView& v) {
  require_text(v.overestimation_reason, "overestimation_reason", ErrorCode::MissingOverestimationReason);
  if (v.scenarios.empty())
    throw Error(ErrorCode::EmptyScenarios, "at least one contrarian scenario required", "scenarios");
  for (std::size_t i = 0; i < v.scenarios.size(); ++i) {
    const auto& sc = v.scenarios[i];
    const std::string p = "scenarios[" + std::to_string(i) + "].";
    require_text(sc.description, p + "description");
    require_text(sc.historical_analogy, p + "historical_analogy", ErrorCode::MissingAnalogy);
    if (sc.preconditions.empty())
      throw Error(ErrorCode::MissingField, "at least one precondition required", p + "preconditions");
    for (std::size_t k = 0; k < sc.preconditions.size(); ++k)
      require_text(sc.preconditions[k], p + "preconditions[" + std::to_string(k) + "]");
    require_text(sc.collapse_trigger, p + "collapse_trigger");
    const bool in_range = sc.probability_low >= 0.0 && sc.probability_high <= 1.0;
    if (!in_range || sc.probability_low > sc.probability_high)
      throw Error(ErrorCode::BadProbability, "probability interval must satisfy 0 <= low <= high <= 1",
                  p + (sc.probability_low < 0.0 || sc.probability_low > sc.probability_high ? "probability_low"
                                                                                              : "probability_high"));
  }
}

/// Stores the contrarian view. From Converging this closes convergence analysis;
/// in Contrarian it replaces the view; in Timing/Acting it is only accepted as
/// the escalated revision demanded by an over-determined grid.
inline void set_contrarian(Session& s, ContrarianView v, Timestamp now = now_utc()) {
  switch (s.status) {
    case Status::Converging:
      if (s.convergences.empty()) wrong_phase(s, "set_contrarian");
      break;
    case Status::Contrarian:
      break;
    case Status::Timing:
    case Status::Acting:
      if (!s.escalation_required()) wrong_phase(s, "set_contrarian");
      break;
    default:
      wrong_phase(s, "set_contrarian");
  }
  validate_contrarian(v);
  s.contrarian = std::move(v);
  if (s.status == Status::Converging) enter(s, Status::Contrarian, now);
}

// ---------------------------------------------------------------------------
// Step 4: timing grid

struct AxisPolarity {
  int market = 0;
  int competitive = 0;
  int readiness = 0;
  int external = 0;
  int sum() const { return market + competitive + readiness + external; }
};

inline AxisPolarity polarities(const TimingGrid& g, const TimingRule& rule = {}) {
  return {rule.market[static_cast<std::size_t>(g.market_phase)],
          rule.competitive[static_cast<std::size_t>(g.competitive)],
          rule.readiness[static_cast<std::size_t>(g.readiness)],
          rule.external[static_cast<std::size_t>(g.external_window)]};
}

inline Overall overall_for(int sum, const TimingRule& rule = {}) {
  if (sum >= rule.go_min) return Overall::Go;
  if (sum >= rule.soon_min) return Overall::Soon;
  return Overall::Watch;
}

/// Total over the enums. All four axes pointing the same (nonzero) way is the
/// over-determination tripwire that demands an escalated contrarian view.
inline TimingJudgment evaluate_timing_grid(const TimingGrid& g, const TimingRule& rule = {}) {
  const auto p = polarities(g, rule);
  const int sum = p.sum();
  const bool aligned = p.market != 0 && p.market == p.competitive && p.market == p.readiness && p.market == p.external;
  return {overall_for(sum, rule), sum, aligned};
}

inline const GridEvaluation& add_grid_evaluation(Session& s, std::string label, TimingGrid grid,
                                                 Timestamp now = now_utc(), const TimingRule& rule = {}) {
  if (s.status == Status::Contrarian) {
    if (!s.contrarian) wrong_phase(s, "add_grid_evaluation");
  } else if (s.status != Status::Timing) {
    wrong_phase(s, "add_grid_evaluation");
  }
  require_text(label, "label");
  for (const auto& e : s.grid_evaluations)
    if (e.label == label) throw Error(ErrorCode::DuplicateId, "grid label '" + label + "' already evaluated", "label");
  const TimingJudgment j = evaluate_timing_grid(grid, rule);
  if (j.escalated_contrarian_required)
    s.advisories.push_back("grid '" + label +
                           "': all four axes aligned; escalated contrarian view (>= 2 scenarios) required");
  if (s.status == Status::Contrarian) enter(s, Status::Timing, now);
  s.grid_evaluations.push_back({std::move(label), std::move(grid), j});
  return s.grid_evaluations.back();
}

// ---------------------------------------------------------------------------
// Step 5: action window

inline void validate_action(const ActionItem& a) {
  require_text(a.action, "action");
  require_text(a.trigger, "trigger", ErrorCode::MissingTrigger);
  require_text(a.cost_estimate, "cost_estimate", ErrorCode::MissingCost);
}

inline const ActionItem& add_action(Session& s, ActionItem a, Timestamp now = now_utc()) {
  if (s.status == Status::Timing) {
    if (s.grid_evaluations.empty()) wrong_phase(s, "add_action");
  } else if (s.status != Status::Acting) {
    wrong_phase(s, "add_action");
  }
  validate_action(a);
  if (a.id.empty()) a.id = "a" + std::to_string(s.actions.size() + 1);
  for (const auto& existing : s.actions)
    if (existing.id == a.id) throw Error(ErrorCode::DuplicateId, "action id '" + a.id + "' already used", "id");
  if (s.status == Status::Timing) enter(s, Status::Acting, now);
  s.actions.push_back(std::move(a));
  return s.actions.back();
}

/// Unmet completion requirements, empty when the session may be finalized.
inline std::vector<std::string> completion_gaps(const Session& s) {
  std::vector<std::string> gaps;
  if (s.signals.size() < kMinSignals || s.signals.size() > kMaxSignals) gaps.push_back("3-8 signals");
  if (s.convergences.empty()) gaps.push_back("at least one convergence point");
  if (!s.contrarian) gaps.push_back("a contrarian view");
  if (s.grid_evaluations.empty()) gaps.push_back("at least one timing grid evaluation");
  if (s.actions.empty()) gaps.push_back("at least one action item");
  if (s.escalation_required() && (!s.contrarian || s.contrarian->scenarios.size() < 2))
    gaps.push_back("escalated contrarian view with at least 2 scenarios (timing grid over-determined)");
  return gaps;
}

inline void finalize(Session& s, Timestamp now = now_utc()) {
  if (s.status == Status::Completed) wrong_phase(s, "finalize");
  const auto gaps = completion_gaps(s);
  if (!gaps.empty()) {
    std::string msg = "session incomplete, missing: ";
    for (std::size_t i = 0; i < gaps.size(); ++i) msg += (i ? "; " : "") + gaps[i];
    throw Error(ErrorCode::IncompleteSession, msg);
  }
  enter(s, Status::Completed, now);
}

}  // namespace ghosty::precog
