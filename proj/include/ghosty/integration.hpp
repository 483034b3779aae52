#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ghosty/collider.hpp"
#include "ghosty/precog.hpp"

namespace ghosty::integration {

/// Feasibility thresholds for the readiness axis.
struct ReadinessRule {
  int ready_min = 4;
  int partial_min = 3;
  bool operator==(const ReadinessRule&) const = default;
};

struct VisionMapping {
  std::string vision_id;
  std::string grid_label;
  std::vector<std::string> action_ids;
  bool operator==(const VisionMapping&) const = default;
};

struct Run {
  std::string id;
  std::string precog_session_id;
  std::vector<std::string> selected_convergences;
  std::vector<collider::Fragment> external_fragments;
  std::string collider_session_id;
  std::vector<VisionMapping> mappings;
  bool actions_emitted = false;

  bool operator==(const Run&) const = default;
};

/// Convergence analysis is closed once the PRECOG session has moved past Converging.
inline bool convergence_closed(const precog::Session& p) {
  return p.status != precog::Status::Mapping && p.status != precog::Status::Converging;
}

/// Minimum confidence across the signals a convergence cites.
inline Confidence convergence_confidence(const precog::Session& p, const precog::ConvergencePoint& cp) {
  Confidence out = Confidence::Verified;
  for (const auto& key : cp.signal_keys)
    if (const auto* sig = p.find_signal(key); sig && sig->confidence) out = weakest(out, *sig->confidence);
  return out;
}

/// Turns 2-3 convergence points plus 1-2 external fragments into a collider
/// fragment list. Convergence fragments come first, ids f1..f5 in order.
inline std::vector<collider::Fragment> convergences_to_fragments(const precog::Session& p,
                                                                 const std::vector<std::string>& selection,
                                                                 std::vector<collider::Fragment> externals) {
  if (!convergence_closed(p))
    throw Error(ErrorCode::UnfinalizedSession,
                "PRECOG session '" + p.id + "' has not closed convergence analysis (status " +
                    std::string(to_string(p.status)) + ")",
                "precog_session_id");
  if (selection.size() < 2 || selection.size() > 3)
    throw Error(ErrorCode::SelectionOutOfBounds,
                "select 2-3 convergence points, got " + std::to_string(selection.size()), "selection");
  if (externals.empty() || externals.size() > 2)
    throw Error(ErrorCode::SelectionOutOfBounds,
                "supply 1-2 external-domain fragments, got " + std::to_string(externals.size()), "externals");
  std::set<std::string> seen;
  std::vector<collider::Fragment> out;
  for (std::size_t i = 0; i < selection.size(); ++i) {
    const std::string path = "selection[" + std::to_string(i) + "]";
    if (!seen.insert(selection[i]).second)
      throw Error(ErrorCode::SelectionOutOfBounds, "convergence '" + selection[i] + "' selected twice", path);
    const auto* cp = p.find_convergence(selection[i]);
    if (!cp) throw Error(ErrorCode::UnknownSignal, "no convergence '" + selection[i] + "'", path);
    collider::Fragment f;
    f.id = "f" + std::to_string(out.size() + 1);
    f.text = cp->hypothesis + " " + cp->causal_logic;
    f.domain_tag = p.theme_key;
    f.source_kind = collider::SourceKind::Observation;
    f.confidence = convergence_confidence(p, *cp);
    out.push_back(std::move(f));
  }
  for (std::size_t i = 0; i < externals.size(); ++i) {
    auto& f = externals[i];
    f.id = "f" + std::to_string(out.size() + 1);
    collider::validate_fragment(f, "externals[" + std::to_string(i) + "]");
    out.push_back(std::move(f));
  }
  return out;
}

inline precog::Readiness vision_to_readiness(const collider::Vision& v, const ReadinessRule& rule = {}) {
  const int f = v.ratings.feasibility;
  if (f >= rule.ready_min) return precog::Readiness::Ready;
  if (f >= rule.partial_min) return precog::Readiness::PartiallyReady;
  return precog::Readiness::NotReady;
}

/// One Now item from the 24-hour first step, then one Kill item per kill condition.
inline std::vector<precog::ActionItem> bridge_to_actions(const collider::Vision& v, const collider::RealityBridge& b) {
  std::vector<precog::ActionItem> out;
  out.push_back({"", precog::ActionCategory::Now, b.first_step_24h, "immediate", b.mvv});
  for (const auto& kc : b.kill_conditions)
    out.push_back({"", precog::ActionCategory::Kill, "Disinvest from " + v.name, kc,
                   "Sunk cost bounded by the minimum viable vision"});
  return out;
}

/// Category for the first-step item once the vision's timing is known:
/// only a Go judgment keeps it in Now.
constexpr precog::ActionCategory first_step_category(precog::Overall overall) {
  switch (overall) {
    case precog::Overall::Go: return precog::ActionCategory::Now;
    case precog::Overall::Soon: return precog::ActionCategory::Soon;
    case precog::Overall::Watch: return precog::ActionCategory::Watch;
  }
  return precog::ActionCategory::Watch;
}

struct AxisReadings {
  precog::MarketPhase market_phase = precog::MarketPhase::PreEmergence;
  precog::Competitive competitive = precog::Competitive::Undefined;
  precog::ExternalWindow external_window = precog::ExternalWindow::Closed;
  /// Operator reading that replaces the feasibility-derived readiness.
  std::optional<precog::Readiness> readiness;
  std::string annotation;
};

/// Maps one vision onto the PRECOG timing grid. Readiness is derived from the
/// vision's feasibility unless the operator supplies it; the other three axes
/// are operator readings.
inline const precog::GridEvaluation& map_vision(Run& run, precog::Session& p, const collider::Session& c,
                                                const std::string& vision_id, std::string label,
                                                const AxisReadings& axes, Timestamp now = now_utc(),
                                                const ReadinessRule& readiness = {},
                                                const precog::TimingRule& timing = {}) {
  if (p.id != run.precog_session_id || c.id != run.collider_session_id)
    throw Error(ErrorCode::UnknownSession, "sessions do not belong to integration run '" + run.id + "'");
  const auto* v = c.find_vision(vision_id);
  if (!v) throw Error(ErrorCode::UnknownVision, "no vision '" + vision_id + "'", "vision_id");
  if (!v->advances)
    throw Error(ErrorCode::VisionNotAdvancing, "vision '" + vision_id + "' did not pass the rating gate", "vision_id");
  for (const auto& m : run.mappings)
    if (m.vision_id == vision_id)
      throw Error(ErrorCode::DuplicateId, "vision '" + vision_id + "' already mapped", "vision_id");
  if (label.empty()) label = v->name;
  precog::TimingGrid grid{axes.market_phase, axes.competitive,
                          axes.readiness ? *axes.readiness : vision_to_readiness(*v, readiness),
                          axes.external_window, axes.annotation};
  const auto& eval = precog::add_grid_evaluation(p, label, std::move(grid), now, timing);
  run.mappings.push_back({vision_id, eval.label, {}});
  return eval;
}

/// Emits action items for every mapped vision that has a reality bridge.
/// Done once, after all grid mappings, since actions close the timing step.
inline std::vector<std::string> emit_actions(Run& run, precog::Session& p, const collider::Session& c,
                                             Timestamp now = now_utc()) {
  if (run.actions_emitted) throw Error(ErrorCode::WrongPhase, "actions already emitted for run '" + run.id + "'");
  if (run.mappings.empty()) throw Error(ErrorCode::WrongPhase, "no visions mapped yet", "mappings");
  // Build everything first so a validation failure leaves both sessions untouched.
  precog::Session staged = p;
  Run staged_run = run;
  std::vector<std::string> ids;
  for (auto& m : staged_run.mappings) {
    const auto* v = c.find_vision(m.vision_id);
    const auto* b = c.find_bridge(m.vision_id);
    if (!v || !b) continue;
    const precog::GridEvaluation* eval = nullptr;
    for (const auto& e : staged.grid_evaluations)
      if (e.label == m.grid_label) eval = &e;
    auto items = bridge_to_actions(*v, *b);
    items.front().category = first_step_category(eval ? eval->judgment.overall : precog::Overall::Watch);
    for (auto& item : items) {
      const auto& added = precog::add_action(staged, std::move(item), now);
      m.action_ids.push_back(added.id);
      ids.push_back(added.id);
    }
  }
  if (ids.empty()) throw Error(ErrorCode::IncompleteSession, "no mapped vision has a reality bridge", "mappings");
  staged_run.actions_emitted = true;
  p = std::move(staged);
  run = std::move(staged_run);
  return ids;
}

}  // namespace ghosty::integration
