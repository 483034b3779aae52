#pragma once

#include <sstream>
#include <string>

#include "ghosty/api/service.hpp"

namespace ghosty::api {

enum class ReportFormat { Markdown, Data };

}  // namespace ghosty::api

namespace ghosty {
template <>
struct EnumNames<api::ReportFormat> {
  using F = api::ReportFormat;
  static constexpr std::array<std::pair<F, std::string_view>, 2> table{{{F::Markdown, "md"}, {F::Data, "data"}}};
};
}  // namespace ghosty

namespace ghosty::api {

namespace detail {

inline std::string ratings_line(const collider::Ratings& r) {
  std::ostringstream os;
  os << "Novelty " << r.novelty << ", Feasibility " << r.feasibility << ", Resonance " << r.resonance << ", Timing "
     << r.timing;
  return os.str();
}

inline void trace_terminal(std::ostringstream& md, const std::string& status, const std::string& reason) {
  md << "\n---\n";
  if (!reason.empty())
    md << "**Terminal: " << status << "**: " << reason << "\n";
  else
    md << "**Status: " << status << "**\n";
}

}  // namespace detail

inline std::string collider_markdown(const collider::Session& s, const collider::Config& cfg = {}) {
  std::ostringstream md;
  md << "# GHOSTY COLLIDER trace: " << s.theme << "\n\nSession `" << s.id << "`\n";

  md << "\n## 1. Fragment harvest (" << s.fragments.size() << ")\n\n";
  for (const auto& f : s.fragments) {
    md << "- **" << f.id << "** [" << f.domain_tag << ", " << to_string(f.source_kind);
    if (f.confidence) md << ", " << to_string(*f.confidence);
    md << "] " << f.text << "\n";
  }

  if (!s.ghosts.empty() || s.status_history.size() > 1) {
    md << "\n## 2. Ghost extraction (" << s.ghosts.size() << ")\n\n";
    for (const auto& f : s.fragments) {
      const auto* g = s.find_ghost(f.id);
      if (!g) continue;
      md << "- " << f.id << " -> *" << g->structural_description << "*";
      if (g->shallow_warning) md << " (shallow-ghost warning, overlap " << g->overlap_ratio << ")";
      md << "\n";
    }
  }

  if (!s.collisions.empty()) {
    md << "\n## 3. Collision matrix (" << s.collisions.size() << " of " << collider::pair_count(s) << " pairs)\n\n";
    md << "| Pair | Score | Rationale |\n|---|---|---|\n";
    for (const auto& c : s.collisions)
      md << "| " << c.pair.first << " x " << c.pair.second << " | " << to_string(c.score) << " | " << c.rationale
         << " |\n";
    if (s.collisions.size() == collider::pair_count(s)) {
      const auto g = collider::evaluate_collision_gate(s, cfg);
      md << "\nGate: " << g.electric_ids.size() << " Electric -> " << (g.advance ? "advance" : "no Electric collisions")
         << (g.electric_inflation ? " (ELECTRIC INFLATION)" : "") << "\n";
    }
  }

  if (!s.visions.empty()) {
    md << "\n## 4. Vision crystallization (" << s.visions.size() << ")\n";
    for (const auto& v : s.visions) {
      md << "\n### " << v.id << ": " << v.name << (v.advances ? "" : " (not advancing)") << "\n\n";
      md << "- From collision: " << v.collision_id << "\n";
      md << "- " << v.one_line << "\n";
      md << "- Emotion: " << v.emotion << "\n";
      md << "- Image: " << v.cinematic_image << "\n";
      md << "- Why now: " << v.why_now << "\n";
      md << "- Ratings: " << detail::ratings_line(v.ratings) << "\n";
    }
  }

  if (!s.bridges.empty()) {
    md << "\n## 5. Reality bridge\n";
    for (const auto& b : s.bridges) {
      md << "\n### " << b.vision_id << "\n\n- MVV: " << b.mvv << "\n";
      for (const auto& cap : b.existing_capabilities) md << "- Existing capability: " << cap << "\n";
      for (const auto& k : b.kill_conditions) md << "- Kill condition: " << k << "\n";
      md << "- First step (24h): " << b.first_step_24h << "\n";
    }
  }

  if (!s.advisories.empty()) {
    md << "\n## Advisories\n\n";
    for (const auto& a : s.advisories) md << "- " << a << "\n";
  }
  detail::trace_terminal(md, std::string(to_string(s.status)), s.abort_reason);
  return md.str();
}

inline std::string precog_markdown(const precog::Session& s) {
  std::ostringstream md;
  md << "# PRECOG trace: " << s.theme_key;
  if (!s.horizon.empty()) md << " (" << s.horizon << ")";
  md << "\n\nSession `" << s.id << "`\n";

  md << "\n## 1. Signal map (" << s.signals.size() << ")\n\n";
  md << "| Key | Signal | Strength | Direction | Confidence |\n|---|---|---|---|---|\n";
  for (const auto& sig : s.signals)
    md << "| " << sig.key << " | " << sig.description << " | " << to_string(sig.strength) << " | "
       << to_string(sig.direction) << " | " << (sig.confidence ? to_string(*sig.confidence) : "?") << " |\n";

  if (!s.convergences.empty()) {
    md << "\n## 2. Convergence analysis\n\n";
    for (const auto& c : s.convergences) {
      md << "- **" << c.id << "** (signals";
      for (const auto& k : c.signal_keys) md << " " << k;
      md << "; " << to_string(c.confidence) << "): " << c.hypothesis << " " << c.causal_logic << "\n";
    }
  }

  if (s.contrarian) {
    md << "\n## 3. Contrarian view\n\nOverestimation: " << s.contrarian->overestimation_reason << "\n\n";
    for (const auto& sc : s.contrarian->scenarios) {
      md << "- " << sc.description << " (" << static_cast<int>(sc.probability_low * 100 + 0.5) << "-"
         << static_cast<int>(sc.probability_high * 100 + 0.5) << "%); analogy: " << sc.historical_analogy
         << "; collapse trigger: " << sc.collapse_trigger << "\n";
    }
  }

  if (!s.grid_evaluations.empty()) {
    md << "\n## 4. Timing grid\n\n| Label | Market | Competitive | Readiness | External | Overall |\n"
          "|---|---|---|---|---|---|\n";
    for (const auto& e : s.grid_evaluations) {
      md << "| " << e.label << " | " << to_string(e.grid.market_phase) << " | " << to_string(e.grid.competitive)
         << " | " << to_string(e.grid.readiness) << " | " << to_string(e.grid.external_window) << " | "
         << to_string(e.judgment.overall) << " (sum " << e.judgment.polarity_sum << ")"
         << (e.judgment.escalated_contrarian_required ? " ESCALATE" : "") << " |\n";
    }
  }

  if (!s.actions.empty()) {
    md << "\n## 5. Action window\n";
    for (auto cat : {precog::ActionCategory::Now, precog::ActionCategory::Soon, precog::ActionCategory::Watch,
                     precog::ActionCategory::Kill}) {
      bool header = false;
      for (const auto& a : s.actions) {
        if (a.category != cat) continue;
        if (!header) md << "\n### " << to_string(cat) << "\n\n";
        header = true;
        md << "- " << a.action << " (trigger: " << a.trigger << "; cost: " << a.cost_estimate << ")\n";
      }
    }
  }

  if (!s.advisories.empty()) {
    md << "\n## Advisories\n\n";
    for (const auto& a : s.advisories) md << "- " << a << "\n";
  }
  md << "\n---\n**Status: " << to_string(s.status) << "**\n";
  if (s.status != precog::Status::Completed)
    for (const auto& gap : precog::completion_gaps(s)) md << "- outstanding: " << gap << "\n";
  return md.str();
}

/// md: human-readable trace; data: the exact ledger payload of the latest snapshot.
inline std::string export_report(Service& svc, const std::string& id, ReportFormat format) {
  const Snapshot snap = svc.load(id);
  if (format == ReportFormat::Data) return snap.payload.dump();
  if (snap.kind == "collider_session")
    return collider_markdown(parse<collider::Session>(snap.payload), svc.config().collider);
  if (snap.kind == "precog_session") return precog_markdown(parse<precog::Session>(snap.payload));
  const auto run = parse<integration::Run>(snap.payload);
  std::ostringstream md;
  md << "# Integration run `" << run.id << "`\n\nPRECOG `" << run.precog_session_id << "` -> GHOSTY `"
     << run.collider_session_id << "`\n\n";
  for (const auto& m : run.mappings) {
    md << "- " << m.vision_id << " -> grid '" << m.grid_label << "'";
    if (!m.action_ids.empty()) {
      md << ", actions";
      for (const auto& a : m.action_ids) md << " " << a;
    }
    md << "\n";
  }
  md << "\n" << precog_markdown(svc.load_precog(run.precog_session_id)) << "\n"
     << collider_markdown(svc.load_collider(run.collider_session_id), svc.config().collider);
  return md.str();
}

/// Re-reads an exported data document and re-encodes it canonically.
inline std::string reimport_data(const std::string& document) {
  const json j = json::parse(document);
  const std::string kind = j.value("kind", "");
  if (kind == "collider_session") return json(parse<collider::Session>(j)).dump();
  if (kind == "precog_session") return json(parse<precog::Session>(j)).dump();
  if (kind == "integration_run") return json(parse<integration::Run>(j)).dump();
  throw Error(ErrorCode::BadRequest, "unknown document kind '" + kind + "'", "kind");
}

}  // namespace ghosty::api
