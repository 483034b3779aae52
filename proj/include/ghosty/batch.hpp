#pragma once

// Batch runs of the collider and their aggregate statistics.
//
// Fixture schema (JSON), one document per batch:
//
//   {
//     "runs": [
//       {
//         "label": "Jazz x Tax Accounting",
//         "theme": "optional, defaults to label",
//         "fragments": [ {"id": "f1", "text": "...", "domain_tag": "jazz",
//                         "source_kind": "observation"}, ... ],
//         "ghosts":  { "f1": "structural description", ... }
//                    // or {"f1": {"structural_description": ..., "checklist": {...}}}
//                    // a plain string means the author ticked the whole checklist
//         "scores":  { "f1+f2": "boring",
//                      "f1+f3": {"score": "electric", "rationale": "..."}, ... },
//         "visions": [ {"collision_id": "f1+f3", "name": ..., "one_line": ...,
//                       "emotion": ..., "cinematic_image": ..., "why_now": ...,
//                       "ratings": [novelty, feasibility, resonance, timing]}, ... ],
//         "bridges": { "v1": {"mvv": ..., "existing_capabilities": [...],
//                             "kill_conditions": [...], "first_step_24h": ...} },
//         "expected": {"result": "success", "electric": 3, "visions": 2}
//       }, ...
//     ]
//   }
//
// "expected" is not read by the harness; tests compare it against the outcome.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ghosty/collider.hpp"
#include "ghosty/serialize.hpp"

namespace ghosty::batch {

enum class RunResult { Success, Failure };

}  // namespace ghosty::batch

namespace ghosty {
template <>
struct EnumNames<batch::RunResult> {
  using R = batch::RunResult;
  static constexpr std::array<std::pair<R, std::string_view>, 2> table{{{R::Success, "success"}, {R::Failure, "failure"}}};
};
}  // namespace ghosty

namespace ghosty::batch {

struct RunOutcome {
  std::string pairing_label;
  std::size_t fragment_count = 0;
  std::size_t pair_count = 0;
  std::size_t electric_count = 0;
  std::size_t interesting_count = 0;
  std::size_t boring_count = 0;
  /// Pairs never scored because the run stopped at pre-flight.
  std::size_t unscored_count = 0;
  /// Ratings of every crystallized vision, advancing or not.
  std::vector<collider::Ratings> visions;
  RunResult result = RunResult::Failure;
  /// Terminal status of the underlying session.
  collider::Status final_status = collider::Status::Draft;

  std::size_t advancing_visions() const {
    return static_cast<std::size_t>(
        std::count_if(visions.begin(), visions.end(), [](const collider::Ratings& r) { return collider::vision_advances(r); }));
  }
  double hit_rate() const { return static_cast<double>(electric_count) / static_cast<double>(pair_count); }
};

struct BatchStats {
  std::size_t n_runs = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  double failure_rate = 0.0;
  std::vector<double> per_run_hit_rates;
  /// Mean Electric hit rate over Success runs only.
  double mean_hit_rate_successful = 0.0;
  /// Mean Electric hit rate over every run.
  double mean_hit_rate_all = 0.0;
  std::size_t total_visions = 0;
  double mean_visions_per_successful = 0.0;
  /// Pearson r of (novelty, feasibility) over all advancing visions pooled.
  std::optional<double> novelty_feasibility_r;
};

/// Product-moment correlation coefficient.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw Error(ErrorCode::LengthMismatch,
                "xs has " + std::to_string(xs.size()) + " values, ys has " + std::to_string(ys.size()), "ys");
  if (xs.size() < 2) throw Error(ErrorCode::LengthMismatch, "need at least 2 paired values", "xs");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0) throw Error(ErrorCode::ZeroVariance, "xs has zero variance", "xs");
  if (syy == 0) throw Error(ErrorCode::ZeroVariance, "ys has zero variance", "ys");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline void validate_outcome(const RunOutcome& r, const std::string& path) {
  if (r.pair_count == 0)
    throw Error(ErrorCode::EmptyBatch, "run '" + r.pairing_label + "' has no pairs; hit rate undefined",
                io::join(path, "pair_count"));
  if (r.electric_count + r.interesting_count + r.boring_count + r.unscored_count != r.pair_count)
    throw Error(ErrorCode::BadRequest, "score counts do not add up to pair_count", io::join(path, "pair_count"));
  const bool success = r.advancing_visions() > 0;
  if (success != (r.result == RunResult::Success))
    throw Error(ErrorCode::BadRequest, "result must be success exactly when a vision advances", io::join(path, "result"));
}

inline BatchStats compute_stats(const std::vector<RunOutcome>& runs) {
  if (runs.empty()) throw Error(ErrorCode::EmptyBatch, "no runs to summarize", "runs");
  for (std::size_t i = 0; i < runs.size(); ++i) validate_outcome(runs[i], io::index("runs", i));

  BatchStats st;
  st.n_runs = runs.size();
  double hit_all = 0, hit_success = 0;
  std::vector<double> novelty, feasibility;
  for (const auto& r : runs) {
    const double h = r.hit_rate();
    st.per_run_hit_rates.push_back(h);
    hit_all += h;
    if (r.result == RunResult::Success) {
      ++st.successes;
      hit_success += h;
    }
    for (const auto& v : r.visions) {
      if (!collider::vision_advances(v)) continue;
      ++st.total_visions;
      novelty.push_back(v.novelty);
      feasibility.push_back(v.feasibility);
    }
  }
  const double n = static_cast<double>(st.n_runs);
  st.success_rate = static_cast<double>(st.successes) / n;
  st.failure_rate = static_cast<double>(st.n_runs - st.successes) / n;
  st.mean_hit_rate_all = hit_all / n;
  if (st.successes > 0) {
    st.mean_hit_rate_successful = hit_success / static_cast<double>(st.successes);
    st.mean_visions_per_successful = static_cast<double>(st.total_visions) / static_cast<double>(st.successes);
  }
  if (novelty.size() >= 2) {
    try {
      st.novelty_feasibility_r = pearson(novelty, feasibility);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Running

struct RunConfig {
  std::string label;
  std::string theme;
  std::vector<collider::Fragment> fragments;
};

struct ScoreAnswer {
  collider::CollisionScore score = collider::CollisionScore::Boring;
  std::string rationale;
};

/// Supplies the judgment content of each step. Answers go through the same
/// validation as operator input.
class ContentProvider {
 public:
  virtual ~ContentProvider() = default;
  virtual collider::Ghost ghost(const RunConfig& run, const collider::Fragment& fragment) = 0;
  virtual ScoreAnswer score(const RunConfig& run, const collider::Session& s, const collider::FragmentPair& pair) = 0;
  virtual std::vector<collider::Vision> visions(const RunConfig& run, const collider::Session& s) = 0;
  virtual std::optional<collider::RealityBridge> bridge(const RunConfig& run, const collider::Vision& v) = 0;
};

/// A run failed for a reason other than a legitimate protocol abort.
class ProviderFailure : public Error {
 public:
  ProviderFailure(std::size_t run_index, std::string run_label, const std::string& cause,
                  std::vector<RunOutcome> completed)
      : Error(ErrorCode::ProviderFailure, "run " + std::to_string(run_index + 1) + " (" + run_label + "): " + cause,
              "runs[" + std::to_string(run_index) + "]"),
        run_index_(run_index),
        run_label_(std::move(run_label)),
        completed_(std::move(completed)) {}

  std::size_t run_index() const { return run_index_; }
  const std::string& run_label() const { return run_label_; }
  /// Outcomes of the runs that finished before the failure.
  const std::vector<RunOutcome>& completed() const { return completed_; }

 private:
  std::size_t run_index_;
  std::string run_label_;
  std::vector<RunOutcome> completed_;
};

inline RunOutcome summarize(const std::string& label, const collider::Session& s) {
  RunOutcome o;
  o.pairing_label = label;
  o.fragment_count = s.fragments.size();
  o.pair_count = collider::pair_count(s);
  for (const auto& c : s.collisions) {
    switch (c.score) {
      case collider::CollisionScore::Electric: ++o.electric_count; break;
      case collider::CollisionScore::Interesting: ++o.interesting_count; break;
      case collider::CollisionScore::Boring: ++o.boring_count; break;
    }
  }
  o.unscored_count = o.pair_count - s.collisions.size();
  for (const auto& v : s.visions) o.visions.push_back(v.ratings);
  o.result = o.advancing_visions() > 0 ? RunResult::Success : RunResult::Failure;
  o.final_status = s.status;
  return o;
}

/// Drives one full collider session. Protocol aborts end the run normally.
inline RunOutcome execute_run(const RunConfig& cfg, ContentProvider& provider, Timestamp now = now_utc(),
                              const collider::Config& ccfg = {}) {
  using collider::Status;
  auto s = collider::create_session("batch", cfg.theme.empty() ? cfg.label : cfg.theme, cfg.fragments, now);
  if (s.status == Status::AbortedPreflight) return summarize(cfg.label, s);
  for (const auto& f : s.fragments) collider::attach_ghost(s, provider.ghost(cfg, f), now, ccfg);
  for (const auto& pair : collider::enumerate_pairs(s)) {
    auto answer = provider.score(cfg, s, pair);
    collider::score_collision(s, pair, answer.score, std::move(answer.rationale), now, ccfg);
    if (s.status != Status::Colliding) break;
  }
  if (s.status == Status::AbortedNoElectric) return summarize(cfg.label, s);
  // All visions first: the first bridge closes crystallization.
  std::vector<std::string> advancing;
  for (auto& v : provider.visions(cfg, s)) {
    const auto gate = collider::crystallize_vision(s, std::move(v));
    if (gate.advances) advancing.push_back(gate.vision_id);
  }
  for (const auto& vid : advancing) {
    if (auto b = provider.bridge(cfg, *s.find_vision(vid))) {
      b->vision_id = vid;
      collider::attach_bridge(s, std::move(*b), now);
    }
  }
  if (s.status == Status::Bridging) collider::complete(s, now);
  return summarize(cfg.label, s);
}

/// Runs every config in order. The first failing run stops the batch with a
/// ProviderFailure that carries the outcomes gathered so far.
inline std::vector<RunOutcome> run_batch(const std::vector<RunConfig>& configs, ContentProvider& provider,
                                         Timestamp now = now_utc(), const collider::Config& ccfg = {}) {
  std::vector<RunOutcome> out;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    try {
      out.push_back(execute_run(configs[i], provider, now, ccfg));
    } catch (const std::exception& e) {
      throw ProviderFailure(i, configs[i].label, e.what(), out);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scripted fixtures

class ScriptedProvider : public ContentProvider {
 public:
  /// `runs` is the "runs" array of a fixture document.
  explicit ScriptedProvider(json runs) : runs_(std::move(runs)) {}

  collider::Ghost ghost(const RunConfig& run, const collider::Fragment& f) override {
    const auto& [doc, path] = script(run);
    const std::string gpath = io::join(io::join(path, "ghosts"), f.id);
    const json& g = io::need(io::need(doc, "ghosts", path), f.id, io::join(path, "ghosts"));
    if (g.is_string()) return {f.id, g.get<std::string>(), {true, true, true, true}};
    auto ghost = parse<collider::Ghost>(g, gpath);
    ghost.fragment_id = f.id;
    return ghost;
  }

  ScoreAnswer score(const RunConfig& run, const collider::Session&, const collider::FragmentPair& pair) override {
    const auto& [doc, path] = script(run);
    const std::string spath = io::join(path, "scores");
    const json& v = io::need(io::need(doc, "scores", path), pair.key(), spath);
    if (v.is_string()) return {parse_enum<collider::CollisionScore>(v.get<std::string>(), io::join(spath, pair.key())), ""};
    const std::string p = io::join(spath, pair.key());
    return {io::enumeration<collider::CollisionScore>(v, "score", p), io::str_or(v, "rationale", p)};
  }

  std::vector<collider::Vision> visions(const RunConfig& run, const collider::Session&) override {
    const auto& [doc, path] = script(run);
    return parse_list<collider::Vision>(doc, "visions", path);
  }

  std::optional<collider::RealityBridge> bridge(const RunConfig& run, const collider::Vision& v) override {
    const auto& [doc, path] = script(run);
    const json* bridges = io::find(doc, "bridges");
    if (!bridges) return std::nullopt;
    const json* b = io::find(*bridges, v.id);
    if (!b) return std::nullopt;
    json body = *b;
    body["vision_id"] = v.id;
    return parse<collider::RealityBridge>(body, io::join(io::join(path, "bridges"), v.id));
  }

 private:
  struct Located {
    const json& doc;
    std::string path;
  };

  Located script(const RunConfig& run) const {
    for (std::size_t i = 0; i < runs_.size(); ++i)
      if (runs_[i].value("label", "") == run.label) return {runs_[i], io::index("runs", i)};
    throw Error(ErrorCode::MissingField, "fixture has no script for run '" + run.label + "'", "runs");
  }

  json runs_;
};

struct Fixture {
  std::vector<RunConfig> configs;
  json runs;
};

inline Fixture parse_fixture(const json& doc) {
  io::expect_object(doc, "");
  const json& runs = io::need(doc, "runs", "");
  if (!runs.is_array() || runs.empty()) throw Error(ErrorCode::EmptyBatch, "fixture lists no runs", "runs");
  Fixture fx{{}, runs};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string p = io::index("runs", i);
    RunConfig c;
    c.label = io::str(runs[i], "label", p);
    c.theme = io::str_or(runs[i], "theme", p);
    c.fragments = parse_list<collider::Fragment>(runs[i], "fragments", p, true);
    fx.configs.push_back(std::move(c));
  }
  return fx;
}

inline Fixture load_fixture(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot read fixture " + file);
  try {
    return parse_fixture(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadRequest, "fixture " + file + " is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const RunOutcome& r) {
  j = {{"pairing_label", r.pairing_label},
       {"fragment_count", r.fragment_count},
       {"pair_count", r.pair_count},
       {"electric_count", r.electric_count},
       {"interesting_count", r.interesting_count},
       {"boring_count", r.boring_count},
       {"unscored_count", r.unscored_count},
       {"visions", r.visions},
       {"advancing_visions", r.advancing_visions()},
       {"hit_rate", r.hit_rate()},
       {"result", to_string(r.result)},
       {"final_status", to_string(r.final_status)}};
}

inline void to_json(json& j, const BatchStats& s) {
  j = {{"n_runs", s.n_runs},
       {"successes", s.successes},
       {"success_rate", s.success_rate},
       {"failure_rate", s.failure_rate},
       {"per_run_hit_rates", s.per_run_hit_rates},
       {"mean_hit_rate_successful", s.mean_hit_rate_successful},
       {"mean_hit_rate_all", s.mean_hit_rate_all},
       {"total_visions", s.total_visions},
       {"mean_visions_per_successful", s.mean_visions_per_successful}};
  j["novelty_feasibility_r"] = s.novelty_feasibility_r ? json(*s.novelty_feasibility_r) : json(nullptr);
}

}  // namespace ghosty::batch
