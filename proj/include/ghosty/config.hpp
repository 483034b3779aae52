#pragma once

#include <cstdlib>
#include <fstream>
#include <string>

#include "ghosty/integration.hpp"
#include "ghosty/ledger.hpp"
#include "ghosty/serialize.hpp"

namespace ghosty {

/// Tunable thresholds. Everything has a built-in default; a JSON config file
/// may override any subset:
///
///   {
///     "shallow_ghost_overlap": 0.6,
///     "electric_inflation_advisory": 0.7,
///     "polarity": {"market": {"peak": 0, ...}, "competitive": {...},
///                  "readiness": {...}, "external": {...}},
///     "timing_thresholds": {"go": 3, "soon": 1},
///     "readiness": {"ready_min": 4, "partial_min": 3},
///     "rubric_labels": ["...", x8]
///   }
struct EngineConfig {
  collider::Config collider;
  precog::TimingRule timing;
  integration::ReadinessRule readiness;
  std::vector<std::string> rubric_labels = ledger::default_rubric_labels();
};

namespace detail {

template <class E, std::size_t N>
void override_polarity(std::array<int, N>& table, const json& j, const std::string& path) {
  io::expect_object(j, path);
  for (const auto& [name, value] : j.items()) {
    const std::string p = io::join(path, name);
    const E e = parse_enum<E>(name, p);
    if (!value.is_number_integer() || value.template get<int>() < -1 || value.template get<int>() > 1)
      throw Error(ErrorCode::BadRequest, p + " must be -1, 0 or +1", p);
    table[static_cast<std::size_t>(e)] = value.template get<int>();
  }
}

}  // namespace detail

inline EngineConfig parse_config(const json& j) {
  EngineConfig c;
  io::expect_object(j, "");
  if (io::find(j, "shallow_ghost_overlap")) c.collider.shallow_overlap_threshold = io::number(j, "shallow_ghost_overlap", "");
  if (io::find(j, "electric_inflation_advisory"))
    c.collider.inflation_advisory_ratio = io::number(j, "electric_inflation_advisory", "");
  if (const json* p = io::find(j, "polarity")) {
    if (const json* m = io::find(*p, "market")) detail::override_polarity<precog::MarketPhase>(c.timing.market, *m, "polarity.market");
    if (const json* m = io::find(*p, "competitive"))
      detail::override_polarity<precog::Competitive>(c.timing.competitive, *m, "polarity.competitive");
    if (const json* m = io::find(*p, "readiness"))
      detail::override_polarity<precog::Readiness>(c.timing.readiness, *m, "polarity.readiness");
    if (const json* m = io::find(*p, "external"))
      detail::override_polarity<precog::ExternalWindow>(c.timing.external, *m, "polarity.external");
  }
  if (const json* t = io::find(j, "timing_thresholds")) {
    if (io::find(*t, "go")) c.timing.go_min = io::integer(*t, "go", "timing_thresholds");
    if (io::find(*t, "soon")) c.timing.soon_min = io::integer(*t, "soon", "timing_thresholds");
  }
  if (const json* r = io::find(j, "readiness")) {
    if (io::find(*r, "ready_min")) c.readiness.ready_min = io::integer(*r, "ready_min", "readiness");
    if (io::find(*r, "partial_min")) c.readiness.partial_min = io::integer(*r, "partial_min", "readiness");
  }
  if (io::find(j, "rubric_labels")) {
    c.rubric_labels = io::strings_or_empty(j, "rubric_labels", "");
    if (c.rubric_labels.size() != ledger::kRubricDimensions)
      throw Error(ErrorCode::BadRequest, "rubric_labels must list exactly 8 names", "rubric_labels");
  }
  return c;
}

inline EngineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot read config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, "config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Process environment relevant to the CLI and server.
struct Environment {
  std::string store_path = "ghosty-ledger.jsonl";
  std::string generator_url;
  int generator_timeout_ms = 30000;
  std::string config_path;
  /// Fixed ISO-8601 time used instead of the wall clock (reproducible replays).
  std::string fixed_clock;

  static Environment from_process() {
    Environment e;
    auto get = [](const char* k) -> const char* { return std::getenv(k); };
    if (auto v = get("GHOSTY_STORE")) e.store_path = v;
    if (auto v = get("GHOSTY_GENERATOR_URL")) e.generator_url = v;
    if (auto v = get("GHOSTY_GENERATOR_TIMEOUT_MS")) e.generator_timeout_ms = std::atoi(v);
    if (auto v = get("GHOSTY_CONFIG")) e.config_path = v;
    if (auto v = get("GHOSTY_CLOCK")) e.fixed_clock = v;
    return e;
  }

  Clock clock() const {
    if (fixed_clock.empty()) return system_clock();
    auto t = parse_iso8601(fixed_clock);
    if (!t) throw Error(ErrorCode::BadRequest, "GHOSTY_CLOCK is not an ISO-8601 UTC timestamp", "GHOSTY_CLOCK");
    return ghosty::fixed_clock(*t);
  }

  EngineConfig config() const { return config_path.empty() ? EngineConfig{} : load_config_file(config_path); }
};

}  // namespace ghosty
