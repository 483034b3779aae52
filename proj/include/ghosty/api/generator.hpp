#pragma once

// Optional external text generator. Drafts come back as candidates for the
// operator to accept or edit; nothing here touches a session.

#include <httplib.h>

#include <chrono>
#include <string>

#include "ghosty/api/service.hpp"

namespace ghosty::api {

enum class StepKind { Ghost, CollisionRationale, Vision, Bridge, Signal, Contrarian };

}  // namespace ghosty::api

namespace ghosty {
template <>
struct EnumNames<api::StepKind> {
  using K = api::StepKind;
  static constexpr std::array<std::pair<K, std::string_view>, 6> table{{
      {K::Ghost, "ghost"},
      {K::CollisionRationale, "collision_rationale"},
      {K::Vision, "vision"},
      {K::Bridge, "bridge"},
      {K::Signal, "signal"},
      {K::Contrarian, "contrarian"},
  }};
};
}  // namespace ghosty

namespace ghosty::api {

struct GeneratorConfig {
  std::string url;  // e.g. http://127.0.0.1:9000/generate; empty = manual mode
  std::chrono::milliseconds timeout{30000};
};

struct GeneratorRequest {
  StepKind step_kind = StepKind::Ghost;
  json context = json::object();
};

struct GeneratorResponse {
  std::string candidate_text;
  json metadata = json::object();
};

namespace detail {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::Unconfigured, "generator URL needs a scheme: " + url, "generator_url");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace detail

/// POSTs {"step_kind", "context"} and expects {"candidate_text", "metadata"?}.
inline GeneratorResponse request_generation(const GeneratorConfig& cfg, const GeneratorRequest& req) {
  if (cfg.url.empty())
    throw Error(ErrorCode::Unconfigured, "no generator endpoint configured; enter the step manually", "generator_url");
  const auto [base, path] = detail::split_url(cfg.url);
  httplib::Client client(base);
  client.set_connection_timeout(cfg.timeout);
  client.set_read_timeout(cfg.timeout);
  client.set_write_timeout(cfg.timeout);
  const json body = {{"step_kind", to_string(req.step_kind)}, {"context", req.context}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw Error(ErrorCode::Timeout, "generator did not answer within " + std::to_string(cfg.timeout.count()) + " ms");
    throw Error(ErrorCode::RemoteError, "generator unreachable: " + httplib::to_string(err));
  }
  if (res->status >= 400)
    throw Error(ErrorCode::RemoteError,
                "generator returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  GeneratorResponse out;
  try {
    const json j = json::parse(res->body);
    out.candidate_text = io::str(j, "candidate_text", "");
    if (const json* m = io::find(j, "metadata")) out.metadata = *m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::RemoteError, std::string("generator response is not valid JSON: ") + e.what());
  }
  return out;
}

/// Builds the session excerpt a generator needs for one step. `target` names
/// the fragment, pair ("f1+f2"), collision or vision the draft is for.
inline GeneratorRequest draft_request(Service& svc, const std::string& session_id, StepKind kind,
                                      const std::string& target) {
  const Snapshot snap = svc.load(session_id);
  GeneratorRequest req{kind, json::object()};
  if (snap.kind == "collider_session") {
    const auto s = parse<collider::Session>(snap.payload);
    req.context["theme"] = s.theme;
    switch (kind) {
      case StepKind::Ghost: {
        const auto* f = s.find_fragment(target);
        if (!f) throw Error(ErrorCode::UnknownFragment, "no fragment '" + target + "'", "target");
        req.context["fragment"] = *f;
        break;
      }
      case StepKind::CollisionRationale:
      case StepKind::Vision: {
        const auto pair = parse<collider::FragmentPair>(json(target), "target");
        json ghosts = json::array();
        for (const auto& fid : {pair.first, pair.second}) {
          const auto* g = s.find_ghost(fid);
          if (!g) throw Error(ErrorCode::UnknownFragment, "no ghost for '" + fid + "'", "target");
          ghosts.push_back(*g);
        }
        req.context["ghosts"] = ghosts;
        if (const auto* c = s.find_collision(pair.key())) req.context["collision"] = *c;
        break;
      }
      case StepKind::Bridge: {
        const auto* v = s.find_vision(target);
        if (!v) throw Error(ErrorCode::UnknownVision, "no vision '" + target + "'", "target");
        req.context["vision"] = *v;
        break;
      }
      default:
        throw Error(ErrorCode::BadRequest, "step kind not applicable to a GHOSTY session", "step_kind");
    }
  } else if (snap.kind == "precog_session") {
    const auto s = parse<precog::Session>(snap.payload);
    req.context["theme_key"] = s.theme_key;
    req.context["horizon"] = s.horizon;
    if (kind == StepKind::Signal)
      req.context["signals"] = s.signals;
    else if (kind == StepKind::Contrarian)
      req.context["convergences"] = s.convergences;
    else
      throw Error(ErrorCode::BadRequest, "step kind not applicable to a PRECOG session", "step_kind");
  } else {
    throw Error(ErrorCode::BadRequest, "drafts are requested against a GHOSTY or PRECOG session", "session_id");
  }
  return req;
}

}  // namespace ghosty::api
