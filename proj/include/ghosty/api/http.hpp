#pragma once

// HTTP session API. Every response body is an envelope:
//   {"ok": true,  "data": ...}
//   {"ok": false, "error": {"code", "message", "field_path"}}

#include <httplib.h>

#include <string>

#include "ghosty/api/generator.hpp"
#include "ghosty/api/report.hpp"
#include "ghosty/api/service.hpp"

namespace ghosty::api {

inline json ok_envelope(json data) { return {{"ok", true}, {"data", std::move(data)}}; }

inline json error_envelope(ErrorCode code, const std::string& message, const std::string& field_path) {
  return {{"ok", false},
          {"error", {{"code", std::string(code_name(code))}, {"message", message}, {"field_path", field_path}}}};
}

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownPrediction: return 404;
    case ErrorCode::WrongPhase:
    case ErrorCode::DuplicatePair:
    case ErrorCode::DuplicateId:
    case ErrorCode::DuplicateFragment:
    case ErrorCode::DuplicateSignal:
    case ErrorCode::AlreadyEvaluated: return 409;
    case ErrorCode::StorageFailure: return 500;
    case ErrorCode::Timeout: return 504;
    case ErrorCode::RemoteError: return 502;
    case ErrorCode::Unconfigured: return 503;
    default: return 400;
  }
}

class HttpServer {
 public:
  HttpServer(Service& svc, GeneratorConfig generator = {}) : svc_(svc), generator_(std::move(generator)) {
    // httplib defaults to SO_REUSEPORT, which lets a second server share a busy port.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  /// Binds to the port (0 = any free port) and returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      const int p = server_.bind_to_any_port(host);
      if (p < 0) throw Error(ErrorCode::PortInUse, "could not bind any port on " + host);
      return p;
    }
    if (!server_.bind_to_port(host, port))
      throw Error(ErrorCode::PortInUse, "port " + std::to_string(port) + " is already in use", "port");
    return port;
  }

  /// Blocks serving requests until stop().
  void run() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  template <class F>
  void guarded(Res& res, F&& body) {
    try {
      send(res, 200, ok_envelope(body()));
    } catch (const PersistedError& e) {
      json env = error_envelope(e.code(), e.what(), e.field_path());
      env["data"] = {{"session", e.session()}};
      send(res, http_status(e.code()), env);
    } catch (const Error& e) {
      send(res, http_status(e.code()), error_envelope(e.code(), e.what(), e.field_path()));
    } catch (const json::exception& e) {
      send(res, 400, error_envelope(ErrorCode::BadRequest, std::string("malformed body: ") + e.what(), ""));
    } catch (const std::exception& e) {
      send(res, 500, error_envelope(ErrorCode::StorageFailure, e.what(), ""));
    }
  }

  static void send(Res& res, int status, const json& env) {
    res.status = status;
    res.set_content(env.dump(), "application/json; charset=utf-8");
  }

  static json body_of(const Req& req) {
    if (req.body.empty()) return json::object();
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::BadRequest, "request body must be a JSON object");
    return j;
  }

  static std::string param(const Req& req, const char* name) {
    return req.has_param(name) ? req.get_param_value(name) : std::string{};
  }

  void routes() {
    server_.Get("/health", [this](const Req&, Res& res) {
      guarded(res, [&] { return json{{"status", "ok"}, {"records", svc_.store().size()}}; });
    });
    server_.Post("/sessions", [this](const Req& req, Res& res) { guarded(res, [&] { return svc_.create(body_of(req)); }); });
    server_.Get(R"(/sessions/([^/]+))", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto snap = svc_.load(req.matches[1]);
        return json{{"session", snap.payload}, {"revision", snap.revision}};
      });
    });
    server_.Post(R"(/sessions/([^/]+)/steps/([^/]+))", [this](const Req& req, Res& res) {
      guarded(res, [&] { return svc_.step(req.matches[1], req.matches[2], body_of(req)); });
    });
    server_.Get(R"(/sessions/([^/]+)/gates)", [this](const Req& req, Res& res) {
      guarded(res, [&] { return svc_.gates(req.matches[1]); });
    });
    server_.Get(R"(/sessions/([^/]+)/export)", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        const std::string fmt = param(req, "format").empty() ? "md" : param(req, "format");
        const auto format = parse_enum<ReportFormat>(fmt, "format");
        return json{{"format", fmt}, {"document", export_report(svc_, req.matches[1], format)}};
      });
    });
    server_.Post(R"(/sessions/([^/]+)/drafts/([^/]+))", [this](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto kind = parse_enum<StepKind>(req.matches[2].str(), "step_kind");
        const auto draft = draft_request(svc_, req.matches[1], kind, io::str_or(body_of(req), "target", ""));
        const auto out = request_generation(generator_, draft);
        return json{{"candidate_text", out.candidate_text}, {"metadata", out.metadata}, {"committed", false}};
      });
    });
    server_.Get(R"(/themes/([^/]+)/history/diff)", [this](const Req& req, Res& res) {
      guarded(res, [&] { return svc_.history_diff(req.matches[1], param(req, "from"), param(req, "to")); });
    });
    server_.Post("/predictions", [this](const Req& req, Res& res) {
      guarded(res, [&] { return svc_.add_prediction(body_of(req)); });
    });
    server_.Post(R"(/predictions/([^/]+)/evaluation)", [this](const Req& req, Res& res) {
      guarded(res, [&] { return svc_.evaluate_prediction(req.matches[1], body_of(req)); });
    });
    server_.Post("/rubric", [this](const Req& req, Res& res) { guarded(res, [&] { return svc_.rubric(body_of(req)); }); });
  }

  Service& svc_;
  GeneratorConfig generator_;
  httplib::Server server_;
};

}  // namespace ghosty::api
