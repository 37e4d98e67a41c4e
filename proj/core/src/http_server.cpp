#include "digame/http_server.hpp"

#include "digame/error.hpp"

#include <httplib.h>

#include <charconv>

namespace digame {

namespace {

using nlohmann::json;

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::SessionTerminated: return 409;
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownScenario:
    case ErrorCode::BadParams:
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidProbeSet:
    case ErrorCode::ParseError: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                const std::optional<std::string>& field = std::nullopt) {
  json body = {{"code", code}, {"message", message}};
  if (field) body["field"] = *field;
  send_json(res, status, body);
}

// Runs a handler, mapping library errors onto HTTP error bodies.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, status_for(e.code()), to_string(e.code()), e.what(), e.field());
  } catch (const json::exception& e) {
    send_error(res, 400, "ParseError", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "InternalError", e.what());
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(SessionManager& s) : sessions(s) {}

  SessionManager& sessions;
  httplib::Server server;
};

HttpServer::HttpServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {
  auto& server = impl_->server;
  SessionManager& mgr = impl_->sessions;

  server.Post("/sessions", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, mgr.create_session(parse_body(req))); });
  });

  server.Post(R"(/sessions/([^/]+)/step)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, mgr.step_session(req.matches[1].str(), parse_body(req))); });
  });

  server.Delete(R"(/sessions/([^/]+))", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, mgr.close_session(req.matches[1].str())); });
  });

  server.Get(R"(/sessions/([^/]+)/stream)", [&mgr](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::shared_ptr<EventLog> log = mgr.events(req.matches[1].str());
      std::size_t from = 0;
      if (req.has_param("from")) {
        const std::string text = req.get_param_value("from");
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), from);
        if (ec != std::errc() || end != text.data() + text.size()) {
          throw Error(ErrorCode::ConfigError, "from: expected a non-negative integer", std::nullopt, "from");
        }
      }
      auto cursor = std::make_shared<std::size_t>(from);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [log, cursor](std::size_t, httplib::DataSink& sink) {
        bool closed = false;
        for (const std::string& ev : log->read_from(*cursor, std::chrono::milliseconds(200), closed)) {
          const std::string frame = "event: step\ndata: " + ev + "\n\n";
          if (!sink.write(frame.data(), frame.size())) return false;
        }
        if (closed) {
          sink.done();
          return true;
        }
        return sink.is_writable();
      });
    });
  });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpServer::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace digame
