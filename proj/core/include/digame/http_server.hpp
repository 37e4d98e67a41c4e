#pragma once

#include "digame/service.hpp"

#include <memory>
#include <string>

namespace digame {

// HTTP + JSON front end for SessionManager:
//   POST   /sessions
//   POST   /sessions/{id}/step
//   DELETE /sessions/{id}
//   GET    /sessions/{id}/stream   (server-sent events, `event: step`)
// Error bodies are {code, message, field?}.
class HttpServer {
 public:
  explicit HttpServer(SessionManager& sessions);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Blocks until stop().
  bool listen(const std::string& host, int port);
  // Binds to a free port and returns it; serve with listen_after_bind().
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace digame
