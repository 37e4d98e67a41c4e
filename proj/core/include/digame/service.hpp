#pragma once

#include "digame/dynamics.hpp"
#include "digame/harness.hpp"
#include "digame/predictor.hpp"
#include "digame/probes.hpp"
#include "digame/selection.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace digame {

struct SessionConfig {
  std::string scenario = "linear-duel";
  Params params;
  double h = 0.01;
  Vec phi0;
  Vec default_u_intended;
  long warmup_steps = 20;
  std::optional<ProbeSet> probes;  // canonical set when unset
  double delay = 0.1;
  double blend = 1.0;
  double prediction_horizon = 0.5;
  SelectionConfig selection;  // None or Pool
  std::optional<HorizonSpec> horizon;
};

// Throws Error{ConfigError} naming the offending field.
SessionConfig parse_session_config(const nlohmann::json& j);

// Append-only log of serialised step responses, read by event-stream
// subscribers.
class EventLog {
 public:
  void publish(std::string event);
  void close();
  // Blocks up to `wait` for events beyond `cursor`; returns them and
  // advances the cursor. `closed` reports whether the log has ended.
  std::vector<std::string> read_from(std::size_t& cursor, std::chrono::milliseconds wait, bool& closed);

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<std::string> events_;
  bool closed_ = false;
};

// Live-play sessions. Each session owns a ground-truth simulator; a step
// advances it under the submitted intended controls and returns the
// re-anchored prediction fan, selected label and horizon estimate.
//
// Operations on one session are serialised; sessions are independent.
class SessionManager {
 public:
  SessionManager() = default;
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  // Returns {session, step, status, state, scenario}.
  nlohmann::json create_session(const SessionConfig& config);
  nlohmann::json create_session(const nlohmann::json& request);

  // u_intended may cover both players (d values) or only player one (d_1
  // values, player two holding the session default). Throws
  // UnknownSession, SessionTerminated or ConfigError.
  nlohmann::json step_session(const std::string& id, const Vec& u_intended, long steps);
  nlohmann::json step_session(const std::string& id, const nlohmann::json& request);

  nlohmann::json close_session(const std::string& id);

  std::shared_ptr<EventLog> events(const std::string& id);
  // Copy of the session's ground-truth history.
  History history(const std::string& id);

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id);

  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace digame
