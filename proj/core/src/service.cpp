#include "digame/service.hpp"

#include "digame/error.hpp"

#include <cmath>
#include <limits>

namespace digame {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::ConfigError, field + ": " + message, std::nullopt, field);
}

double number(const json& j, const std::string& field) {
  if (!j.is_number() || !std::isfinite(j.get<double>())) config_error(field, "expected a finite number");
  return j.get<double>();
}

Vec vec(const json& j, const std::string& field, long size) {
  if (!j.is_array() || static_cast<long>(j.size()) != size) {
    config_error(field, "expected an array of " + std::to_string(size) + " numbers");
  }
  Vec out(size);
  for (long i = 0; i < size; ++i) out(i) = number(j[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]");
  return out;
}

json to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json score_json(double s) { return std::isfinite(s) ? json(s) : json(nullptr); }

}  // namespace

SessionConfig parse_session_config(const json& j) {
  if (!j.is_object()) config_error("<root>", "expected an object");
  SessionConfig c;
  if (j.contains("scenario")) {
    if (!j["scenario"].is_string()) config_error("scenario", "expected a string");
    c.scenario = j["scenario"].get<std::string>();
  }
  if (j.contains("params")) {
    if (!j["params"].is_object()) config_error("params", "expected an object");
    for (const auto& [key, value] : j["params"].items()) {
      std::vector<double> xs;
      if (!value.is_array()) config_error("params." + key, "expected an array");
      for (std::size_t i = 0; i < value.size(); ++i) {
        xs.push_back(number(value[i], "params." + key + "[" + std::to_string(i) + "]"));
      }
      c.params[key] = xs;
    }
  }
  Scenario s;
  try {
    s = make_scenario(c.scenario, c.params);
  } catch (const Error& e) {
    config_error(e.code() == ErrorCode::UnknownScenario ? "scenario" : "params", e.what());
  }
  const int m = s.game.state_dim;
  const int d = s.game.control_dim();
  const ScenarioDefaults defaults = scenario_defaults(c.scenario);

  if (j.contains("h")) c.h = number(j["h"], "h");
  if (!(c.h > 0.0)) config_error("h", "must be positive");
  c.phi0 = j.contains("phi0") ? vec(j["phi0"], "phi0", m) : defaults.phi0;
  c.default_u_intended = j.contains("default_u_intended") ? vec(j["default_u_intended"], "default_u_intended", d)
                                                          : defaults.u_intended;
  if (j.contains("warmup_steps")) {
    if (!j["warmup_steps"].is_number_integer()) config_error("warmup_steps", "expected an integer");
    c.warmup_steps = j["warmup_steps"].get<long>();
  }

  const json pred = j.value("predictor", json::object());
  if (!pred.is_object()) config_error("predictor", "expected an object");
  if (pred.contains("dt")) c.delay = number(pred["dt"], "predictor.dt");
  if (pred.contains("blend")) c.blend = number(pred["blend"], "predictor.blend");
  if (pred.contains("T")) c.prediction_horizon = number(pred["T"], "predictor.T");
  if (c.blend < 0.0 || c.blend > 1.0) config_error("predictor.blend", "must lie in [0, 1]");
  if (c.prediction_horizon < 0.0) config_error("predictor.T", "must be non-negative");
  long delay = 0;
  try {
    delay = delay_steps(c.delay, c.h);
  } catch (const Error&) {
    config_error("predictor.dt", "must be a positive multiple of h");
  }
  if (pred.contains("probes")) {
    try {
      c.probes = probe_set_from_json(pred["probes"]);
    } catch (const Error& e) {
      config_error("predictor.probes", e.what());
    }
    if (c.probes->control_dim() != d || c.probes->state_dim() != m) {
      config_error("predictor.probes", "dimensions do not match the scenario");
    }
  }
  if (c.warmup_steps < delay + 2) {
    config_error("warmup_steps", "needs at least dt/h + 2 = " + std::to_string(delay + 2) + " steps");
  }

  if (j.contains("selection")) {
    const json& sel = j["selection"];
    const std::string mode = sel.value("mode", "none");
    if (mode == "pool") {
      c.selection.mode = SelectionConfig::Mode::Pool;
      if (sel.contains("pool_size")) {
        if (!sel["pool_size"].is_number_integer()) config_error("selection.pool_size", "expected an integer");
        c.selection.pool_size = sel["pool_size"].get<int>();
      }
      if (c.selection.pool_size < 2) config_error("selection.pool_size", "pool needs at least two members");
    } else if (mode != "none") {
      config_error("selection.mode", "expected none or pool");
    }
    if (sel.contains("seed")) {
      if (!sel["seed"].is_number_integer() || sel["seed"].get<long long>() < 0) config_error("selection.seed", "expected a non-negative integer");
      c.selection.seed = sel["seed"].get<std::uint64_t>();
    }
  }

  if (j.contains("horizon")) {
    const json& hz = j["horizon"];
    HorizonSpec spec;
    spec.delay_1 = number(hz.value("dt1", json(spec.delay_1)), "horizon.dt1");
    spec.delay_2 = number(hz.value("dt2", json(spec.delay_2)), "horizon.dt2");
    spec.theta = number(hz.value("theta", json(spec.theta)), "horizon.theta");
    spec.t_max = number(hz.value("t_max", json(spec.t_max)), "horizon.t_max");
    if (spec.delay_1 == spec.delay_2) config_error("horizon.dt2", "must differ from horizon.dt1");
    if (!(spec.theta > 0.0)) config_error("horizon.theta", "must be positive");
    if (!(spec.t_max > 0.0)) config_error("horizon.t_max", "must be positive");
    for (const auto& [key, dt] : {std::pair{"horizon.dt1", spec.delay_1}, std::pair{"horizon.dt2", spec.delay_2}}) {
      try {
        if (delay_steps(dt, c.h) + 2 > c.warmup_steps) config_error(key, "longer than the warm-up allows");
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        config_error(key, "must be a positive multiple of h");
      }
    }
    c.horizon = spec;
  }
  return c;
}

void EventLog::publish(std::string event) {
  {
    const std::lock_guard lock(mutex_);
    events_.push_back(std::move(event));
  }
  cv_.notify_all();
}

void EventLog::close() {
  {
    const std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::vector<std::string> EventLog::read_from(std::size_t& cursor, std::chrono::milliseconds wait, bool& closed) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, wait, [&] { return closed_ || events_.size() > cursor; });
  std::vector<std::string> out(events_.begin() + static_cast<std::ptrdiff_t>(std::min(cursor, events_.size())),
                               events_.end());
  cursor = events_.size();
  closed = closed_;
  return out;
}

struct SessionManager::Session {
  Session(std::string id_, SessionConfig config_, Scenario scenario)
      : id(std::move(id_)),
        config(std::move(config_)),
        sim(scenario.game, scenario.reactions, 0.0, config.h, config.phi0, config.default_u_intended),
        library(generate_library(scenario.game.control_dim(), scenario.game.state_dim)) {}

  std::string id;
  SessionConfig config;
  Simulator sim;
  ProbeLibrary library;
  Pool pool;
  std::optional<BacktestReport> last_report;
  double last_evolution = -std::numeric_limits<double>::infinity();
  long step_counter = 0;
  bool terminated = false;
  std::mutex mutex;
  std::shared_ptr<EventLog> log = std::make_shared<EventLog>();

  json state_json() const {
    const History& h = sim.history();
    const auto k = static_cast<std::size_t>(h.size() - 1);
    return {{"t", h.grid.time(h.size() - 1)},
            {"phi", to_json(h.phi[k])},
            {"u", to_json(h.u_realized[k])},
            {"uo", to_json(h.u_intended[k])}};
  }

  json scenario_json() const {
    const GameDefinition& g = sim.game();
    return {{"name", g.name},
            {"m", g.state_dim},
            {"d", g.control_dim()},
            {"d1", g.control_dims[0]},
            {"d2", g.control_dims[1]},
            {"h", config.h}};
  }
};

json SessionManager::create_session(const SessionConfig& config) {
  Scenario scenario = make_scenario(config.scenario, config.params);
  std::string id;
  {
    const std::lock_guard lock(mutex_);
    id = "s" + std::to_string(next_id_++);
  }
  auto session = std::make_shared<Session>(id, config, std::move(scenario));
  const int d = session->sim.game().control_dim();
  const int m = session->sim.game().state_dim;
  for (long k = 0; k < config.warmup_steps; ++k) session->sim.advance(config.default_u_intended);

  if (config.selection.mode == SelectionConfig::Mode::Pool) {
    std::vector<ProbeSet> sets{config.probes.value_or(canonical_probe_set(d, m))};
    for (int i = 1; i < config.selection.pool_size; ++i) {
      sets.push_back(random_probe_set(session->library, config.selection.seed + static_cast<std::uint64_t>(i)));
    }
    session->pool = make_pool(std::move(sets));
  }

  json out = {{"session", id},
              {"step", 0},
              {"status", "active"},
              {"state", session->state_json()},
              {"scenario", session->scenario_json()}};
  const std::lock_guard lock(mutex_);
  sessions_[id] = std::move(session);
  return out;
}

json SessionManager::create_session(const json& request) { return create_session(parse_session_config(request)); }

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) {
  const std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
  return it->second;
}

json SessionManager::step_session(const std::string& id, const Vec& u_intended_in, long steps) {
  const std::shared_ptr<Session> s = find(id);
  const std::lock_guard lock(s->mutex);
  if (s->terminated) throw Error(ErrorCode::SessionTerminated, "session '" + id + "' has terminated");
  if (steps < 0) config_error("steps", "must be non-negative");

  const GameDefinition& game = s->sim.game();
  const int d = game.control_dim();
  Vec u_intended = s->config.default_u_intended;
  if (u_intended_in.size() == d) {
    u_intended = u_intended_in;
  } else if (u_intended_in.size() == game.control_dims[0]) {
    u_intended.head(game.control_dims[0]) = u_intended_in;
  } else {
    config_error("u_intended", "expected " + std::to_string(d) + " or " + std::to_string(game.control_dims[0]) +
                                   " values");
  }
  if (!u_intended.allFinite()) config_error("u_intended", "must be finite");

  ++s->step_counter;
  json response = {{"session", id}, {"step", s->step_counter}};
  try {
    for (long k = 0; k < steps; ++k) s->sim.advance(u_intended);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFiniteState) throw;
    s->terminated = true;
    response["status"] = "terminated";
    response["reason"] = e.what();
    response["state"] = s->state_json();
    response["fan"] = json::array();
    response["mu"] = nullptr;
    response["horizon_t1"] = nullptr;
    s->log->publish(response.dump());
    s->log->close();
    return response;
  }

  const History& history = s->sim.history();
  const double t0 = history.grid.time(history.size() - 1);
  const int m = game.state_dim;
  const SessionConfig& cfg = s->config;
  SurrogateSpec spec{cfg.probes.value_or(canonical_probe_set(d, m)), cfg.delay, cfg.blend, ControlPlan::hold_last(),
                     {}};

  std::vector<CandidateSet> fan_sets;
  std::vector<double> scores;
  std::size_t best = 0;
  if (cfg.selection.mode == SelectionConfig::Mode::Pool) {
    fan_sets = s->pool.candidates();
    BacktestReport report;
    for (const auto& cand : fan_sets) {
      try {
        report.entries.push_back(backtest(game, history, cand, t0, spec));
      } catch (const Error& e) {
        report.entries.push_back({cand.label, std::numeric_limits<double>::infinity(),
                                  "error:" + std::string(to_string(e.code()))});
      }
      scores.push_back(report.entries.back().score);
    }
    best = argmin_score(scores).value_or(0);
    report.best = best;
    s->last_report = report;
  } else {
    fan_sets.push_back({CandidateLabel::finite(0), spec.probe_set});
    scores.push_back(std::numeric_limits<double>::quiet_NaN());
  }

  json fan = json::array();
  for (std::size_t i = 0; i < fan_sets.size(); ++i) {
    SurrogateSpec member = spec;
    member.probe_set = fan_sets[i].set;
    const Prediction p = predict(game, history, t0, member, cfg.prediction_horizon);
    fan.push_back({{"label", fan_sets[i].label.to_string()},
                   {"best", i == best},
                   {"score", score_json(scores[i])},
                   {"status", p.complete() ? "complete" : "truncated"},
                   {"prediction", prediction_to_json(p)}});
  }

  json horizon = nullptr;
  if (cfg.horizon) {
    SurrogateSpec best_spec = spec;
    best_spec.probe_set = fan_sets[best].set;
    horizon = estimate_horizon(game, history, t0, best_spec, *cfg.horizon);
  }

  // The ensemble is refreshed once per delay interval.
  if (cfg.selection.mode == SelectionConfig::Mode::Pool && s->last_report &&
      t0 - s->last_evolution >= cfg.delay - 1e-9 * cfg.h) {
    s->pool = evolve_pool(s->pool, *s->last_report, s->library,
                          cfg.selection.seed * 1000003ULL + static_cast<std::uint64_t>(s->step_counter));
    s->last_evolution = t0;
  }

  response["status"] = "active";
  response["state"] = s->state_json();
  response["fan"] = std::move(fan);
  response["mu"] = fan_sets[best].label.to_string();
  response["horizon_t1"] = horizon;
  s->log->publish(response.dump());
  return response;
}

json SessionManager::step_session(const std::string& id, const json& request) {
  if (!request.is_object()) config_error("<root>", "expected an object");
  const std::shared_ptr<Session> s = find(id);
  if (!request.contains("u_intended") || !request["u_intended"].is_array()) {
    config_error("u_intended", "expected an array of numbers");
  }
  const json& u = request["u_intended"];
  Vec uo(static_cast<long>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) uo(static_cast<long>(i)) = number(u[i], "u_intended[" + std::to_string(i) + "]");
  long steps = 1;
  if (request.contains("steps")) {
    if (!request["steps"].is_number_integer()) config_error("steps", "expected an integer");
    steps = request["steps"].get<long>();
  }
  return step_session(id, uo, steps);
}

json SessionManager::close_session(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    const std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
    s = std::move(it->second);
    sessions_.erase(it);
  }
  s->log->close();
  return {{"session", id}, {"closed", true}};
}

std::shared_ptr<EventLog> SessionManager::events(const std::string& id) { return find(id)->log; }

History SessionManager::history(const std::string& id) {
  const std::shared_ptr<Session> s = find(id);
  const std::lock_guard lock(s->mutex);
  return s->sim.history();
}

}  // namespace digame
