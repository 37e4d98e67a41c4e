#include "digame/harness.hpp"

#include "digame/error.hpp"
#include "digame/history_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace digame {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::ConfigError, field + ": " + message, std::nullopt, field);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) config_error(path.empty() ? "<root>" : path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) config_error(join(path, key), "missing required field");
  return *it;
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) config_error(field, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) config_error(field, "must be finite");
  return x;
}

std::vector<double> numbers(const json& j, const std::string& field) {
  if (j.is_number()) return {number(j, field)};
  if (!j.is_array()) config_error(field, "expected a number or an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

Vec vec(const json& j, const std::string& field, long size) {
  const auto v = numbers(j, field);
  if (static_cast<long>(v.size()) != size) config_error(field, "expected " + std::to_string(size) + " values");
  return Eigen::Map<const Vec>(v.data(), size);
}

std::string text(const json& j, const std::string& field) {
  if (!j.is_string()) config_error(field, "expected a string");
  return j.get<std::string>();
}

std::uint64_t seed_of(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 0) config_error(field, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

int positive_int(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 1) config_error(field, "expected a positive integer");
  return j.get<int>();
}

std::string status_of(const Prediction& p) {
  if (p.complete()) return "complete";
  return "truncated:" + p.reason + "@" + std::to_string(p.truncated_step);
}

}  // namespace

IntendedProfile IntendedProfile::constant(const Vec& value) {
  const Vec zero = Vec::Zero(value.size());
  return {value, zero, zero, zero};
}

IntendedSchedule IntendedProfile::schedule() const {
  return [p = *this](double t) -> Vec {
    Vec out = p.value;
    for (long i = 0; i < out.size(); ++i) {
      if (p.amplitude(i) != 0.0) {
        out(i) += p.amplitude(i) * std::sin(2.0 * std::numbers::pi * p.frequency(i) * t + p.phase(i));
      }
    }
    return out;
  };
}

ScenarioDefaults scenario_defaults(const std::string& name) {
  if (name == "linear-duel" || name == "cross-coupled") {
    return {Vec::Constant(1, 1.0), (Vec(2) << 0.2, -0.1).finished()};
  }
  if (name == "planar-pursuit") {
    return {(Vec(4) << 0.0, 0.0, 2.0, 1.0).finished(), (Vec(4) << 0.3, 0.1, 0.2, -0.1).finished()};
  }
  throw Error(ErrorCode::UnknownScenario, "no scenario named '" + name + "'");
}

std::string scenario_for_dimensions(int state_dim, int control_dim) {
  for (const auto& name : scenario_names()) {
    const Scenario s = make_scenario(name);
    if (s.game.state_dim == state_dim && s.game.control_dim() == control_dim) return name;
  }
  throw Error(ErrorCode::UnknownScenario, "no built-in scenario with m = " + std::to_string(state_dim) +
                                              ", d = " + std::to_string(control_dim));
}

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  const auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() ? p : base_dir / p; };

  const json& scen = require(j, "scenario", "");
  c.scenario = text(require(scen, "name", "scenario"), "scenario.name");
  if (scen.contains("params")) {
    const json& params = scen["params"];
    if (!params.is_object()) config_error("scenario.params", "expected an object");
    for (const auto& [key, value] : params.items()) c.params[key] = numbers(value, "scenario.params." + key);
  }
  Scenario scenario;
  try {
    scenario = make_scenario(c.scenario, c.params);
  } catch (const Error& e) {
    config_error(e.code() == ErrorCode::UnknownScenario ? "scenario.name" : "scenario.params", e.what());
  }
  const int m = scenario.game.state_dim;
  const int d = scenario.game.control_dim();
  const ScenarioDefaults defaults = scenario_defaults(c.scenario);

  const json& grid = require(j, "grid", "");
  const double t_start = grid.contains("t_start") ? number(grid["t_start"], "grid.t_start") : 0.0;
  const double h = number(require(grid, "h", "grid"), "grid.h");
  if (!(h > 0.0)) config_error("grid.h", "must be positive");
  const int count = positive_int(require(grid, "count", "grid"), "grid.count");
  if (count < 2) config_error("grid.count", "must be at least 2");
  c.grid = TimeGrid(t_start, h, count);

  c.phi0 = j.contains("phi0") ? vec(j["phi0"], "phi0", m) : defaults.phi0;

  c.intended = IntendedProfile::constant(defaults.u_intended);
  if (j.contains("intended")) {
    const json& in = j["intended"];
    if (!in.is_object()) config_error("intended", "expected an object");
    const auto field_or = [&](const char* key, const Vec& fallback) {
      return in.contains(key) ? vec(in[key], std::string("intended.") + key, d) : fallback;
    };
    c.intended.value = field_or("value", defaults.u_intended);
    c.intended.amplitude = field_or("amplitude", Vec::Zero(d));
    c.intended.frequency = field_or("frequency", Vec::Zero(d));
    c.intended.phase = field_or("phase", Vec::Zero(d));
  }

  if (j.contains("probes")) {
    const json& p = j["probes"];
    const std::string source = text(require(p, "source", "probes"), "probes.source");
    if (source == "canonical") {
      c.probes.kind = ProbeSource::Kind::Canonical;
    } else if (source == "file") {
      c.probes.kind = ProbeSource::Kind::File;
      c.probes.path = resolve(text(require(p, "path", "probes"), "probes.path"));
      if (!std::filesystem::exists(c.probes.path)) config_error("probes.path", "file does not exist");
    } else if (source == "library") {
      c.probes.kind = ProbeSource::Kind::Library;
      c.probes.seed = seed_of(require(p, "seed", "probes"), "probes.seed");
    } else if (source == "projective") {
      c.probes.kind = ProbeSource::Kind::Projective;
      c.probes.covector = vec(require(p, "c", "probes"), "probes.c", d + 2);
      if (!(c.probes.covector.norm() > 0.0)) config_error("probes.c", "must be nonzero");
    } else {
      config_error("probes.source", "expected canonical, file, library or projective");
    }
  }

  const json& sur = require(j, "surrogate", "");
  c.delays = numbers(require(sur, "dt", "surrogate"), "surrogate.dt");
  if (c.delays.empty()) config_error("surrogate.dt", "delay grid is empty");
  for (std::size_t i = 0; i < c.delays.size(); ++i) {
    const std::string field = "surrogate.dt[" + std::to_string(i) + "]";
    try {
      delay_steps(c.delays[i], h);
    } catch (const Error&) {
      config_error(field, "must be a positive multiple of grid.h");
    }
  }
  c.blends = sur.contains("blend") ? numbers(sur["blend"], "surrogate.blend") : std::vector<double>{1.0};
  if (c.blends.empty()) config_error("surrogate.blend", "blend grid is empty");
  for (std::size_t i = 0; i < c.blends.size(); ++i) {
    if (c.blends[i] < 0.0 || c.blends[i] > 1.0) {
      config_error("surrogate.blend[" + std::to_string(i) + "]", "must lie in [0, 1]");
    }
  }
  if (sur.contains("plan")) {
    const std::string plan = text(sur["plan"], "surrogate.plan");
    if (plan == "schedule") {
      c.plan_from_schedule = true;
    } else if (plan != "hold-last") {
      config_error("surrogate.plan", "expected hold-last or schedule");
    }
  }
  if (sur.contains("tol")) c.inversion.tol = number(sur["tol"], "surrogate.tol");
  if (sur.contains("max_iter")) c.inversion.max_iter = positive_int(sur["max_iter"], "surrogate.max_iter");
  if (sur.contains("trust_radius")) c.inversion.trust_radius = number(sur["trust_radius"], "surrogate.trust_radius");
  if (!(c.inversion.tol > 0.0)) config_error("surrogate.tol", "must be positive");
  if (c.inversion.trust_radius && !(*c.inversion.trust_radius > 0.0)) {
    config_error("surrogate.trust_radius", "must be positive");
  }

  c.anchors = numbers(require(j, "anchors", ""), "anchors");
  if (c.anchors.empty()) config_error("anchors", "anchor list is empty");
  for (std::size_t i = 0; i < c.anchors.size(); ++i) {
    if (!c.grid.index_of(c.anchors[i])) config_error("anchors[" + std::to_string(i) + "]", "not a grid point");
  }
  c.prediction_horizon = number(require(j, "prediction_T", ""), "prediction_T");
  if (c.prediction_horizon < 0.0 || std::abs(c.prediction_horizon / h - std::round(c.prediction_horizon / h)) > 1e-6) {
    config_error("prediction_T", "must be a non-negative multiple of grid.h");
  }

  if (j.contains("selection")) {
    const json& s = j["selection"];
    const std::string mode = text(require(s, "mode", "selection"), "selection.mode");
    if (mode == "none") {
      c.selection.mode = SelectionConfig::Mode::None;
    } else if (mode == "pool") {
      c.selection.mode = SelectionConfig::Mode::Pool;
      if (s.contains("size")) c.selection.pool_size = positive_int(s["size"], "selection.size");
      if (c.selection.pool_size < 2) config_error("selection.size", "pool needs at least two members");
    } else if (mode == "projective") {
      c.selection.mode = SelectionConfig::Mode::Projective;
      if (s.contains("budget")) c.selection.budget = positive_int(s["budget"], "selection.budget");
    } else {
      config_error("selection.mode", "expected none, pool or projective");
    }
    if (s.contains("seed")) c.selection.seed = seed_of(s["seed"], "selection.seed");
  }

  if (j.contains("horizon")) {
    const json& hz = j["horizon"];
    HorizonSpec spec;
    spec.delay_1 = number(require(hz, "dt1", "horizon"), "horizon.dt1");
    spec.delay_2 = number(require(hz, "dt2", "horizon"), "horizon.dt2");
    spec.theta = number(require(hz, "theta", "horizon"), "horizon.theta");
    spec.t_max = number(require(hz, "t_max", "horizon"), "horizon.t_max");
    if (spec.delay_1 == spec.delay_2) config_error("horizon.dt2", "must differ from horizon.dt1");
    if (!(spec.theta > 0.0)) config_error("horizon.theta", "must be positive");
    if (!(spec.t_max > 0.0)) config_error("horizon.t_max", "must be positive");
    for (const auto& [key, dt] : {std::pair{"horizon.dt1", spec.delay_1}, std::pair{"horizon.dt2", spec.delay_2}}) {
      try {
        delay_steps(dt, h);
      } catch (const Error&) {
        config_error(key, "must be a positive multiple of grid.h");
      }
    }
    c.horizon = spec;
  }

  c.output_dir = resolve(text(require(j, "output_dir", ""), "output_dir"));
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what(), std::nullopt, "<root>");
  }
  return parse_experiment_config(j, path.parent_path());
}

std::string summary_csv(const std::vector<SweepRow>& rows) {
  std::string out = "anchor,dt,blend,mu,rms_error,horizon_t1,status\n";
  for (const auto& r : rows) {
    out += format_double(r.anchor) + ',' + format_double(r.delay) + ',' + format_double(r.blend) + ',' + r.mu + ',';
    if (r.rms_error) out += format_double(*r.rms_error);
    out += ',';
    if (r.horizon_t1) out += format_double(*r.horizon_t1);
    out += ',' + r.status + '\n';
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  const Scenario scenario = make_scenario(config.scenario, config.params);
  const GameDefinition& game = scenario.game;
  const int m = game.state_dim;
  const int d = game.control_dim();
  const IntendedSchedule schedule = config.intended.schedule();
  const History history = simulate(game, scenario.reactions, schedule, config.grid, config.phi0);

  std::filesystem::create_directories(config.output_dir);
  ExperimentReport report;
  const auto emit = [&](const std::string& name, const std::string& content) {
    const auto path = config.output_dir / name;
    write_file_atomic(path, content);
    report.files.push_back(path);
  };
  emit("history.csv", history_to_csv(history));

  const ProbeLibrary lib = generate_library(d, m);
  const std::vector<ProbeExpression> base = default_projective_base(d);
  ProbeSet base_set = canonical_probe_set(d, m);
  switch (config.probes.kind) {
    case ProbeSource::Kind::Canonical: break;
    case ProbeSource::Kind::File: base_set = load_probe_set(config.probes.path); break;
    case ProbeSource::Kind::Library: base_set = random_probe_set(lib, config.probes.seed); break;
    case ProbeSource::Kind::Projective: base_set = hyperplane_probe_set(base, config.probes.covector, d, m); break;
  }

  long row_index = 0;
  int combo = 0;
  for (double delay : config.delays) {
    for (double blend : config.blends) {
      std::optional<CandidateLabel> prev_mu;
      std::string trace;
      Pool pool;
      if (config.selection.mode == SelectionConfig::Mode::Pool) {
        std::vector<ProbeSet> sets{base_set};
        for (int i = 1; i < config.selection.pool_size; ++i) {
          sets.push_back(random_probe_set(lib, config.selection.seed + static_cast<std::uint64_t>(i)));
        }
        pool = make_pool(std::move(sets));
        trace = "round,label,score,replaced\n";
      } else if (config.selection.mode == SelectionConfig::Mode::Projective) {
        trace = "t0";
        for (int i = 0; i < d + 2; ++i) trace += ",c_" + std::to_string(i);
        trace += ",score\n";
      }

      long round = 0;
      for (double anchor : config.anchors) {
        SweepRow row{anchor, delay, blend, "fixed", std::nullopt, std::nullopt, ""};
        const std::uint64_t row_seed = config.selection.seed * 1000003ULL + static_cast<std::uint64_t>(row_index);
        SurrogateSpec spec{base_set, delay, blend, ControlPlan::hold_last(), config.inversion};
        if (config.plan_from_schedule) spec.plan = ControlPlan::from_schedule(schedule);
        try {
          if (config.selection.mode == SelectionConfig::Mode::Pool) {
            BacktestReport rep;
            std::vector<double> scores;
            std::vector<CandidateSet> cands = pool.candidates();
            for (const auto& cand : cands) {
              rep.entries.push_back(backtest(game, history, cand, anchor, spec));
              scores.push_back(rep.entries.back().score);
            }
            const auto best = argmin_score(scores);
            const std::size_t worst = argmax_score(scores);
            for (std::size_t i = 0; i < rep.entries.size(); ++i) {
              trace += std::to_string(round) + ',' + rep.entries[i].label.to_string() + ',' +
                       format_double(rep.entries[i].score) + ',' + (i == worst ? "1" : "0") + '\n';
            }
            pool = evolve_pool(pool, rep, lib, row_seed);
            ++round;
            if (!best) throw Error(ErrorCode::AllCandidatesFailed, "every pool backtest truncated");
            row.mu = rep.entries[*best].label.to_string();
            spec.probe_set = cands[*best].set;
          } else if (config.selection.mode == SelectionConfig::Mode::Projective) {
            const ProjectiveSearchResult res = projective_search(game, history, base, anchor, spec, prev_mu,
                                                                 config.selection.budget, row_seed);
            prev_mu = res.label;
            row.mu = res.label.to_string();
            spec.probe_set = hyperplane_probe_set(base, res.label.c, d, m);
            trace += format_double(anchor);
            for (long i = 0; i < res.label.c.size(); ++i) trace += ',' + format_double(res.label.c(i));
            trace += ',' + format_double(res.report.best_score()) + '\n';
          }

          const Prediction pred = predict(game, history, anchor, spec, config.prediction_horizon);
          json pj = prediction_to_json(pred);
          pj["row"] = row_index;
          pj["dt"] = delay;
          pj["blend"] = blend;
          pj["mu"] = row.mu;
          char name[64];
          std::snprintf(name, sizeof(name), "prediction_%04ld.json", row_index);
          emit(name, pj.dump(1) + "\n");

          const long i0 = *history.grid.index_of(anchor);
          const long available = std::min(pred.steps(), history.size() - 1 - i0);
          const std::span<const Vec> truth(history.phi.data() + i0 + 1, static_cast<std::size_t>(available));
          const std::span<const Vec> predicted(pred.phi_hat.data(), static_cast<std::size_t>(available));
          row.rms_error = rms_state_error(predicted, truth, state_scale(history, i0));
          row.status = status_of(pred);
          if (config.horizon) row.horizon_t1 = estimate_horizon(game, history, anchor, spec, *config.horizon);
        } catch (const Error& e) {
          row.status = "error:" + std::string(to_string(e.code()));
        }
        report.rows.push_back(std::move(row));
        ++row_index;
      }

      if (config.selection.mode == SelectionConfig::Mode::Pool) {
        emit("selection_" + std::to_string(combo) + ".csv", trace);
      } else if (config.selection.mode == SelectionConfig::Mode::Projective) {
        emit("projective_" + std::to_string(combo) + ".csv", trace);
      }
      ++combo;
    }
  }
  emit("summary.csv", summary_csv(report.rows));
  return report;
}

}  // namespace digame
