// digame: simulate interactive games and run delayed-surrogate predictions.
//
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include "digame/error.hpp"
#include "digame/harness.hpp"
#include "digame/history_io.hpp"
#include "digame/http_server.hpp"
#include "digame/predictor.hpp"
#include "digame/selection.hpp"
#include "digame/service.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace digame;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

bool is_validation(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidSpec:
    case ErrorCode::ParseError:
    case ErrorCode::UnknownScenario:
    case ErrorCode::BadParams:
    case ErrorCode::InvalidProbeSet:
    case ErrorCode::AnchorTooEarly:
    case ErrorCode::IoError: return true;
    default: return false;
  }
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, what + ": bad number '" + cell + "'", std::nullopt, what);
    }
  }
  return out;
}

Vec to_vec(const std::vector<double>& xs) { return Eigen::Map<const Vec>(xs.data(), static_cast<long>(xs.size())); }

Params parse_params(const std::vector<std::string>& items) {
  Params params;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "--param expects key=v1,v2 (got '" + item + "')", std::nullopt, "param");
    }
    params[item.substr(0, eq)] = parse_list(item.substr(eq + 1), "param " + item.substr(0, eq));
  }
  return params;
}

std::string scenario_or_infer(const std::string& given, const History& history) {
  return given.empty() ? scenario_for_dimensions(history.state_dim(), history.control_dim()) : given;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and short-term prediction for two-player differential interactive games"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a scenario and write its history CSV");
  sim->set_help_flag("--help", "Print this help message and exit");
  std::string sim_scenario = "linear-duel";
  double sim_h = 0.01;
  long sim_steps = 100;
  double sim_t_start = 0.0;
  std::string sim_out;
  std::string sim_phi0;
  std::string sim_uo;
  std::vector<std::string> sim_params;
  sim->add_option("--scenario", sim_scenario, "linear-duel | cross-coupled | planar-pursuit");
  sim->add_option("--h", sim_h, "Grid step (s)");
  sim->add_option("--steps", sim_steps, "Number of integration steps")->check(CLI::PositiveNumber);
  sim->add_option("--t-start", sim_t_start, "Initial time");
  sim->add_option("--out", sim_out, "Output CSV")->required();
  sim->add_option("--phi0", sim_phi0, "Initial state, comma separated");
  sim->add_option("--uo", sim_uo, "Constant intended controls, comma separated");
  sim->add_option("--param", sim_params, "Scenario parameter key=v1,v2 (repeatable)");

  // predict
  auto* pred = app.add_subcommand("predict", "Run the delayed surrogate from an anchor of a recorded history");
  std::string pred_history;
  std::string pred_scenario;
  std::string pred_probes;
  std::string pred_out;
  double pred_t0 = 0.0;
  double pred_dt = 0.1;
  double pred_blend = 1.0;
  double pred_horizon = 1.0;
  pred->add_option("--history", pred_history, "History CSV")->required();
  pred->add_option("--t0", pred_t0, "Anchor time")->required();
  pred->add_option("--dt", pred_dt, "Delay (multiple of the grid step)");
  pred->add_option("--blend", pred_blend, "State evaluation blend in [0, 1]");
  pred->add_option("--horizon", pred_horizon, "Prediction length (s)");
  pred->add_option("--probes", pred_probes, "Probe-set JSON (default: coordinate probes)");
  pred->add_option("--scenario", pred_scenario, "Scenario supplying the state equation (default: by dimensions)");
  pred->add_option("--out", pred_out, "Prediction JSON (default: stdout)");

  // backtest
  auto* back = app.add_subcommand("backtest", "Score candidate probe sets on the window before t0");
  std::string back_history;
  std::string back_candidates;
  std::string back_scenario;
  double back_t0 = 0.0;
  double back_dt = 0.1;
  double back_blend = 1.0;
  back->add_option("--history", back_history, "History CSV")->required();
  back->add_option("--t0", back_t0, "Time at the end of the backtest window")->required();
  back->add_option("--dt", back_dt, "Delay and window length");
  back->add_option("--blend", back_blend, "State evaluation blend in [0, 1]");
  back->add_option("--candidates", back_candidates, "Directory of probe-set JSON files")->required();
  back->add_option("--scenario", back_scenario, "Scenario supplying the state equation (default: by dimensions)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run an experiment config");
  std::string sweep_config;
  sweep->add_option("--config", sweep_config, "Experiment JSON")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the live-play session API");
  int serve_port = 8080;
  std::string serve_host = "127.0.0.1";
  serve->add_option("--port", serve_port, "TCP port");
  serve->add_option("--host", serve_host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*sim) {
      const Scenario s = make_scenario(sim_scenario, parse_params(sim_params));
      const ScenarioDefaults defaults = scenario_defaults(sim_scenario);
      const Vec phi0 = sim_phi0.empty() ? defaults.phi0 : to_vec(parse_list(sim_phi0, "phi0"));
      const Vec uo = sim_uo.empty() ? defaults.u_intended : to_vec(parse_list(sim_uo, "uo"));
      if (phi0.size() != s.game.state_dim) throw Error(ErrorCode::ConfigError, "phi0 has the wrong size", {}, "phi0");
      if (uo.size() != s.game.control_dim()) throw Error(ErrorCode::ConfigError, "uo has the wrong size", {}, "uo");
      const History h = simulate(s.game, s.reactions, IntendedProfile::constant(uo).schedule(),
                                 TimeGrid(sim_t_start, sim_h, sim_steps + 1), phi0);
      save_history(h, sim_out);
    } else if (*pred) {
      const History h = load_history(pred_history);
      const Scenario s = make_scenario(scenario_or_infer(pred_scenario, h));
      const ProbeSet probes =
          pred_probes.empty() ? canonical_probe_set(h.control_dim(), h.state_dim()) : load_probe_set(pred_probes);
      const SurrogateSpec spec{probes, pred_dt, pred_blend, ControlPlan::hold_last(), {}};
      const Prediction p = predict(s.game, h, pred_t0, spec, pred_horizon);
      const std::string text = prediction_to_json(p).dump(1) + "\n";
      if (pred_out.empty()) {
        std::cout << text;
      } else {
        write_file_atomic(pred_out, text);
      }
    } else if (*back) {
      const History h = load_history(back_history);
      const Scenario s = make_scenario(scenario_or_infer(back_scenario, h));
      std::vector<fs::path> files;
      if (!fs::is_directory(back_candidates)) {
        throw Error(ErrorCode::IoError, "candidates directory not found: " + back_candidates);
      }
      for (const auto& entry : fs::directory_iterator(back_candidates)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) throw Error(ErrorCode::ConfigError, "no *.json candidates found", {}, "candidates");
      std::vector<CandidateSet> cands;
      for (std::size_t i = 0; i < files.size(); ++i) {
        cands.push_back({CandidateLabel::finite(static_cast<long>(i)), load_probe_set(files[i])});
      }
      const SurrogateSpec spec{cands.front().set, back_dt, back_blend, ControlPlan::hold_last(), {}};
      std::cout << "label,file,score,status,best\n";
      BacktestReport report;
      std::vector<double> scores;
      for (const auto& c : cands) {
        report.entries.push_back(backtest(s.game, h, c, back_t0, spec));
        scores.push_back(report.entries.back().score);
      }
      const auto best = argmin_score(scores);
      for (std::size_t i = 0; i < cands.size(); ++i) {
        std::cout << report.entries[i].label.to_string() << ',' << files[i].filename().string() << ','
                  << format_double(report.entries[i].score) << ',' << report.entries[i].status << ','
                  << (best && *best == i ? 1 : 0) << '\n';
      }
      if (!best) throw Error(ErrorCode::AllCandidatesFailed, "every candidate backtest truncated");
    } else if (*sweep) {
      const ExperimentConfig config = load_experiment_config(sweep_config);
      const ExperimentReport report = run_experiment(config);
      std::cout << summary_csv(report.rows);
    } else if (*serve) {
      SessionManager sessions;
      HttpServer server(sessions);
      std::fprintf(stderr, "listening on %s:%d\n", serve_host.c_str(), serve_port);
      if (!server.listen(serve_host, serve_port)) {
        std::fprintf(stderr, "cannot listen on %s:%d\n", serve_host.c_str(), serve_port);
        return kRuntime;
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return is_validation(e.code()) ? kValidation : kRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
