#pragma once

#include "digame/dynamics.hpp"
#include "digame/predictor.hpp"
#include "digame/probes.hpp"
#include "digame/selection.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace digame {

// u°_i(t) = value_i + amplitude_i * sin(2*pi*frequency_i*t + phase_i)
struct IntendedProfile {
  Vec value;
  Vec amplitude;
  Vec frequency;
  Vec phase;

  static IntendedProfile constant(const Vec& value);
  IntendedSchedule schedule() const;
};

struct ScenarioDefaults {
  Vec phi0;
  Vec u_intended;
};

ScenarioDefaults scenario_defaults(const std::string& name);

// Built-in scenario whose state equation matches the given dimensions
// (all built-ins with equal dimensions share the same state equation).
std::string scenario_for_dimensions(int state_dim, int control_dim);

struct ProbeSource {
  enum class Kind { Canonical, File, Library, Projective };
  Kind kind = Kind::Canonical;
  std::filesystem::path path;
  std::uint64_t seed = 0;
  Vec covector;
};

struct SelectionConfig {
  enum class Mode { None, Pool, Projective };
  Mode mode = Mode::None;
  int pool_size = 4;
  int rounds = 3;
  int budget = 16;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  std::string scenario;
  Params params;
  TimeGrid grid;
  Vec phi0;
  IntendedProfile intended;
  ProbeSource probes;
  std::vector<double> delays;
  std::vector<double> blends;
  bool plan_from_schedule = false;
  InversionSettings inversion;
  std::vector<double> anchors;
  double prediction_horizon = 1.0;
  SelectionConfig selection;
  std::optional<HorizonSpec> horizon;
  std::filesystem::path output_dir;
};

// Throws Error{ConfigError} with the offending field path in field().
// Relative paths resolve against base_dir.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct SweepRow {
  double anchor = 0.0;
  double delay = 0.0;
  double blend = 0.0;
  std::string mu;
  std::optional<double> rms_error;
  std::optional<double> horizon_t1;
  std::string status;
};

struct ExperimentReport {
  std::vector<SweepRow> rows;
  std::vector<std::filesystem::path> files;
};

// Simulates the scenario and runs every (delay, blend, anchor) row,
// writing history.csv, prediction_NNNN.json, summary.csv and selection
// traces into output_dir. Row failures are recorded, not thrown.
ExperimentReport run_experiment(const ExperimentConfig& config);

std::string summary_csv(const std::vector<SweepRow>& rows);

}  // namespace digame
