#pragma once

#include "digame/conservation.hpp"
#include "digame/dynamics.hpp"
#include "digame/inversion.hpp"
#include "digame/probes.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace digame {

// Intended-control samples pushed by a live client. sample(t) returns the
// latest value pushed at or before t (the earliest one if t precedes all).
class LiveControlStream {
 public:
  void push(double t, Vec u_intended);
  Vec sample(double t) const;
  bool empty() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::pair<double, Vec>> samples_;
};

// Intended controls assumed after the anchor.
struct ControlPlan {
  enum class Kind { HoldLast, Schedule, Live };

  Kind kind = Kind::HoldLast;
  IntendedSchedule schedule;
  std::shared_ptr<LiveControlStream> live;

  static ControlPlan hold_last() { return {}; }
  static ControlPlan from_schedule(IntendedSchedule fn) { return {Kind::Schedule, std::move(fn), nullptr}; }
  static ControlPlan from_stream(std::shared_ptr<LiveControlStream> s) {
    return {Kind::Live, nullptr, std::move(s)};
  }
};

struct SurrogateSpec {
  ProbeSet probe_set;
  double delay = 0.1;  // an integer multiple of the grid step
  double blend = 1.0;  // state read at t - blend * delay
  ControlPlan plan;
  InversionSettings inversion;
};

struct StepDiagnostics {
  int iterations = 0;
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
};

struct Prediction {
  enum class Status { Complete, Truncated };

  double anchor = 0.0;
  double h = 0.0;
  long requested_steps = 0;
  // phi_hat[k] is the state at anchor + (k+1)h; u_star[k] the control held
  // over the step ending there.
  std::vector<Vec> phi_hat;
  std::vector<Vec> u_star;
  std::vector<StepDiagnostics> diagnostics;
  Status status = Status::Complete;
  long truncated_step = 0;  // 1-based step that failed
  std::string reason;

  long steps() const { return static_cast<long>(phi_hat.size()); }
  double time(long k) const { return anchor + static_cast<double>(k + 1) * h; }
  bool complete() const { return status == Status::Complete; }
};

// Delay expressed in grid steps; throws InvalidSpec if it is not a positive
// integer multiple of h.
long delay_steps(double delay, double h);

// Integrates the delayed surrogate phi' = Phi(phi, u*) from the anchor t0
// over `horizon` seconds, with u* obtained by inverting the conserved
// combinations read `delay` seconds back. Only history up to t0 is used.
//
// Throws AnchorTooEarly or InvalidSpec; inversion and integration failures
// truncate the returned Prediction instead.
Prediction predict(const GameDefinition& game, const History& history, double t0, const SurrogateSpec& spec,
                   double horizon);

struct HorizonSpec {
  double delay_1 = 0.1;
  double delay_2 = 0.2;
  double theta = 1e-3;
  double t_max = 1.0;
  bool allow_equal_delays = false;
};

// Largest t1 <= t0 + t_max up to which the predictions with the two delays
// stay within theta (relative to the history's state scale).
double estimate_horizon(const GameDefinition& game, const History& history, double t0,
                        const SurrogateSpec& spec_template, const HorizonSpec& hspec);

// RMS over samples of ||predicted_k - observed_k||_2 / scale.
double rms_state_error(std::span<const Vec> predicted, std::span<const Vec> observed, double scale);

nlohmann::json prediction_to_json(const Prediction& p);

}  // namespace digame
