#pragma once

#include "digame/numerics.hpp"

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace digame {

// State equation phi' = rhs(phi, u) of a two-player game, u = (u_1, u_2).
struct GameDefinition {
  using Rhs = std::function<Vec(const Vec& phi, const Vec& u)>;

  std::string name;
  int state_dim = 0;                // m
  std::array<int, 2> control_dims;  // (d_1, d_2)
  Rhs rhs;

  int control_dim() const { return control_dims[0] + control_dims[1]; }
  int offset(int player) const { return player == 0 ? 0 : control_dims[0]; }
};

// Hidden behavioural reaction u_i = B_i(u_i°, phi, D^1 phi, ..., D^r phi).
// `derivatives` holds r rows, row j-1 being the estimate of D^j phi.
struct ReactionSpec {
  using Law = std::function<Vec(const Vec& u_intended_i, const Vec& phi, const Mat& derivatives)>;

  std::array<Law, 2> laws;
  int max_derivative_order = 0;
};

struct History {
  TimeGrid grid;
  std::vector<Vec> phi;
  std::vector<Vec> u_intended;
  std::vector<Vec> u_realized;

  long size() const { return static_cast<long>(phi.size()); }
  int state_dim() const { return phi.empty() ? 0 : static_cast<int>(phi.front().size()); }
  int control_dim() const { return u_realized.empty() ? 0 : static_cast<int>(u_realized.front().size()); }

  // Copy of samples 0..last (inclusive).
  History prefix(long last) const;
  // Throws InvalidSpec when sequence lengths disagree with the grid or an
  // entry is non-finite.
  void validate() const;

  bool operator==(const History&) const;
};

// Max |phi|_inf over samples 0..last, floored at 1.
double state_scale(const History& history, long last);

using Params = std::map<std::string, std::vector<double>>;

struct Scenario {
  GameDefinition game;
  ReactionSpec reactions;
};

// Known names: linear-duel, cross-coupled, planar-pursuit. Throws
// UnknownScenario or BadParams.
Scenario make_scenario(const std::string& name, const Params& params = {});
std::vector<std::string> scenario_names();

Vec eval_rhs(const GameDefinition& game, const Vec& phi, const Vec& u);

Vec apply_reactions(const GameDefinition& game, const ReactionSpec& spec,
                    const Vec& u_intended, const Vec& phi, const Mat& derivative_buffer);

// Backward differences of the stored states ending at the latest sample;
// rows 0..r-1 estimate D^1..D^r. Missing history contributes zeros.
Mat backward_derivatives(const std::vector<Vec>& phi, int order, double h);

using IntendedSchedule = std::function<Vec(double t)>;

// Incremental ground-truth stepper. The last recorded sample always carries
// the control currently being applied; `advance` overwrites it with the new
// intended control before integrating one step.
class Simulator {
 public:
  Simulator(GameDefinition game, ReactionSpec spec, double t_start, double h,
            const Vec& phi0, const Vec& u_intended0);

  // Holds u_intended over [t_k, t_k + h) and appends the next sample.
  // Throws NonFiniteState with the step index on divergence.
  void advance(const Vec& u_intended);
  // Replaces the intended control of the latest sample without stepping.
  void hold(const Vec& u_intended);

  const History& history() const { return history_; }
  const GameDefinition& game() const { return game_; }
  const ReactionSpec& reactions() const { return spec_; }

 private:
  void set_control(long k, const Vec& u_intended);

  GameDefinition game_;
  ReactionSpec spec_;
  History history_;
};

History simulate(const GameDefinition& game, const ReactionSpec& spec,
                 const IntendedSchedule& schedule, const TimeGrid& grid, const Vec& phi0);

}  // namespace digame
