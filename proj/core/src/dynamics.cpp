#include "digame/dynamics.hpp"

#include "digame/error.hpp"

#include <algorithm>
#include <cmath>

namespace digame {

namespace {

bool same_samples(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size() || a[i] != b[i]) return false;
  }
  return true;
}

std::vector<double> param_or(const Params& params, const std::string& key,
                             std::vector<double> fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (it->second.size() != fallback.size()) {
    throw Error(ErrorCode::BadParams, "parameter '" + key + "' needs " +
                                          std::to_string(fallback.size()) + " values");
  }
  for (double x : it->second) {
    if (!std::isfinite(x)) throw Error(ErrorCode::BadParams, "parameter '" + key + "' must be finite");
  }
  return it->second;
}

void reject_unknown(const Params& params, std::initializer_list<const char*> known) {
  for (const auto& [key, _] : params) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw Error(ErrorCode::BadParams, "unknown parameter '" + key + "'");
    }
  }
}

Scenario linear_duel(const Params& params, bool cross_coupled) {
  const auto k = param_or(params, "k", {0.5, -0.25});
  const auto c = cross_coupled ? param_or(params, "c", {0.1, 0.0}) : std::vector<double>{0.0, 0.0};
  if (cross_coupled) {
    reject_unknown(params, {"k", "c"});
  } else {
    reject_unknown(params, {"k"});
  }

  Scenario s;
  s.game.name = cross_coupled ? "cross-coupled" : "linear-duel";
  s.game.state_dim = 1;
  s.game.control_dims = {1, 1};
  s.game.rhs = [](const Vec&, const Vec& u) {
    Vec out(1);
    out(0) = u(0) - u(1);
    return out;
  };
  s.reactions.max_derivative_order = cross_coupled ? 1 : 0;
  for (int i = 0; i < 2; ++i) {
    const double ki = k[static_cast<std::size_t>(i)];
    const double ci = c[static_cast<std::size_t>(i)];
    if (cross_coupled) {
      s.reactions.laws[static_cast<std::size_t>(i)] =
          [ki, ci](const Vec& uo, const Vec& phi, const Mat& deriv) {
            Vec out(1);
            out(0) = uo(0) + ki * phi(0) + ci * deriv(0, 0);
            return out;
          };
    } else {
      s.reactions.laws[static_cast<std::size_t>(i)] = [ki](const Vec& uo, const Vec& phi, const Mat&) {
        Vec out(1);
        out(0) = uo(0) + ki * phi(0);
        return out;
      };
    }
  }
  return s;
}

Scenario planar_pursuit(const Params& params) {
  reject_unknown(params, {"s", "g"});
  const auto s_gain = param_or(params, "s", {1.0, 1.0});
  const auto g_gain = param_or(params, "g", {1.0, 1.0});

  Scenario s;
  s.game.name = "planar-pursuit";
  s.game.state_dim = 4;
  s.game.control_dims = {2, 2};
  // phi = (x_1, y_1, x_2, y_2); each point moves with its player's velocity.
  s.game.rhs = [](const Vec&, const Vec& u) { return u; };
  s.reactions.max_derivative_order = 0;
  for (int i = 0; i < 2; ++i) {
    const double si = s_gain[static_cast<std::size_t>(i)];
    const double gi = g_gain[static_cast<std::size_t>(i)];
    const long own = 2 * i;
    const long other = 2 * (1 - i);
    s.reactions.laws[static_cast<std::size_t>(i)] =
        [si, gi, own, other](const Vec& uo, const Vec& phi, const Mat&) {
          const Vec gap = phi.segment(other, 2) - phi.segment(own, 2);
          return Vec(uo + si * (gi * gap).array().tanh().matrix());
        };
  }
  return s;
}

}  // namespace

History History::prefix(long last) const {
  if (last < 0 || last >= size()) throw Error(ErrorCode::InvalidSpec, "history prefix out of range");
  History out;
  out.grid = TimeGrid(grid.t_start, grid.h, last + 1);
  const auto n = static_cast<std::ptrdiff_t>(last + 1);
  out.phi.assign(phi.begin(), phi.begin() + n);
  out.u_intended.assign(u_intended.begin(), u_intended.begin() + n);
  out.u_realized.assign(u_realized.begin(), u_realized.begin() + n);
  return out;
}

void History::validate() const {
  const auto n = static_cast<std::size_t>(grid.count);
  if (phi.size() != n || u_intended.size() != n || u_realized.size() != n) {
    throw Error(ErrorCode::InvalidSpec, "history sequences must match the grid length");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (phi[k].size() != phi[0].size() || u_intended[k].size() != u_realized[0].size() ||
        u_realized[k].size() != u_realized[0].size()) {
      throw Error(ErrorCode::InvalidSpec, "history sample dimensions differ", static_cast<long>(k));
    }
    if (!phi[k].allFinite() || !u_intended[k].allFinite() || !u_realized[k].allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "history sample not finite", static_cast<long>(k));
    }
  }
}

bool History::operator==(const History& other) const {
  return grid == other.grid && same_samples(phi, other.phi) &&
         same_samples(u_intended, other.u_intended) && same_samples(u_realized, other.u_realized);
}

double state_scale(const History& history, long last) {
  double scale = 1.0;
  for (long k = 0; k <= last && k < history.size(); ++k) {
    scale = std::max(scale, history.phi[static_cast<std::size_t>(k)].lpNorm<Eigen::Infinity>());
  }
  return scale;
}

std::vector<std::string> scenario_names() { return {"linear-duel", "cross-coupled", "planar-pursuit"}; }

Scenario make_scenario(const std::string& name, const Params& params) {
  if (name == "linear-duel") return linear_duel(params, false);
  if (name == "cross-coupled") return linear_duel(params, true);
  if (name == "planar-pursuit") return planar_pursuit(params);
  throw Error(ErrorCode::UnknownScenario, "no scenario named '" + name + "'");
}

Vec eval_rhs(const GameDefinition& game, const Vec& phi, const Vec& u) {
  if (phi.size() != game.state_dim || u.size() != game.control_dim()) {
    throw Error(ErrorCode::InvalidSpec, "eval_rhs dimension mismatch");
  }
  Vec out = game.rhs(phi, u);
  if (out.size() != game.state_dim || !out.allFinite()) {
    throw Error(ErrorCode::NonFiniteState, "state equation produced a non-finite value");
  }
  return out;
}

Vec apply_reactions(const GameDefinition& game, const ReactionSpec& spec, const Vec& u_intended,
                    const Vec& phi, const Mat& derivative_buffer) {
  if (u_intended.size() != game.control_dim() || phi.size() != game.state_dim) {
    throw Error(ErrorCode::InvalidSpec, "apply_reactions dimension mismatch");
  }
  Vec u(game.control_dim());
  for (int i = 0; i < 2; ++i) {
    const int di = game.control_dims[static_cast<std::size_t>(i)];
    const Vec ui = spec.laws[static_cast<std::size_t>(i)](u_intended.segment(game.offset(i), di), phi,
                                                          derivative_buffer);
    if (ui.size() != di) throw Error(ErrorCode::InvalidSpec, "reaction law returned the wrong size");
    u.segment(game.offset(i), di) = ui;
  }
  if (!u.allFinite()) throw Error(ErrorCode::NonFiniteState, "reaction produced a non-finite control");
  return u;
}

Mat backward_derivatives(const std::vector<Vec>& phi, int order, double h) {
  const long m = phi.empty() ? 0 : phi.back().size();
  Mat out = Mat::Zero(order, m);
  const std::size_t n = phi.size();
  if (order >= 1 && n >= 2) out.row(0) = ((phi[n - 1] - phi[n - 2]) / h).transpose();
  if (order >= 2 && n >= 3) out.row(1) = ((phi[n - 1] - 2.0 * phi[n - 2] + phi[n - 3]) / (h * h)).transpose();
  return out;
}

Simulator::Simulator(GameDefinition game, ReactionSpec spec, double t_start, double h,
                     const Vec& phi0, const Vec& u_intended0)
    : game_(std::move(game)), spec_(std::move(spec)) {
  if (spec_.max_derivative_order < 0 || spec_.max_derivative_order > 2) {
    throw Error(ErrorCode::InvalidSpec, "reaction derivative order must be in [0, 2]");
  }
  if (phi0.size() != game_.state_dim || !phi0.allFinite()) {
    throw Error(ErrorCode::InvalidSpec, "initial state has the wrong size or is not finite");
  }
  history_.grid = TimeGrid(t_start, h, 1);
  history_.phi.push_back(phi0);
  history_.u_intended.emplace_back();
  history_.u_realized.emplace_back();
  set_control(0, u_intended0);
}

void Simulator::set_control(long k, const Vec& u_intended) {
  if (u_intended.size() != game_.control_dim() || !u_intended.allFinite()) {
    throw Error(ErrorCode::InvalidSpec, "intended control has the wrong size or is not finite", k);
  }
  const auto idx = static_cast<std::size_t>(k);
  const Mat deriv = backward_derivatives(history_.phi, spec_.max_derivative_order, history_.grid.h);
  try {
    history_.u_realized[idx] = apply_reactions(game_, spec_, u_intended, history_.phi[idx], deriv);
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), k);
  }
  history_.u_intended[idx] = u_intended;
}

void Simulator::hold(const Vec& u_intended) { set_control(history_.size() - 1, u_intended); }

void Simulator::advance(const Vec& u_intended) {
  const long k = history_.size() - 1;
  set_control(k, u_intended);
  const auto idx = static_cast<std::size_t>(k);
  const Vec u = history_.u_realized[idx];
  Vec next;
  try {
    next = rk4_step([&](double, const Vec& phi) { return eval_rhs(game_, phi, u); },
                    history_.grid.time(k), history_.phi[idx], history_.grid.h);
  } catch (const Error& e) {
    throw Error(ErrorCode::NonFiniteState, e.what(), k + 1);
  }
  history_.phi.push_back(std::move(next));
  history_.u_intended.emplace_back();
  history_.u_realized.emplace_back();
  ++history_.grid.count;
  set_control(k + 1, u_intended);
}

History simulate(const GameDefinition& game, const ReactionSpec& spec, const IntendedSchedule& schedule,
                 const TimeGrid& grid, const Vec& phi0) {
  if (grid.count < 2) throw Error(ErrorCode::InvalidSpec, "simulate needs at least two grid points");
  Simulator sim(game, spec, grid.t_start, grid.h, phi0, schedule(grid.t_start));
  for (long k = 0; k + 1 < grid.count; ++k) sim.advance(schedule(grid.time(k)));
  sim.hold(schedule(grid.time(grid.count - 1)));
  return sim.history();
}

}  // namespace digame
