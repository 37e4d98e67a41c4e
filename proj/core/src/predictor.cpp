#include "digame/predictor.hpp"

#include "digame/error.hpp"

#include <algorithm>
#include <cmath>

namespace digame {

void LiveControlStream::push(double t, Vec u_intended) {
  const std::lock_guard lock(mutex_);
  samples_.emplace_back(t, std::move(u_intended));
}

Vec LiveControlStream::sample(double t) const {
  const std::lock_guard lock(mutex_);
  if (samples_.empty()) throw Error(ErrorCode::InvalidSpec, "live control stream has no samples");
  const Vec* best = &samples_.front().second;
  for (const auto& [ts, u] : samples_) {
    if (ts <= t) best = &u;
  }
  return *best;
}

bool LiveControlStream::empty() const {
  const std::lock_guard lock(mutex_);
  return samples_.empty();
}

long delay_steps(double delay, double h) {
  const double x = delay / h;
  const double steps = std::round(x);
  if (!std::isfinite(x) || steps < 1.0 || std::abs(x - steps) > 1e-6) {
    throw Error(ErrorCode::InvalidSpec, "delay must be a positive multiple of the grid step");
  }
  return static_cast<long>(steps);
}

namespace {

long horizon_steps(double horizon, double h) {
  const double x = horizon / h;
  const double steps = std::round(x);
  if (!std::isfinite(x) || horizon < 0.0 || std::abs(x - steps) > 1e-6) {
    throw Error(ErrorCode::InvalidSpec, "prediction horizon must be a non-negative multiple of the grid step");
  }
  return static_cast<long>(steps);
}

long anchor_index(const History& history, double t0) {
  const auto i0 = history.grid.index_of(t0);
  if (!i0) throw Error(ErrorCode::InvalidSpec, "anchor is not a grid point of the history");
  return *i0;
}

double control_amplitude(const History& history, long last) {
  double amp = 1.0;
  for (long k = 0; k <= last; ++k) {
    amp = std::max(amp, history.u_realized[static_cast<std::size_t>(k)].lpNorm<Eigen::Infinity>());
  }
  return amp;
}

}  // namespace

Prediction predict(const GameDefinition& game, const History& history, double t0, const SurrogateSpec& spec,
                   double horizon) {
  const double h = history.grid.h;
  const long i0 = anchor_index(history, t0);
  const long delay = delay_steps(spec.delay, h);
  if (!(spec.blend >= 0.0 && spec.blend <= 1.0)) throw Error(ErrorCode::InvalidSpec, "blend must lie in [0, 1]");
  if (i0 < delay + 2) {
    throw Error(ErrorCode::AnchorTooEarly, "anchor needs at least delay + 2 samples of history", i0);
  }
  if (spec.probe_set.control_dim() != history.control_dim() || spec.probe_set.state_dim() != history.state_dim() ||
      game.state_dim != history.state_dim() || game.control_dim() != history.control_dim()) {
    throw Error(ErrorCode::InvalidSpec, "game, probe set and history dimensions disagree");
  }
  if (spec.plan.kind == ControlPlan::Kind::Schedule && !spec.plan.schedule) {
    throw Error(ErrorCode::InvalidSpec, "schedule plan without a schedule");
  }
  if (spec.plan.kind == ControlPlan::Kind::Live && !spec.plan.live) {
    throw Error(ErrorCode::InvalidSpec, "live plan without a stream");
  }
  const long n = horizon_steps(horizon, h);

  Prediction out;
  out.anchor = history.grid.time(i0);
  out.h = h;
  out.requested_steps = n;
  if (n == 0) return out;

  // Only data up to the anchor is visible to the surrogate.
  const History snapshot = history.prefix(i0);
  const FrameSeries frames = estimate_frames(snapshot, spec.probe_set);

  InversionSettings inversion = spec.inversion;
  if (!inversion.trust_radius) inversion.trust_radius = 10.0 * control_amplitude(snapshot, i0);

  // Method-of-steps buffer indexed like the history grid. Entries up to the
  // anchor are observed; later ones are filled by the surrogate.
  std::vector<Vec> phi_buf = snapshot.phi;
  std::vector<Vec> u_buf = snapshot.u_realized;
  std::vector<Vec> uo_buf = snapshot.u_intended;
  const auto idx = [](long k) { return static_cast<std::size_t>(k); };

  const auto truncate = [&](long step, const Error& e) {
    out.status = Prediction::Status::Truncated;
    out.truncated_step = step;
    out.reason = std::string(to_string(e.code()));
  };

  for (long s = 0; s < n; ++s) {
    const long j = i0 + s;
    const double t = history.grid.time(j);

    Vec uo;
    switch (spec.plan.kind) {
      case ControlPlan::Kind::HoldLast: uo = uo_buf[idx(i0)]; break;
      case ControlPlan::Kind::Schedule: uo = spec.plan.schedule(t); break;
      case ControlPlan::Kind::Live: uo = spec.plan.live->sample(t); break;
    }

    const long jd = j - delay;
    const Mat& alpha = frames[std::min(jd, i0)].alpha;

    Vec u_star;
    StepDiagnostics diag;
    try {
      const Vec f_target =
          alpha * eval_probe_vector(spec.probe_set, u_buf[idx(jd)], uo_buf[idx(jd)], phi_buf[idx(jd)]);

      const double x = static_cast<double>(j) - spec.blend * static_cast<double>(delay);
      const long lo = static_cast<long>(std::floor(x));
      const double frac = x - static_cast<double>(lo);
      Vec phi_eval = phi_buf[idx(lo)];
      if (frac > 0.0) phi_eval = (1.0 - frac) * phi_buf[idx(lo)] + frac * phi_buf[idx(lo + 1)];

      const Vec& seed = s == 0 ? u_buf[idx(i0)] : out.u_star.back();
      const InversionResult inv =
          invert_controls(alpha, f_target, spec.probe_set, uo, phi_eval, seed, inversion);
      u_star = inv.u;
      diag = {inv.iterations, inv.min_singular_value, inv.max_singular_value};
    } catch (const Error& e) {
      truncate(s + 1, e);
      break;
    }

    Vec next;
    try {
      next = rk4_step([&](double, const Vec& phi) { return eval_rhs(game, phi, u_star); }, t, phi_buf[idx(j)], h);
    } catch (const Error& e) {
      truncate(s + 1, e);
      break;
    }

    if (j > i0) {
      u_buf[idx(j)] = u_star;
      uo_buf[idx(j)] = uo;
    }
    phi_buf.push_back(next);
    u_buf.emplace_back();
    uo_buf.emplace_back();

    out.phi_hat.push_back(std::move(next));
    out.u_star.push_back(std::move(u_star));
    out.diagnostics.push_back(diag);
  }
  return out;
}

double estimate_horizon(const GameDefinition& game, const History& history, double t0,
                        const SurrogateSpec& spec_template, const HorizonSpec& hspec) {
  if (!(hspec.theta > 0.0) || !(hspec.t_max > 0.0)) {
    throw Error(ErrorCode::InvalidSpec, "horizon needs theta > 0 and t_max > 0");
  }
  if (hspec.delay_1 == hspec.delay_2 && !hspec.allow_equal_delays) {
    throw Error(ErrorCode::InvalidSpec, "horizon delays must differ");
  }
  const long i0 = anchor_index(history, t0);
  const double h = history.grid.h;
  const long n = static_cast<long>(std::floor(hspec.t_max / h + 1e-6));

  SurrogateSpec first = spec_template;
  first.delay = hspec.delay_1;
  SurrogateSpec second = spec_template;
  second.delay = hspec.delay_2;
  const Prediction a = predict(game, history, t0, first, static_cast<double>(n) * h);
  const Prediction b = predict(game, history, t0, second, static_cast<double>(n) * h);

  const double scale = state_scale(history, i0);
  const long common = std::min(a.steps(), b.steps());
  for (long k = 0; k < common; ++k) {
    const double divergence =
        (a.phi_hat[static_cast<std::size_t>(k)] - b.phi_hat[static_cast<std::size_t>(k)]).lpNorm<Eigen::Infinity>() /
        scale;
    if (!(divergence <= hspec.theta)) return history.grid.time(i0 + k);
  }
  return history.grid.time(i0 + common);
}

double rms_state_error(std::span<const Vec> predicted, std::span<const Vec> observed, double scale) {
  const std::size_t n = std::min(predicted.size(), observed.size());
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = (predicted[k] - observed[k]).norm() / scale;
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

nlohmann::json prediction_to_json(const Prediction& p) {
  using nlohmann::json;
  const auto vec = [](const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); };
  json phi = json::array();
  json u = json::array();
  json diag = json::array();
  for (const auto& v : p.phi_hat) phi.push_back(vec(v));
  for (const auto& v : p.u_star) u.push_back(vec(v));
  for (const auto& d : p.diagnostics) {
    diag.push_back({{"iterations", d.iterations},
                    {"min_singular_value", d.min_singular_value},
                    {"max_singular_value", d.max_singular_value}});
  }
  json status = {{"kind", p.complete() ? "complete" : "truncated"}};
  if (!p.complete()) {
    status["step"] = p.truncated_step;
    status["reason"] = p.reason;
  }
  return {{"anchor", p.anchor},
          {"grid", {{"t_start", p.anchor + p.h}, {"h", p.h}, {"count", p.steps()}}},
          {"requested_steps", p.requested_steps},
          {"phi_hat", phi},
          {"u_star", u},
          {"diagnostics", diag},
          {"status", status}};
}

}  // namespace digame
