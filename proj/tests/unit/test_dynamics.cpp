#include "digame/dynamics.hpp"
#include "digame/error.hpp"
#include "digame/harness.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace digame;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<long>(xs.size()));
  long i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

History run(const std::string& name, double h, double t_end, const Params& params = {}) {
  const Scenario s = make_scenario(name, params);
  const ScenarioDefaults d = scenario_defaults(name);
  const long steps = std::lround(t_end / h);
  return simulate(s.game, s.reactions, IntendedProfile::constant(d.u_intended).schedule(),
                  TimeGrid(0.0, h, steps + 1), d.phi0);
}

}  // namespace

TEST_CASE("scenario construction") {
  const Scenario duel = make_scenario("linear-duel", {{"k", {0.5, -0.25}}});
  CHECK(duel.game.state_dim == 1);
  CHECK(duel.game.control_dim() == 2);
  CHECK(duel.reactions.max_derivative_order == 0);
  const Scenario pursuit = make_scenario("planar-pursuit");
  CHECK(pursuit.game.state_dim == 4);
  CHECK(pursuit.game.control_dim() == 4);
  CHECK(make_scenario("cross-coupled").reactions.max_derivative_order == 1);
  CHECK(scenario_names().size() == 3);

  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code_of([] { make_scenario("no-such"); }) == ErrorCode::UnknownScenario);
  CHECK(code_of([] { make_scenario("linear-duel", {{"k", {1.0}}}); }) == ErrorCode::BadParams);
  CHECK(code_of([] { make_scenario("linear-duel", {{"q", {1.0, 2.0}}}); }) == ErrorCode::BadParams);
  CHECK(code_of([] { make_scenario("linear-duel", {{"k", {NAN, 0.0}}}); }) == ErrorCode::BadParams);
}

TEST_CASE("linear-duel state equation") {
  const GameDefinition g = make_scenario("linear-duel").game;
  CHECK(eval_rhs(g, vec({1.0}), vec({0.7, -0.35}))(0) == doctest::Approx(1.05));
  CHECK(eval_rhs(g, vec({42.0}), vec({0.3, 0.3}))(0) == 0.0);
  CHECK(eval_rhs(g, vec({0.0}), vec({1.0, 0.0}))(0) == 1.0);
  CHECK_THROWS_AS(eval_rhs(g, vec({0.0}), vec({INFINITY, 0.0})), Error);
}

TEST_CASE("linear-duel reactions") {
  const Scenario s = make_scenario("linear-duel", {{"k", {0.5, -0.25}}});
  const Mat none(0, 1);
  const Vec u = apply_reactions(s.game, s.reactions, vec({0.2, -0.1}), vec({1.0}), none);
  CHECK(u(0) == doctest::Approx(0.7));
  CHECK(u(1) == doctest::Approx(-0.35));
  CHECK(apply_reactions(s.game, s.reactions, vec({0.0, 0.0}), vec({0.0}), none).isZero());
  const Scenario z = make_scenario("linear-duel", {{"k", {0.0, 0.0}}});
  const Vec uo = vec({0.3, -0.8});
  CHECK(apply_reactions(z.game, z.reactions, uo, vec({17.0}), none) == uo);
}

TEST_CASE("backward derivative estimates") {
  const double h = 0.1;
  std::vector<Vec> phi{vec({1.0})};
  CHECK(backward_derivatives(phi, 2, h).isZero());
  phi.push_back(vec({1.5}));
  Mat d = backward_derivatives(phi, 2, h);
  CHECK(d(0, 0) == doctest::Approx(5.0));
  CHECK(d(1, 0) == 0.0);
  phi.push_back(vec({2.5}));
  d = backward_derivatives(phi, 2, h);
  CHECK(d(0, 0) == doctest::Approx(10.0));
  CHECK(d(1, 0) == doctest::Approx(50.0));
  CHECK(backward_derivatives(phi, 0, h).rows() == 0);
}

TEST_CASE("simulate converges to the closed form at first order") {
  // With the control frozen at step start phi' is constant over each step,
  // so the gap to the closed form is exactly the Euler error
  // 1.4 (e^{0.75} - (1 + 0.75 h)^{1/h}) ~ 0.83 h at t = 1.
  for (double h : {0.01, 0.001}) {
    const History hist = run("linear-duel", h, 1.0);
    double worst = 0.0;
    for (long k = 0; k < hist.size(); ++k) {
      worst = std::max(worst, std::abs(hist.phi[k](0) - oracle::linear_duel_closed_form(hist.grid.time(k))));
    }
    const double euler_gap = 1.4 * (std::exp(0.75) - std::pow(1.0 + 0.75 * h, std::lround(1.0 / h)));
    CAPTURE(h);
    CHECK(worst == doctest::Approx(euler_gap).epsilon(1e-9));
    CHECK(worst < 0.9 * h);
  }
  const History hist = run("linear-duel", 0.01, 1.0);
  CHECK(hist.phi.back()(0) == doctest::Approx(2.5638).epsilon(5e-3));
  const History fine = run("linear-duel", 1e-4, 1.0);
  CHECK(std::abs(fine.phi.back()(0) - oracle::linear_duel_closed_form(1.0)) < 1e-4);
}

TEST_CASE("simulate equals the zero-order-hold recursion") {
  const History hist = run("linear-duel", 0.01, 1.0);
  const auto ref = oracle::linear_duel_zoh(1.0, 0.3, 0.75, 0.01, 100);
  for (long k = 0; k < hist.size(); ++k) CHECK(hist.phi[k](0) == doctest::Approx(ref[k]).epsilon(1e-13));
}

TEST_CASE("property: first-order convergence under step halving") {
  for (const auto& name : scenario_names()) {
    double prev_gap = 0.0;
    for (double h : {0.02, 0.01, 0.005}) {
      const double gap = (run(name, h, 1.0).phi.back() - run(name, h / 2, 1.0).phi.back()).norm();
      CAPTURE(name);
      CAPTURE(h);
      CHECK(gap > 0.0);
      CHECK(gap < 2.0 * h);
      if (prev_gap > 0.0) {
        CHECK(prev_gap / gap == doctest::Approx(2.0).epsilon(0.2));
      }
      prev_gap = gap;
    }
  }
}

TEST_CASE("realized controls carry exactly the reaction term") {
  const Params params{{"k", {0.4, -0.3}}, {"c", {0.2, -0.05}}};
  const Scenario s = make_scenario("cross-coupled", params);
  IntendedProfile prof = IntendedProfile::constant(vec({0.2, -0.1}));
  prof.amplitude = vec({0.3, 0.1});
  prof.frequency = vec({0.5, 1.0});
  prof.phase = vec({0.0, 1.0});
  const double h = 0.01;
  const History hist = simulate(s.game, s.reactions, prof.schedule(), TimeGrid(0.0, h, 201), vec({1.0}));
  for (long k = 0; k < hist.size(); ++k) {
    const double dphi = k == 0 ? 0.0 : (hist.phi[k](0) - hist.phi[k - 1](0)) / h;
    const Vec term = hist.u_realized[k] - hist.u_intended[k];
    CHECK(term(0) == doctest::Approx(0.4 * hist.phi[k](0) + 0.2 * dphi).epsilon(1e-12));
    CHECK(term(1) == doctest::Approx(-0.3 * hist.phi[k](0) - 0.05 * dphi).epsilon(1e-12));
  }
}

TEST_CASE("planar pursuit reactions pull toward the opponent") {
  const Scenario s = make_scenario("planar-pursuit");
  const Vec phi = vec({0.0, 0.0, 2.0, 1.0});
  const Vec uo = Vec::Zero(4);
  const Vec u = apply_reactions(s.game, s.reactions, uo, phi, Mat(0, 4));
  CHECK(u(0) == doctest::Approx(std::tanh(2.0)));
  CHECK(u(1) == doctest::Approx(std::tanh(1.0)));
  CHECK(u(2) == doctest::Approx(-std::tanh(2.0)));
  CHECK(u(3) == doctest::Approx(-std::tanh(1.0)));
  CHECK(eval_rhs(s.game, phi, u) == u);
}

TEST_CASE("still game stays still") {
  GameDefinition g{"still", 2, {1, 1}, [](const Vec& phi, const Vec&) { return Vec(Vec::Zero(phi.size())); }};
  ReactionSpec r;
  r.laws = {[](const Vec&, const Vec&, const Mat&) { return Vec(Vec::Zero(1)); },
            [](const Vec&, const Vec&, const Mat&) { return Vec(Vec::Zero(1)); }};
  const Vec phi0 = vec({0.3, -2.0});
  const History hist = simulate(g, r, [](double) { return Vec(Vec::Zero(2)); }, TimeGrid(0.0, 0.1, 50), phi0);
  for (const auto& p : hist.phi) CHECK(p == phi0);
}

TEST_CASE("simulate is deterministic") {
  for (const auto& name : scenario_names()) CHECK(run(name, 0.01, 1.0) == run(name, 0.01, 1.0));
}

TEST_CASE("divergence reports the step") {
  const Scenario s = make_scenario("linear-duel", {{"k", {400.0, -400.0}}});
  try {
    simulate(s.game, s.reactions, [](double) { return vec({0.2, -0.1}); }, TimeGrid(0.0, 0.1, 1000), vec({1.0}));
    FAIL("expected NonFiniteState");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteState);
    REQUIRE(e.index().has_value());
    CHECK(*e.index() > 0);
    CHECK(*e.index() < 1000);
  }
}

TEST_CASE("simulator steps incrementally like simulate") {
  const Scenario s = make_scenario("cross-coupled");
  const Vec uo = vec({0.2, -0.1});
  Simulator sim(s.game, s.reactions, 0.0, 0.01, vec({1.0}), uo);
  for (int k = 0; k < 100; ++k) sim.advance(uo);
  const History batch = simulate(s.game, s.reactions, [&](double) { return uo; }, TimeGrid(0.0, 0.01, 101), vec({1.0}));
  CHECK(sim.history() == batch);
}

TEST_CASE("history prefix, validation and scale") {
  const History hist = run("planar-pursuit", 0.01, 0.5);
  const History p = hist.prefix(10);
  CHECK(p.size() == 11);
  CHECK(p.grid.count == 11);
  CHECK(p.phi[10] == hist.phi[10]);
  CHECK_NOTHROW(hist.validate());
  History broken = hist;
  broken.u_realized.pop_back();
  CHECK_THROWS_AS(broken.validate(), Error);
  CHECK(state_scale(hist, 0) == doctest::Approx(2.0));
}
