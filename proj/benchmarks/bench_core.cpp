#include "digame/conservation.hpp"
#include "digame/harness.hpp"
#include "digame/inversion.hpp"
#include "digame/predictor.hpp"
#include "digame/selection.hpp"

#include <benchmark/benchmark.h>

using namespace digame;

namespace {

struct Fixture {
  Scenario scenario;
  History history;
};

Fixture make(const std::string& name, long count) {
  Fixture f{make_scenario(name), {}};
  const ScenarioDefaults d = scenario_defaults(name);
  IntendedProfile prof = IntendedProfile::constant(d.u_intended);
  const long n = d.u_intended.size();
  prof.amplitude = Vec::Constant(n, 0.2);
  prof.frequency = Vec::LinSpaced(n, 0.3, 0.7);
  f.history = simulate(f.scenario.game, f.scenario.reactions, prof.schedule(), TimeGrid(0.0, 0.01, count), d.phi0);
  return f;
}

const char* scenario_name(long i) {
  static const char* names[] = {"linear-duel", "cross-coupled", "planar-pursuit"};
  return names[i];
}

}  // namespace

static void BM_Simulate(benchmark::State& state) {
  const Scenario s = make_scenario(scenario_name(state.range(0)));
  const ScenarioDefaults d = scenario_defaults(scenario_name(state.range(0)));
  const auto schedule = IntendedProfile::constant(d.u_intended).schedule();
  for (auto _ : state) {
    History h = simulate(s.game, s.reactions, schedule, TimeGrid(0.0, 0.01, state.range(1)), d.phi0);
    benchmark::DoNotOptimize(h.phi.back().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Simulate)->ArgsProduct({{0, 2}, {1000, 10000}});

static void BM_EstimateFrames(benchmark::State& state) {
  const Fixture f = make(scenario_name(state.range(0)), state.range(1));
  const ProbeSet set = canonical_probe_set(f.history.control_dim(), f.history.state_dim());
  for (auto _ : state) {
    FrameSeries fs = estimate_frames(f.history, set);
    benchmark::DoNotOptimize(fs.frames.back().alpha.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_EstimateFrames)->ArgsProduct({{0, 2}, {1000, 10000}});

static void BM_InvertControls(benchmark::State& state) {
  const Fixture f = make(scenario_name(state.range(0)), 301);
  const ProbeSet set = canonical_probe_set(f.history.control_dim(), f.history.state_dim());
  const FrameSeries fs = estimate_frames(f.history, set);
  const long k = 150;
  for (auto _ : state) {
    InversionResult r = invert_controls(fs[k].alpha, fs[k].f, set, f.history.u_intended[k], f.history.phi[k],
                                        f.history.u_realized[k - 1], {});
    benchmark::DoNotOptimize(r.u.data());
  }
}
BENCHMARK(BM_InvertControls)->DenseRange(0, 2);

static void BM_Predict(benchmark::State& state) {
  const Fixture f = make(scenario_name(state.range(0)), 401);
  const SurrogateSpec spec{canonical_probe_set(f.history.control_dim(), f.history.state_dim()), 0.1, 1.0,
                           ControlPlan::hold_last(), {}};
  const double horizon = static_cast<double>(state.range(1)) * 0.01;
  for (auto _ : state) {
    Prediction p = predict(f.scenario.game, f.history, 2.0, spec, horizon);
    benchmark::DoNotOptimize(p.phi_hat.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Predict)->ArgsProduct({{0, 2}, {100, 1000}})->Unit(benchmark::kMicrosecond);

static void BM_ProjectiveSearch(benchmark::State& state) {
  const Fixture f = make("linear-duel", 301);
  const SurrogateSpec spec{canonical_probe_set(2, 1), 0.1, 1.0, ControlPlan::hold_last(), {}};
  const auto base = default_projective_base(2);
  for (auto _ : state) {
    ProjectiveSearchResult r = projective_search(f.scenario.game, f.history, base, 1.5, spec, std::nullopt,
                                                 static_cast<int>(state.range(0)), 3);
    benchmark::DoNotOptimize(r.report.best_score());
  }
}
BENCHMARK(BM_ProjectiveSearch)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
