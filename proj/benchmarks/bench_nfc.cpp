#include <benchmark/benchmark.h>

#include <numbers>

#include "nfc/calibration.hpp"
#include "nfc/dipole_emission.hpp"
#include "nfc/fiber_modes.hpp"
#include "nfc/photon_synth.hpp"
#include "nfc/trace_analysis.hpp"

using namespace nfc;

namespace {

constexpr double kLambda = 780e-9;

FiberGeometry fiber_x(double x) {
  FiberGeometry g;
  g.radius = x * kLambda / (2.0 * std::numbers::pi);
  return g;
}

EmitterModel blinking() {
  EmitterModel m;
  m.excitation_rate = 1.0 / (1.0 / 1.374e6 - 20e-9);
  m.decay_lifetime = 20e-9;
  m.on_rate = 0.1;
  m.off_rate = 0.1;
  m.detection_efficiency = {0.65, 0.65};
  m.background_rate = {1000.0, 800.0};
  return m;
}

void BM_FundamentalMode(benchmark::State& state) {
  const auto g = fiber_x(1.43);
  for (auto _ : state) benchmark::DoNotOptimize(solve_fundamental_mode(g, kLambda));
}
BENCHMARK(BM_FundamentalMode);

// Multimode fiber, V ~ 12.
void BM_AllGuidedModes(benchmark::State& state) {
  const auto g = fiber_x(11.5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_guided_modes(g, kLambda));
}
BENCHMARK(BM_AllGuidedModes)->Unit(benchmark::kMillisecond);

void BM_RadiationRate(benchmark::State& state) {
  const auto g = fiber_x(static_cast<double>(state.range(0)) / 100.0);
  DipoleEmitter d;
  for (auto _ : state) benchmark::DoNotOptimize(radiation_rate(g, kLambda, d));
}
BENCHMARK(BM_RadiationRate)->Arg(50)->Arg(143)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_EfficiencyPoint(benchmark::State& state) {
  const auto g = fiber_x(1.43);
  DipoleEmitter d;
  for (auto _ : state) benchmark::DoNotOptimize(channeling_efficiency(g, kLambda, d));
}
BENCHMARK(BM_EfficiencyPoint)->Unit(benchmark::kMillisecond);

void BM_MeanEnhancement(benchmark::State& state) {
  const auto g = fiber_x(1.43);
  EnhancementOptions o;
  o.n_phi0 = 8;
  o.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(mean_enhancement(g, kLambda, 0.6, o));
}
BENCHMARK(BM_MeanEnhancement)->Unit(benchmark::kMillisecond);

void BM_PhiloxUniform(benchmark::State& state) {
  Philox4x32 g(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(g.uniform());
}
BENCHMARK(BM_PhiloxUniform);

void BM_PhiloxPoisson(benchmark::State& state) {
  Philox4x32 g(1, 0);
  const double mean = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(g.poisson(mean));
}
BENCHMARK(BM_PhiloxPoisson)->Arg(4)->Arg(4430);

void BM_SimulateDualChannel(benchmark::State& state) {
  const auto cal = make_calibration({0.496, 0.021}, {0.235, 0.013}, {0.148, 0.003});
  const auto m = blinking();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_dual_channel(0.2, cal, m, 300.0, 0.1, {++seed}));
}
BENCHMARK(BM_SimulateDualChannel)->Unit(benchmark::kMicrosecond);

void BM_AnalyzeTraces(benchmark::State& state) {
  const auto cal = make_calibration({0.496, 0.021}, {0.235, 0.013}, {0.148, 0.003});
  const auto t = simulate_dual_channel(0.2, cal, blinking(), 300.0, 0.1, {1});
  for (auto _ : state) benchmark::DoNotOptimize(analyze_traces(t.guided, t.radiation, cal.C));
}
BENCHMARK(BM_AnalyzeTraces)->Unit(benchmark::kMicrosecond);

void BM_G2Histogram(benchmark::State& state) {
  EmitterModel m;
  m.background_rate = {1e5, 0.0};
  const auto a = simulate_emitter_stream(m, 1.0, {1});
  const auto b = simulate_emitter_stream(m, 1.0, {2});
  for (auto _ : state) benchmark::DoNotOptimize(g2_histogram(a, b, 10e-6, 1e-6));
}
BENCHMARK(BM_G2Histogram)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
