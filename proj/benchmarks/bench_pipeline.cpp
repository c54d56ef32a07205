#include <benchmark/benchmark.h>

#include "screenleak/attacks.hpp"
#include "screenleak/chunker.hpp"
#include "screenleak/dsp.hpp"
#include "screenleak/screen_sim.hpp"

using namespace screenleak;

namespace {

// 5 s of a punctured zebra at 192 kHz, 20 dB SNR.
const SampledSignal& recording() {
  static const SampledSignal s = [] {
    ScreenProfile p;
    SimParams sp;
    sp.seed = 1;
    sp.noise_snr_db = 20.0;
    return simulate_trace(p, make_fingerprint(1), gen_zebra_frame(p, 16, ZebraKind::kSquare, true), 5.0, sp).signal;
  }();
  return s;
}

const SampledSignal& demodulated() {
  static const SampledSignal e = am_demodulate(recording(), 27500.0, 38000.0);
  return e;
}

ChunkParams params() {
  ChunkParams cp;
  cp.S = nominal_cycle_samples(ScreenProfile{}, make_fingerprint(1), 192000.0);
  return cp;
}

void BM_Chunkify(benchmark::State& state) {
  const auto cp = params();
  for (auto _ : state) benchmark::DoNotOptimize(chunkify(demodulated(), cp));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * demodulated().size()));
}
BENCHMARK(BM_Chunkify)->Unit(benchmark::kMillisecond);

void BM_BaselineChunkify(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(baseline_chunkify(demodulated(), 60.0));
}
BENCHMARK(BM_BaselineChunkify)->Unit(benchmark::kMillisecond);

void BM_Demodulate(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(am_demodulate(recording(), 27500.0, 38000.0));
}
BENCHMARK(BM_Demodulate)->Unit(benchmark::kMillisecond);

void BM_Preprocess(benchmark::State& state) {
  const auto cp = params();
  for (auto _ : state) benchmark::DoNotOptimize(preprocess(recording(), cp));
}
BENCHMARK(BM_Preprocess)->Unit(benchmark::kMillisecond);

void BM_MaxCorrShift(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::vector<double> a(demodulated().samples.begin(), demodulated().samples.begin() + static_cast<std::ptrdiff_t>(n));
  const auto b = rotate(a, 37);
  for (auto _ : state) benchmark::DoNotOptimize(max_corr_shift(a, b));
}
BENCHMARK(BM_MaxCorrShift)->Arg(800)->Arg(3200)->Unit(benchmark::kMicrosecond);

void BM_HarmonicFeatures(benchmark::State& state) {
  const std::vector<double> a(demodulated().samples.begin(), demodulated().samples.begin() + 3200);
  for (auto _ : state) benchmark::DoNotOptimize(harmonic_features(a));
}
BENCHMARK(BM_HarmonicFeatures)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
