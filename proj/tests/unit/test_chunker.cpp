#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "screenleak/chunker.hpp"
#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"
#include "screenleak/screen_sim.hpp"
#include "test_util.hpp"

using namespace screenleak;

namespace {

SampledSignal zebra_envelope(std::uint64_t seed, double seconds, double rate = 192000.0, double jitter = 0.3,
                             double abnormal = 0.0, std::vector<std::size_t>* starts = nullptr) {
  ScreenProfile p;
  SimParams sp;
  sp.seed = seed;
  sp.jitter_w_prob = jitter;
  sp.abnormal_prob = abnormal;
  const auto sim = simulate_trace(p, null_fingerprint(), gen_zebra_frame(p, 16, ZebraKind::kSquare, true), seconds,
                                  sp, rate);
  if (starts != nullptr) *starts = sim.cycle_starts;
  return am_demodulate(sim.signal, 27500, 38000);
}

long distance_to_nearest(const std::vector<std::size_t>& starts, long b) {
  long best = 1L << 40;
  for (auto s : starts) best = std::min(best, std::labs(static_cast<long>(s) - b));
  return best;
}

ChunkSet manual_set(const std::vector<std::vector<double>>& chunks, const std::vector<double>& corr) {
  ChunkSet cs;
  cs.chunks = chunks;
  cs.correlations = corr;
  for (std::size_t i = 0; i < chunks.size(); ++i) cs.boundaries.push_back(i * 10);
  cs.sample_rate_hz = 1000;
  return cs;
}

}  // namespace

TEST(ChunkParams, Validation) {
  ChunkParams p;
  EXPECT_NO_THROW(p.validate());
  p.d = 0;
  EXPECT_THROW(p.validate(), ParamError);
  p = {};
  p.T = 0.99;
  EXPECT_THROW(p.validate(), ParamError);
}

TEST(Chunkify, NoiseFreeBoundariesTrackCycles) {
  std::vector<std::size_t> starts;
  const auto env = zebra_envelope(21, 1.0, 192000, 0.3, 0.0, &starts);
  ChunkParams cp;
  const auto cs = chunkify(env, cp);
  ASSERT_GT(cs.size(), 50u);
  EXPECT_EQ(cs.sync_iterations, 0u);
  EXPECT_EQ(cs.correlations[cs.master_index], 1.0);
  // boundaries keep the master's phase relative to the true cycle starts
  const auto m = static_cast<long>(cs.boundaries[cs.master_index]);
  const auto prior = *std::prev(std::upper_bound(starts.begin(), starts.end(), static_cast<std::size_t>(m)));
  const long phase = m - static_cast<long>(prior);
  for (auto b : cs.boundaries) ASSERT_LE(distance_to_nearest(starts, static_cast<long>(b) - phase), 1) << b;
  for (const auto& c : cs.chunks) ASSERT_EQ(c.size(), cs.chunk_len());
}

TEST(Chunkify, AbnormalCyclesTriggerSync) {
  ChunkParams cp;
  cp.max_sync_fraction = 0.5;
  cp.max_sync_runs = 10;
  const auto cs = chunkify(zebra_envelope(22, 2.0, 192000, 0.3, 0.03), cp);
  EXPECT_GT(cs.sync_iterations, 0u);
  EXPECT_LE(cs.sync_iterations, cs.total_iterations);
}

TEST(Chunkify, WhiteNoiseFails) {
  SampledSignal noise{random_vector(192000, 5), 192000};
  EXPECT_THROW(chunkify(envelope(noise), ChunkParams{}), Error);
}

TEST(Chunkify, TooShort) {
  SampledSignal x{std::vector<double>(5000, 0.1), 192000};
  EXPECT_THROW(chunkify(x, ChunkParams{}), ParamError);
}

TEST(OutlierReject, DropsLeastCorrelatedTenth) {
  std::vector<std::vector<double>> chunks(10, std::vector<double>{0, 1, 0});
  std::vector<double> corr{1.0, 0.9, 0.95, 0.2, 0.99, 0.97, 0.96, 0.93, 0.92, 0.91};
  const auto out = outlier_reject(manual_set(chunks, corr));
  EXPECT_EQ(out.size(), 9u);
  EXPECT_EQ(std::count(out.correlations.begin(), out.correlations.end(), 0.2), 0);
}

TEST(OutlierReject, DropsPeakOutliersButKeepsMaster) {
  std::vector<std::vector<double>> chunks(10, std::vector<double>{0, 1, 0});
  chunks[5] = {0, 9, 0};
  chunks[0] = {0, 8, 0};
  std::vector<double> corr(10, 0.9);
  corr[0] = 1.0;
  corr[1] = 0.1;
  auto set = manual_set(chunks, corr);
  const auto out = outlier_reject(set);
  EXPECT_EQ(out.size(), 8u);  // one by correlation, chunk 5 by peak
  EXPECT_EQ(out.master_index, 0u);
  EXPECT_EQ(out.chunks[0], chunks[0]);
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_EQ(out.chunks[i], chunks[2]);
}

TEST(OutlierReject, DegenerateSet) {
  std::vector<std::vector<double>> chunks{{0, 1}, {0, 1}};
  EXPECT_THROW(outlier_reject(manual_set(chunks, {1.0, 0.5})), DegenerateSetError);
}

TEST(AverageChunks, MirroredPairAndRotation) {
  const auto out = average_chunks(manual_set({{1, 2, 3, 9}, {3, 2, 1, 1}}, {1, 1}));
  EXPECT_EQ(out.values, (std::vector<double>{5, 2, 2, 2}));
  EXPECT_EQ(out.rotation, 3u);
  EXPECT_EQ(out.source_count, 2u);
  EXPECT_EQ(out.values[0], *std::max_element(out.values.begin(), out.values.end()));
}

TEST(Baseline, PeriodicSignalKeepsAllChunks) {
  SampledSignal x{std::vector<double>(1000), 1000};
  for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] = std::sin(2 * 3.14159265358979 * double(i % 100) / 100.0);
  const auto cs = baseline_chunkify(x, 10.0);
  EXPECT_EQ(cs.size(), 10u);
  for (double c : cs.correlations) EXPECT_NEAR(c, 1.0, 1e-9);
}

TEST(ChunkByBoundaries, TruncatesToShortestGap) {
  SampledSignal x{std::vector<double>(100), 1000};
  for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] = double(i);
  const std::vector<std::size_t> starts{0, 30, 55, 90};
  const auto cs = chunk_by_boundaries(x, starts);
  EXPECT_EQ(cs.size(), 3u);
  EXPECT_EQ(cs.chunk_len(), 25u);
  EXPECT_EQ(cs.chunks[1].front(), 30.0);
}

TEST(ChunkingScore, Formula) {
  ChunkSet cs = manual_set({{0, 1}, {0, 1}, {0, 1}}, {1.0, 0.8, 0.6});
  cs.sync_iterations = 1;
  cs.total_iterations = 4;
  EXPECT_NEAR(chunking_score(cs, 0.9), (0.8 + 0.6 - 0.9) / 4.0, 1e-12);
}

TEST(FindS, RecoversJitteredCycle) {
  std::vector<SampledSignal> envs{zebra_envelope(31, 1.5, 192360), zebra_envelope(32, 1.5, 192360)};
  EXPECT_EQ(find_s(envs, {3200, 3212}, 1, 0.9), 3206u);
}

TEST(FindS, RecoversJitterFreeCycle) {
  std::vector<SampledSignal> envs{zebra_envelope(33, 1.5, 192240, 0.0)};
  EXPECT_EQ(find_s(envs, {3198, 3210}, 1, 0.9), 3204u);
}

TEST(FindS, NoiseGivesEstimationError) {
  std::vector<SampledSignal> envs{envelope({random_vector(192000, 6), 192000})};
  EXPECT_THROW(find_s(envs, {3198, 3202}, 1, 0.9), EstimationError);
}

TEST(Preprocess, RejectsLowRate) {
  SampledSignal x{random_vector(44100, 7), 44100};
  EXPECT_THROW(preprocess(x, ChunkParams{}), ParamError);
}

TEST(Preprocess, TraceStartsAtPeak) {
  ScreenProfile p;
  SimParams sp;
  sp.seed = 3;
  sp.noise_snr_db = 20;
  const auto sim = simulate_trace(p, null_fingerprint(), gen_zebra_frame(p, 100, ZebraKind::kSquare), 1.0, sp);
  const auto t = preprocess(sim.signal, ChunkParams{});
  EXPECT_EQ(t.values.size(), 3200u);
  EXPECT_EQ(t.values[0], *std::max_element(t.values.begin(), t.values.end()));
  EXPECT_GT(t.source_count, 40u);
}

TEST(OutputTraceFile, RoundTrip) {
  TempDir dir;
  OutputTrace t;
  t.values = {0.5, 0.25, -1.0 / 3.0, 1e-17};
  t.source_count = 12;
  t.sample_rate_hz = 192000;
  t.rotation = 7;
  write_output_trace(t, dir / "t.csv");
  const auto r = read_output_trace(dir / "t.csv");
  EXPECT_EQ(r.values, t.values);
  EXPECT_EQ(r.source_count, 12u);
  EXPECT_EQ(r.rotation, 0u);  // not part of the file format
  EXPECT_EQ(r.sample_rate_hz, 192000);
}

TEST(OutputTraceFile, Malformed) {
  TempDir dir;
  std::ofstream(dir / "bad.csv") << "nonsense\n";
  EXPECT_THROW(read_output_trace(dir / "bad.csv"), FormatError);
  EXPECT_THROW(read_output_trace(dir / "missing.csv"), IoError);
}
