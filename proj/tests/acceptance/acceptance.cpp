// Closed-loop acceptance checks. Prints one PASS/FAIL line per criterion; exit code 1 if any fails.
//
//   acceptance            run every criterion
//   acceptance 3 7        run only criteria 3 and 7

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "screenleak/attacks.hpp"
#include "screenleak/chunker.hpp"
#include "screenleak/classify.hpp"
#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"
#include "screenleak/experiments.hpp"
#include "screenleak/screen_sim.hpp"
#include "screenleak/trace_io.hpp"

#ifndef SCREENLEAK_DATA_DIR
#define SCREENLEAK_DATA_DIR "data"
#endif

using namespace screenleak;

namespace {

// ---- pinned tolerances ----
constexpr double kPeakToleranceBins = 1.0;
constexpr std::size_t kStftWindow = 2048;
constexpr double kPeakFloorHz = 600.0;
constexpr double kBoundaryHitRate = 0.95;
constexpr long kBoundaryTolerance = 2;
constexpr double kAveragingPearson = 0.95;
constexpr double kMiddleThirdRatio = 0.25;
constexpr int kFindSSpan = 4;
constexpr double kFindSMaxAudioS = 60.0;
constexpr double kKeyboardValidation = 0.95;
constexpr std::size_t kWordsHit3s = 90;
constexpr std::size_t kWordsHit1s = 85;
constexpr double kSlotAccuracy = 0.85;
constexpr std::size_t kTop1 = 50;
constexpr std::size_t kTop5 = 70;
constexpr double kWebsiteAccuracy = 0.90;
constexpr double kVoipAccuracy = 0.90;
constexpr double kConfidenceThreshold = 0.96;
constexpr double kConfidentErrorRate = 0.01;
constexpr double kCrossScreenMargin = 0.05;
constexpr double kChunkifyBudgetS = 10.0;
constexpr double kPreprocessBudgetS = 30.0;
constexpr double kDelayFraction = 0.175;
constexpr double kDelayTolerance = 0.02;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<std::string> data_words(const char* name) {
  return read_wordlist(std::filesystem::path(SCREENLEAK_DATA_DIR) / name);
}

// 1. zebra frequency law
Outcome zebra_law() {
  const auto t0 = std::chrono::steady_clock::now();
  ScreenProfile profile;
  bool ok = true;
  std::string detail;
  for (int p : {8, 16, 21, 24, 32, 40}) {
    SimParams sp;
    sp.seed = 100 + static_cast<std::uint64_t>(p);
    sp.noise_snr_db = 20.0;
    const auto sim = simulate_trace(profile, null_fingerprint(),
                                    gen_zebra_frame(profile, p, ZebraKind::kSquare), 1.0, sp);
    // wide enough for the sidebands of the finest zebra (7875 Hz)
    const auto env = am_demodulate(sim.signal, profile.carrier_hz - 10000.0, profile.carrier_hz + 10000.0);
    const auto spec = stft(env, kStftWindow, kStftWindow / 2);
    const auto mag = spec.mean_spectrum();
    std::size_t best = 0;
    for (std::size_t k = 0; k < mag.size(); ++k) {
      if (spec.bin_hz(k) >= kPeakFloorHz && (best == 0 || mag[k] > mag[best])) best = k;
    }
    const double expected = profile.height_px / static_cast<double>(p) * profile.refresh_rate_hz;
    const double off = std::abs(static_cast<double>(best) - expected / spec.bin_hz(1));
    ok = ok && off <= kPeakToleranceBins;
    detail += fmt("p%d %.1fHz(exp %.1f) ", p, spec.bin_hz(best), expected);
  }
  const double t = seconds_since(t0);
  return {ok && t < 60.0, detail + fmt("%.1fs", t)};
}

// 2. chunking accuracy and baseline comparison
Outcome chunking_accuracy() {
  const auto t0 = std::chrono::steady_clock::now();
  ScreenProfile profile;
  const auto frame = gen_zebra_frame(profile, 16, ZebraKind::kSquare, true);
  std::size_t hits = 0;
  std::size_t total = 0;
  std::size_t abnormal_traces = 0;
  std::size_t baseline_lower = 0;
  std::size_t failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SimParams sp;
    sp.seed = 1000 + seed;
    sp.noise_snr_db = 20.0;
    sp.abnormal_prob = 0.02;
    const auto sim = simulate_trace(profile, null_fingerprint(), frame, 2.0, sp);
    const auto env = am_demodulate(sim.signal, 27500.0, 38000.0);
    ChunkParams cp;
    cp.S = sim.nominal_w;
    ChunkSet cs;
    try {
      cs = chunkify(env, cp);
    } catch (const Error&) {
      ++failures;
      continue;
    }
    const auto& starts = sim.cycle_starts;
    auto preceding = [&](std::size_t b) {
      auto it = std::upper_bound(starts.begin(), starts.end(), b);
      return it == starts.begin() ? 0 : *(it - 1);
    };
    auto nearest = [&](long b) {
      long best = 1L << 40;
      auto it = std::lower_bound(starts.begin(), starts.end(), static_cast<std::size_t>(std::max(0L, b)));
      if (it != starts.end()) best = std::min(best, std::labs(static_cast<long>(*it) - b));
      if (it != starts.begin()) best = std::min(best, std::labs(static_cast<long>(*(it - 1)) - b));
      return best;
    };
    // the master starts at an arbitrary phase; use the phase most boundaries agree on
    std::vector<long> phase;
    for (auto b : cs.boundaries) phase.push_back(static_cast<long>(b - preceding(b)));
    std::size_t agree = 0;
    for (long o : phase) {
      std::size_t n = 0;
      for (auto b : cs.boundaries) n += nearest(static_cast<long>(b) - o) <= kBoundaryTolerance;
      agree = std::max(agree, n);
    }
    hits += agree;
    total += cs.boundaries.size();

    bool abnormal = false;
    for (std::size_t i = 1; i < starts.size(); ++i) {
      const auto gap = starts[i] - starts[i - 1];
      abnormal = abnormal || (gap != sim.nominal_w && gap != sim.nominal_w + 1);
    }
    if (abnormal) {
      ++abnormal_traces;
      const double ours = mean_chunk_correlation(cs);
      const double base = mean_chunk_correlation(baseline_chunkify(env, profile.refresh_rate_hz));
      baseline_lower += base < ours;
    }
  }
  const double rate = total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
  const double t = seconds_since(t0);
  const bool ok = failures == 0 && rate >= kBoundaryHitRate && abnormal_traces > 0 &&
                  baseline_lower == abnormal_traces && t < 300.0;
  return {ok, fmt("boundaries within +-%ld: %.4f (%zu/%zu), baseline lower on %zu/%zu abnormal traces, "
                  "%zu failed runs, %.1fs",
                  kBoundaryTolerance, rate, hits, total, baseline_lower, abnormal_traces, failures, t)};
}

// 3. averaging quality
Outcome averaging_quality() {
  ScreenProfile profile;
  const auto frame = gen_zebra_frame(profile, 21, ZebraKind::kSinusoidal, true);
  ChunkParams cp;
  cp.S = nominal_cycle_samples(profile, null_fingerprint(), 192000.0);

  SimParams clean;
  clean.jitter_w_prob = 0.0;
  clean.seed = 3;
  const auto ref_sim = simulate_trace(profile, null_fingerprint(), frame, 2.0, clean);
  const auto ref_env = am_demodulate(ref_sim.signal, 27500.0, 38000.0);
  // reference starts at the cycle start, so rows map linearly onto samples
  const auto ref_chunks = chunk_by_boundaries(ref_env, ref_sim.cycle_starts);
  std::vector<double> reference(ref_chunks.chunk_len(), 0.0);
  for (const auto& c : ref_chunks.chunks) {
    for (std::size_t i = 0; i < reference.size(); ++i) reference[i] += c[i] / static_cast<double>(ref_chunks.size());
  }

  SimParams noisy;
  noisy.seed = 4;
  noisy.noise_snr_db = 20.0;
  const auto sim = simulate_trace(profile, null_fingerprint(), frame, 2.0, noisy);
  const auto trace = preprocess(sim.signal, cp);
  const auto match = max_corr_shift(trace.values, reference);
  const auto aligned = rotate(trace.values, static_cast<std::ptrdiff_t>(match.shift));

  const std::size_t n = std::min(aligned.size(), reference.size());
  auto spread = [&](std::size_t a, std::size_t b) {
    std::vector<double> seg(aligned.begin() + static_cast<std::ptrdiff_t>(a),
                            aligned.begin() + static_cast<std::ptrdiff_t>(b));
    const double m = mean(seg);
    for (auto& v : seg) v -= m;
    return rms(seg);
  };
  const double outer = 0.5 * (spread(0, n / 3) + spread(2 * n / 3, n));
  const double middle = spread(n / 3, 2 * n / 3);
  const double ratio = middle / outer;
  const bool ok = match.corr >= kAveragingPearson && ratio <= kMiddleThirdRatio;
  return {ok, fmt("pearson %.4f over %zu chunks, middle/outer rms %.4f", match.corr, trace.source_count, ratio)};
}

// 4. find_s
Outcome find_s_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  ScreenProfile profile;
  const auto frame = gen_zebra_frame(profile, 16, ZebraKind::kSquare, true);
  constexpr int kSignals = 3;
  constexpr double kSeconds = 3.0;
  static_assert(kSignals * kSeconds <= kFindSMaxAudioS);
  std::size_t correct = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto fp = make_fingerprint(500 + seed);
    const std::size_t w = nominal_cycle_samples(profile, fp, 192000.0);
    std::vector<SampledSignal> envs;
    for (int k = 0; k < kSignals; ++k) {
      SimParams sp;
      sp.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
      sp.noise_snr_db = 20.0;
      envs.push_back(am_demodulate(simulate_trace(profile, fp, frame, kSeconds, sp).signal, 27500.0, 38000.0));
    }
    std::size_t s = 0;
    try {
      s = find_s(envs, {w - kFindSSpan, w + kFindSSpan}, 1, 0.9);
    } catch (const Error&) {
    }
    correct += s == w;
    detail += fmt("%zu/%zu ", s, w);
  }
  return {correct == 10, fmt("%zu/10 exact, %.0fs audio per run, %s%.1fs", correct, kSignals * kSeconds,
                             detail.c_str(), seconds_since(t0))};
}

// 5. rotational-correlation matching across screens and channels
Outcome rotational_matching() {
  ScreenProfile profile;
  std::vector<FrameImage> patterns;
  for (int p : {8, 16, 24, 32, 40}) patterns.push_back(gen_zebra_frame(profile, p, ZebraKind::kSquare));
  patterns.push_back(gen_zebra_frame(profile, 16, ZebraKind::kSquare, true));

  auto close = make_rig(profile, make_fingerprint(101), 20.0);
  auto far = make_rig(profile, make_fingerprint(202), 20.0);
  ChannelParams ch;
  ch.distance_m = 2.0;
  ch.noise_floor_db = -40.0;
  far.channel = ch;
  far.chunk.T = 0.5;
  const std::size_t len = std::min(nominal_cycle_samples(profile, close.fingerprint, 192000.0),
                                   nominal_cycle_samples(profile, far.fingerprint, 192000.0)) -
                          4;

  auto traces = [&](const Rig& rig, std::uint64_t seed) {
    LabeledDataset ds;
    for (std::size_t c = 0; c < patterns.size(); ++c) ds.label_names.push_back("pattern" + std::to_string(c));
    for (std::size_t c = 0; c < patterns.size(); ++c) {
      for (std::uint64_t i = 0; i < 10; ++i) {
        auto v = capture(rig, row_profile(patterns[c]), 1.0, derive_seed(seed, c, i)).values;
        v.resize(len);
        ds.add(std::move(v), static_cast<int>(c));
      }
    }
    return ds;
  };
  const auto a = traces(close, 51);
  const auto b = traces(far, 52);

  // one reference trace per pattern from one screen, every trace of the other screen matched against them
  auto references = [&](const LabeledDataset& ds) {
    LabeledDataset ref;
    ref.label_names = ds.label_names;
    for (std::size_t c = 0; c < patterns.size(); ++c) ref.add(ds.items[c * 10].features, static_cast<int>(c));
    return ref;
  };
  const Model from_a = train_centroid(references(a));
  const Model from_b = train_centroid(references(b));
  const auto ab = evaluate(from_a, b);
  const auto ba = evaluate(from_b, a);
  auto correct = [](const EvalReport& r) {
    std::size_t n = 0;
    for (std::size_t k = 0; k < r.confusion.size(); ++k) n += r.confusion[k][k];
    return n;
  };
  const bool ok = correct(ab) == 60 && correct(ba) == 60;
  return {ok, fmt("close->far %zu/60, far->close %zu/60", correct(ab), correct(ba))};
}

// 6. keyboard snooping
Outcome keyboard_snooping() {
  const auto t0 = std::chrono::steady_clock::now();
  auto rig = make_rig(ScreenProfile{}, null_fingerprint(), 20.0);
  rig.chunk.T = 0.6;
  const auto setup = make_keyboard_setup(rig, Orientation::kPortrait, 61);
  const auto ds = keyboard_dataset(rig, setup, 20, 0.5, 62);
  const auto [train, test] = split_dataset(ds, 0.3, 63);
  const double validation = evaluate(train_softmax(train), test).accuracy;
  const Model model = train_softmax(ds);

  const auto dictionary = data_words("dictionary.txt");
  const auto words = pick_words(data_words("common_words.txt"), 25, 64);
  auto hits = [&](double dwell, std::size_t runlen) {
    std::size_t n = 0;
    for (const auto& t : keyboard_word_trials(rig, setup, model, words, dictionary, dwell, runlen, 65)) n += t.hit;
    return n;
  };
  const std::size_t h3 = hits(3.0, 35);
  const std::size_t h1 = hits(1.0, 15);
  const double t = seconds_since(t0);
  const bool ok = setup.grouping.size() == 18 && validation >= kKeyboardValidation && h3 >= kWordsHit3s &&
                  h1 >= kWordsHit1s && t < 900.0;
  return {ok, fmt("%zu classes, validation %.4f, words hit %zu/%zu at 3 s/key, %zu/%zu at 1 s/key, %.0fs",
                  setup.grouping.size(), validation, h3, words.size(), h1, words.size(), t)};
}

// 7. text extraction
Outcome text_extraction() {
  auto rig = make_rig(ScreenProfile{}, null_fingerprint(), 20.0);
  rig.chunk.T = 0.6;
  const auto setup = make_text_setup(rig, 71);
  const auto sets = text_datasets(rig, setup, 1500, 1.0, 72);
  std::vector<Model> models;
  std::vector<double> validation;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const auto [train, test] = split_dataset(sets[k], 0.1, derive_seed(73, k));
    validation.push_back(evaluate(train_softmax(train), test).accuracy);
    models.push_back(train_softmax(sets[k]));
  }
  const auto blind = text_slot_accuracy(rig, setup, models, 100, 1.0, 74);
  const auto words = pick_words(data_words("common_words.txt"), 25, 75);
  const auto s = text_word_trials(rig, setup, models, words, data_words("dictionary.txt"), 1.0, 76);

  std::string val;
  std::string bl;
  for (double v : validation) val += fmt("%.3f ", v);
  for (double v : blind) bl += fmt("%.3f ", v);
  const double worst = *std::min_element(validation.begin(), validation.end());
  const bool ok = worst >= kSlotAccuracy && s.top1 >= kTop1 && s.top5 >= kTop5;
  return {ok, fmt("per-slot validation [%s] blind [%s] top1 %zu/%zu top5 %zu/%zu", val.c_str(), bl.c_str(), s.top1,
                  s.words, s.top5, s.words)};
}

// 8. website and VoIP distinguishing
Outcome distinguishing() {
  const auto rig = make_rig(ScreenProfile{}, null_fingerprint(), 20.0);
  const auto sites = website_dataset(rig, 25, 30, 1.0, 81);
  const auto [wtr, wte] = split_dataset(sites, 0.3, 82);
  const auto web = evaluate(train_softmax(wtr), wte, kConfidenceThreshold);

  const auto calls = voip_dataset(rig, 20, 6.0, 83);
  const auto [vtr, vte] = split_dataset(calls, 0.3, 84);
  const auto voip = evaluate(train_softmax(vtr), vte, kConfidenceThreshold);

  auto error_rate = [](const EvalReport& r) {
    return r.thresholded->confident ? static_cast<double>(r.thresholded->confident_errors) /
                                          static_cast<double>(r.thresholded->confident)
                                    : 0.0;
  };
  const bool ok = web.accuracy >= kWebsiteAccuracy && voip.accuracy >= kVoipAccuracy &&
                  error_rate(web) <= kConfidentErrorRate;
  return {ok, fmt("websites %.4f (confident %zu, errors %zu), voip %.4f (confident %zu, errors %zu)", web.accuracy,
                  web.thresholded->confident, web.thresholded->confident_errors, voip.accuracy,
                  voip.thresholded->confident, voip.thresholded->confident_errors)};
}

// 9. cross-screen ordering
Outcome cross_screen_ordering() {
  double self = 0.0;
  double minus = 0.0;
  double single = 0.0;
  constexpr int kSeeds = 5;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    const auto r = cross_screen(CrossScreenParams{}, seed);
    self += r.self_mean / kSeeds;
    minus += r.all_minus_victim_mean / kSeeds;
    single += r.single_foreign_mean / kSeeds;
  }
  const bool ok = self >= minus && minus >= single && minus - single >= kCrossScreenMargin;
  return {ok, fmt("self %.4f >= all-minus-victim %.4f >= single-foreign %.4f (margin %.4f)", self, minus, single,
                  minus - single)};
}

// 10. performance
Outcome performance() {
  ScreenProfile profile;
  SimParams sp;
  sp.seed = 10;
  sp.noise_snr_db = 20.0;
  const auto sim = simulate_trace(profile, null_fingerprint(), gen_zebra_frame(profile, 16, ZebraKind::kSquare, true),
                                  5.0, sp);
  ChunkParams cp;
  cp.S = sim.nominal_w;
  const auto env = am_demodulate(sim.signal, 27500.0, 38000.0);
  auto t0 = std::chrono::steady_clock::now();
  const auto cs = chunkify(env, cp);
  const double chunk_s = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const auto trace = preprocess(sim.signal, cp);
  const double pre_s = seconds_since(t0);
  return {chunk_s < kChunkifyBudgetS && pre_s < kPreprocessBudgetS && cs.size() > 0 && !trace.values.empty(),
          fmt("chunkify %.3fs, preprocess %.3fs on 5 s at 192 kHz", chunk_s, pre_s)};
}

// 11. propagation delay
Outcome propagation_delay() {
  ScreenProfile profile;
  const auto rig = make_rig(profile, null_fingerprint(), 20.0);
  const auto shift = delay_shift(rig, gen_zebra_frame(profile, 16, ZebraKind::kSquare, true), 1.0, 2.0, 111);
  const double fraction = static_cast<double>(shift) / cycle_samples(rig);
  return {std::abs(fraction - kDelayFraction) <= kDelayTolerance,
          fmt("shift %zu samples = %.4f of the cycle", shift, fraction)};
}

}  // namespace

int main(int argc, char** argv) {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"zebra frequency law", zebra_law}},
      {2, {"chunking accuracy", chunking_accuracy}},
      {3, {"averaging quality", averaging_quality}},
      {4, {"find_s recovery", find_s_recovery}},
      {5, {"rotational-correlation matching", rotational_matching}},
      {6, {"keyboard snooping", keyboard_snooping}},
      {7, {"text extraction", text_extraction}},
      {8, {"distinguishing", distinguishing}},
      {9, {"cross-screen ordering", cross_screen_ordering}},
      {10, {"performance", performance}},
      {11, {"propagation delay", propagation_delay}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (!criteria.count(k)) {
      std::fprintf(stderr, "unknown criterion %s\n", argv[i]);
      return 2;
    }
    selected.insert(k);
  }
  if (selected.empty()) {
    for (const auto& [k, _] : criteria) selected.insert(k);
  }

  int failed = 0;
  for (int k : selected) {
    const auto& [name, run] = criteria.at(k);
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %2d %s: %s | %s\n", k, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
