#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <limits>

#include "screenleak/attacks.hpp"
#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"
#include "screenleak/trace_io.hpp"
#include "test_util.hpp"

using namespace screenleak;

namespace {

ClassGrouping portrait() { return build_grouping(make_phone_keyboard(ScreenProfile{}, Orientation::kPortrait)); }

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Slot log-probabilities that put all mass on the given letters ('_' for the empty class).
std::vector<std::vector<double>> certain(const std::string& letters) {
  std::vector<std::vector<double>> lp;
  for (char c : letters) {
    std::vector<double> row(27, kNegInf);
    row[c == '_' ? 26 : static_cast<std::size_t>(c - 'a')] = 0.0;
    lp.push_back(row);
  }
  return lp;
}

}  // namespace

TEST(Grouping, PortraitMergesSharedRows) {
  const auto g = portrait();
  std::vector<std::string> sorted = g.groups;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::string> expected{"b",  "c",  "m",  "n",  "p",  "v",  "x",  "z",  "aq",
                                    "sw", "de", "fr", "gt", "hy", "ju", "ki", "lo", "space"};
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(sorted, expected);
  EXPECT_EQ(g.group_of('a'), g.group_of('q'));
  EXPECT_NE(g.group_of('a'), g.group_of('s'));
}

TEST(Grouping, LandscapeKeepsEveryKey) {
  const auto g = build_grouping(make_phone_keyboard(ScreenProfile{}, Orientation::kLandscape));
  EXPECT_EQ(g.size(), 27u);
}

TEST(Grouping, DistinctRowsGiveOneGroupPerKey) {
  auto layout = make_phone_keyboard(ScreenProfile{}, Orientation::kPortrait);
  int row = 0;
  for (auto& [k, r] : layout.keys) {
    r.row_start = row;
    r.row_end = row + 20;
    row += 30;
  }
  EXPECT_EQ(build_grouping(layout).size(), 27u);
}

TEST(WordTrace, CollapsesAdjacentGroups) {
  const auto g = portrait();
  EXPECT_EQ(expected_word_trace("love", g), (std::vector<std::string>{"lo", "v", "de"}));
  EXPECT_EQ(expected_word_trace("screen", g), (std::vector<std::string>{"sw", "c", "fr", "de", "n"}));
  EXPECT_EQ(expected_word_trace("aa", g), (std::vector<std::string>{"aq"}));
  EXPECT_EQ(expected_word_trace("ab", g), (std::vector<std::string>{"aq", "b"}));
  EXPECT_EQ(expected_word_trace("aq", g), (std::vector<std::string>{"aq"}));
  EXPECT_THROW(expected_word_trace("a1", g), ParamError);
}

TEST(MatchDictionary, SoundAndOrdered) {
  const auto g = portrait();
  const std::vector<std::string> dict{"love", "lobe", "olve", "live", "lode", "loved"};
  const auto list = match_dictionary({"lo", "v", "de"}, dict, g);
  std::vector<std::string> words;
  for (const auto& [w, s] : list.candidates) words.push_back(w);
  // 'i' belongs to "ki" and "lode" has no 'v'; "loved" collapses its "de" pair
  EXPECT_EQ(words, (std::vector<std::string>{"love", "olve", "loved"}));
  for (const auto& w : words) EXPECT_EQ(expected_word_trace(w, g), (std::vector<std::string>{"lo", "v", "de"}));
  EXPECT_EQ(list.rank_of("olve"), 2u);
  EXPECT_FALSE(list.rank_of("live").has_value());
  EXPECT_TRUE(match_dictionary({}, dict, g).candidates.empty());
}

TEST(PredictionListFile, Tsv) {
  TempDir dir;
  PredictionList l;
  l.candidates = {{"love", 0.5}, {"kove", 0.25}};
  write_prediction_list(l, dir / "p.tsv");
  EXPECT_EQ(slurp(dir / "p.tsv"), "rank\tword\tscore\n1\tlove\t0.5\n2\tkove\t0.25\n");
}

TEST(RunLength, EmitsLongRunsOnce) {
  const std::vector<std::string> names{"a", "b", "c"};
  std::vector<int> labels;
  labels.insert(labels.end(), 5, 0);
  labels.insert(labels.end(), 2, 1);
  labels.insert(labels.end(), 3, -1);
  labels.insert(labels.end(), 4, 1);
  labels.insert(labels.end(), 1, 2);
  labels.insert(labels.end(), 6, 0);
  labels.insert(labels.end(), 1, 2);
  labels.insert(labels.end(), 5, 0);
  // failed windows do not break the run of 'b'; the second run of 'a' after a short blip is not repeated
  EXPECT_EQ(runlength_filter(labels, names, 5), (std::vector<std::string>{"a", "b", "a"}));
  EXPECT_EQ(runlength_filter(labels, names, 7), (std::vector<std::string>{}));
  EXPECT_EQ(runlength_filter(std::vector<int>(10, 2), names, 3), (std::vector<std::string>{"c"}));
}

TEST(RunLength, RepeatedLabelAcrossShortRunIsCollapsed) {
  const std::vector<std::string> names{"a", "b"};
  std::vector<int> labels(10, 0);
  labels.insert(labels.end(), 2, 1);
  labels.insert(labels.end(), 10, 0);
  EXPECT_EQ(runlength_filter(labels, names, 5), (std::vector<std::string>{"a"}));
}

TEST(Pool, BlockMeansDropTail) {
  EXPECT_EQ(pool(std::vector<double>{1, 3, 5, 7, 9}, 2), (std::vector<double>{2, 6}));
  EXPECT_THROW(pool(std::vector<double>{1}, 0), ParamError);
}

TEST(Aligner, UndoesAnyRotation) {
  TraceAligner a;
  a.reference = random_vector(400, 3);
  for (std::ptrdiff_t k : {0, 1, 57, 399}) EXPECT_EQ(a.align(rotate(a.reference, k)), a.reference);
  a.anchor = 10;
  EXPECT_EQ(a.align(a.reference), rotate(a.reference, -10));
}

TEST(Aligner, CalibrationRecoversCycleStart) {
  ScreenProfile p;
  const auto frame = gen_zebra_frame(p, 210, ZebraKind::kSquare);
  const auto tmpl = predicted_envelope(row_profile(frame), p, 3200, 3200);
  OutputTrace cal;
  cal.values = rotate(tmpl, 1234);
  const auto a = calibrate_aligner(cal, frame, p, 3200, 3200);
  EXPECT_EQ(a.align(rotate(tmpl, 77)), tmpl);
}

TEST(CharSegments, EqualDisjointOrdered) {
  ScreenProfile p;
  const auto segs = char_segment_map(make_char_layout(p), p, 3200);
  ASSERT_EQ(segs.size(), 6u);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EXPECT_LT(segs[i].first, segs[i].second);
    if (i > 0) EXPECT_LE(segs[i - 1].second, segs[i].first);
    EXPECT_NEAR(double(segs[i].second - segs[i].first), 150.0 / 1050.0 * 3200.0, 1.0);
  }
}

TEST(CharSegments, FullScreenSlotMinusBlanking) {
  ScreenProfile p;
  p.blanking_fraction = 0.05;
  CharLayout l;
  l.slot_count = 1;
  l.char_width_px = p.height_px;
  l.slot_row_ranges = {{0, p.height_px}};
  const auto segs = char_segment_map(l, p, 3200);
  EXPECT_EQ(segs[0], (std::pair<std::size_t, std::size_t>{0, 3040}));
  l.slot_row_ranges = {{0, p.height_px + 1}};
  EXPECT_THROW(char_segment_map(l, p, 3200), ParamError);
}

TEST(RankWords, CertainFirstSlotFavoursItsLetter) {
  std::vector<std::vector<double>> lp(1, std::vector<double>(27, std::log(0.01)));
  lp[0][0] = std::log(0.9);
  const auto list = rank_words(lp, {"bob", "ant", "cat", "axe"}, 10);
  ASSERT_EQ(list.candidates.size(), 4u);
  EXPECT_EQ(list.candidates[0].first, "ant");
  EXPECT_EQ(list.candidates[1].first, "axe");
}

TEST(RankWords, SumsSlotLogProbsWithBlankPadding) {
  auto lp = certain("ab_");
  lp[2][26] = std::log(0.5);
  lp[2][2] = std::log(0.5);
  const auto list = rank_words(lp, {"ab", "abc", "abd", "xy"}, 10);
  ASSERT_EQ(list.candidates.size(), 2u);
  EXPECT_EQ(list.candidates[0].first, "ab");
  EXPECT_EQ(list.candidates[1].first, "abc");
  EXPECT_DOUBLE_EQ(list.candidates[0].second, std::log(0.5));
  EXPECT_EQ(rank_words(lp, {"abc", "ab"}, 1).candidates.size(), 1u);
}

TEST(RankWords, RejectsWrongWidth) {
  EXPECT_THROW(rank_words({std::vector<double>(26, 0.0)}, {"a"}, 1), ParamError);
}

TEST(Harmonics, RotationInvariantAndMatchesDft) {
  const auto x = random_vector(320, 4);
  const auto h = harmonic_features(x, 10);
  const auto hr = harmonic_features(rotate(x, 111), 10);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(h[k], hr[k], 1e-12);
  std::complex<double> acc;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * std::polar(1.0, -2 * std::numbers::pi * 3.0 * double(i) / 320.0);
  EXPECT_NEAR(h[2], std::abs(acc) / 320.0, 1e-12);
  EXPECT_THROW(harmonic_features(std::vector<double>(10, 0.0), 75), ParamError);
}

TEST(Voip, BlockLogPower) {
  SampledSignal x{random_vector(44100, 5), 44100};
  const auto bf = band_features(x, 9000, 15000).values;
  const auto f = voip_features(x, 9000, 15000, 90);
  ASSERT_EQ(f.size(), (bf.size() + 89) / 90);
  double first = 0;
  for (std::size_t i = 0; i < 90; ++i) first += bf[i] * bf[i];
  EXPECT_NEAR(f[0], std::log(first), 1e-12);
}

TEST(LayoutKv, KeyboardRoundTrip) {
  const auto layout = make_phone_keyboard(ScreenProfile{}, Orientation::kPortrait);
  const auto back = keyboard_layout_from_kv(parse_key_values(format_key_values(keyboard_layout_to_kv(layout))));
  EXPECT_EQ(back.keys, layout.keys);
  EXPECT_EQ(back.orientation, layout.orientation);
  EXPECT_EQ(back.screen.height_px, layout.screen.height_px);
}

TEST(LayoutKv, CharRoundTrip) {
  const auto layout = make_char_layout(ScreenProfile{});
  const auto back = char_layout_from_kv(char_layout_to_kv(layout));
  EXPECT_EQ(back.slot_row_ranges, layout.slot_row_ranges);
  EXPECT_EQ(back.char_width_px, layout.char_width_px);
}

TEST(Snoop, WindowCountAndNameMatching) {
  ScreenProfile p;
  const auto layout = make_phone_keyboard(p, Orientation::kPortrait);
  const auto g = build_grouping(layout);
  SimParams sp;
  sp.seed = 2;
  sp.noise_snr_db = 20;
  const auto sim = simulate_trace(p, null_fingerprint(), render_keyboard_frame(layout, 'd'), 2.0, sp);

  KeyboardFeatures features;
  features.aligner.reference = random_vector(3200, 6);
  CentroidModel cm;
  cm.centroids = {random_vector(800, 7), random_vector(800, 8)};
  cm.label_names = {"v", "de"};
  SnoopParams params;
  params.runlen_min = 15;
  const auto r = snoop_stream(sim.signal, Model{cm}, g, features, params);
  EXPECT_NEAR(double(r.window_labels.size()), 60.0 * 2 - 30, 1.0);
  for (int l : r.window_labels) {
    if (l >= 0) EXPECT_TRUE(g.groups[static_cast<std::size_t>(l)] == "v" || g.groups[static_cast<std::size_t>(l)] == "de");
  }
  EXPECT_LE(r.emitted.size(), 2u);

  cm.label_names = {"v", "nope"};
  EXPECT_THROW(snoop_stream(sim.signal, Model{cm}, g, features, params), ParamError);
}
