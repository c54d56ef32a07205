#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"
#include "screenleak/screen_sim.hpp"
#include "test_util.hpp"

using namespace screenleak;

namespace {

ScreenProfile small_screen() {
  ScreenProfile p;
  p.height_px = 64;
  p.width_px = 8;
  return p;
}

SimParams quiet() {
  SimParams p;
  p.jitter_w_prob = 0.0;
  return p;
}

}  // namespace

TEST(RowProfile, SquareZebraBands) {
  const auto rows = row_profile(gen_zebra_frame(small_screen(), 16, ZebraKind::kSquare)).values;
  ASSERT_EQ(rows.size(), 64u);
  for (int r = 0; r < 64; ++r) EXPECT_EQ(rows[r], (r % 16) < 8 ? 0.0 : 1.0) << r;
}

TEST(RowProfile, SinusoidalFollowsFormula) {
  const auto rows = row_profile(gen_zebra_frame(small_screen(), 16, ZebraKind::kSinusoidal)).values;
  for (int r = 0; r < 64; ++r) {
    const double expected = 0.5 * (1 + std::sin(2 * std::numbers::pi * r / 16.0));
    EXPECT_NEAR(rows[r], expected, 0.5 / 255 + 1e-12);
  }
}

TEST(RowProfile, PuncturedMiddleThirdIsBlack) {
  ScreenProfile p;
  const auto rows = row_profile(gen_zebra_frame(p, 16, ZebraKind::kSquare, true)).values;
  for (int r = 350; r < 700; ++r) ASSERT_EQ(rows[r], 0.0);
  EXPECT_EQ(rows[349], 1.0);
}

TEST(RowProfile, MixedRowAverages) {
  FrameImage img(2, 4, 0);
  img.at(0, 0) = 255;
  img.at(0, 1) = 255;
  const auto rows = row_profile(img).values;
  EXPECT_DOUBLE_EQ(rows[0], 0.5);
  EXPECT_DOUBLE_EQ(rows[1], 0.0);
}

TEST(Zebra, RejectsBadPeriod) {
  EXPECT_THROW(gen_zebra_frame(small_screen(), 1, ZebraKind::kSquare), ParamError);
  EXPECT_THROW(gen_zebra_frame(small_screen(), 65, ZebraKind::kSquare), ParamError);
}

TEST(Fingerprint, DeterministicAndBounded) {
  EXPECT_EQ(make_fingerprint(101), make_fingerprint(101));
  EXPECT_NE(make_fingerprint(101), make_fingerprint(202));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto fp = make_fingerprint(s);
    double sum = 0;
    for (double g : fp.gain_curve) {
      EXPECT_GT(g, 0.5);
      EXPECT_LT(g, 1.6);
      sum += g;
    }
    EXPECT_NEAR(sum / ScreenFingerprint::kGainPoints, 1.0, 1e-12);
    EXPECT_LE(std::abs(fp.carrier_detune_hz), 200.0);
    EXPECT_LE(std::abs(fp.refresh_offset_hz), 0.05);
  }
}

TEST(Fingerprint, GainInterpolatesCircularly) {
  ScreenFingerprint fp;
  fp.gain_curve = {1, 2, 1, 1, 1, 1, 1, 3};
  EXPECT_DOUBLE_EQ(fp.gain(0.0), 1.0);
  EXPECT_DOUBLE_EQ(fp.gain(1.0 / 16), 1.5);
  EXPECT_DOUBLE_EQ(fp.gain(15.0 / 16), 2.0);
}

TEST(Fingerprint, NullIsFlat) {
  const auto fp = null_fingerprint();
  for (double ph : {0.0, 0.3, 0.99}) EXPECT_EQ(fp.gain(ph), 1.0);
  EXPECT_EQ(fp.carrier_detune_hz, 0.0);
}

TEST(Simulate, AllWhiteCarrierLevel) {
  ScreenProfile p;
  const auto out = simulate_trace(p, null_fingerprint(), FrameImage(p.height_px, 4, 255), 0.5, quiet());
  EXPECT_EQ(out.nominal_w, 3200u);
  const auto env = envelope(out.signal);
  for (std::size_t i = 2000; i + 2000 < env.size(); ++i) ASSERT_NEAR(env.samples[i], 0.5 * (1 - 0.6), 1e-3);
}

TEST(Simulate, CycleLengthsAreWOrWPlusOne) {
  ScreenProfile p;
  SimParams sp;
  sp.seed = 4;
  const auto out = simulate_trace(p, null_fingerprint(), FrameImage(p.height_px, 4, 128), 2.0, sp);
  std::size_t longer = 0;
  for (std::size_t i = 1; i < out.cycle_starts.size(); ++i) {
    const auto d = out.cycle_starts[i] - out.cycle_starts[i - 1];
    ASSERT_TRUE(d == out.nominal_w || d == out.nominal_w + 1) << d;
    longer += d == out.nominal_w + 1;
  }
  EXPECT_GT(longer, 0u);
  EXPECT_EQ(out.cycle_starts.front(), 0u);
  EXPECT_EQ(out.frame_schedule.size(), out.cycle_starts.size());
}

TEST(Simulate, AbnormalCyclesWithinRange) {
  ScreenProfile p;
  SimParams sp = quiet();
  sp.abnormal_prob = 0.2;
  sp.seed = 8;
  const auto out = simulate_trace(p, null_fingerprint(), FrameImage(p.height_px, 4, 128), 2.0, sp);
  std::size_t abnormal = 0;
  for (std::size_t i = 1; i < out.cycle_starts.size(); ++i) {
    const auto d = static_cast<double>(out.cycle_starts[i] - out.cycle_starts[i - 1]);
    ASSERT_GE(d, 0.9 * 3200 - 1);
    ASSERT_LE(d, 2.0 * 3200 + 1);
    abnormal += d != 3200;
  }
  EXPECT_GT(abnormal, 0u);
}

TEST(Simulate, SameSeedSameTrace) {
  ScreenProfile p;
  SimParams sp;
  sp.seed = 12;
  sp.noise_snr_db = 10.0;
  const auto frame = gen_zebra_frame(p, 100, ZebraKind::kSquare);
  const auto a = simulate_trace(p, make_fingerprint(3), frame, 0.3, sp);
  const auto b = simulate_trace(p, make_fingerprint(3), frame, 0.3, sp);
  EXPECT_EQ(a.signal.samples, b.signal.samples);
  EXPECT_EQ(a.cycle_starts, b.cycle_starts);
  sp.seed = 13;
  EXPECT_NE(simulate_trace(p, make_fingerprint(3), frame, 0.3, sp).signal.samples, a.signal.samples);
}

TEST(Simulate, ScheduleSwitchesFrames) {
  ScreenProfile p;
  const std::vector<FrameImage> frames{FrameImage(p.height_px, 4, 255), FrameImage(p.height_px, 4, 0)};
  const FrameSchedule sched{{0.0, 0}, {0.5, 1}};
  const auto out = simulate_trace(p, null_fingerprint(), frames, sched, 1.0, quiet());
  for (std::size_t c = 0; c < out.cycle_starts.size(); ++c) {
    const double t = static_cast<double>(out.cycle_starts[c]) / 192000.0;
    ASSERT_EQ(out.frame_schedule[c], t < 0.5 ? 0u : 1u);
  }
}

TEST(Simulate, RejectsBadParams) {
  SimParams sp;
  sp.am_depth = 1.5;
  EXPECT_THROW(sp.validate(), ParamError);
  ScreenProfile p;
  p.refresh_rate_hz = 0;
  EXPECT_THROW(p.validate(), ParamError);
}

TEST(Channel, ZeroDistanceIsIdentity) {
  SampledSignal x{random_vector(5000, 1), 192000};
  EXPECT_EQ(apply_channel(x, {}, ScreenProfile{}).samples, x.samples);
}

TEST(Channel, DelayAtOneMetre) {
  EXPECT_EQ(propagation_delay_samples(1.0, 192000), 560u);
  SampledSignal x{random_vector(5000, 2), 192000};
  ChannelParams ch;
  ch.distance_m = 1.0;
  const auto y = apply_channel(x, ch, ScreenProfile{});
  for (std::size_t i = 0; i < 560; ++i) ASSERT_EQ(y.samples[i], 0.0);
  for (std::size_t i = 560; i < x.size(); ++i) ASSERT_EQ(y.samples[i], x.samples[i - 560]);
}

TEST(Channel, ResamplingTo44kRemovesCarrier) {
  ScreenProfile p;
  const auto out = simulate_trace(p, null_fingerprint(), FrameImage(p.height_px, 4, 255), 1.0, quiet());
  ChannelParams ch;
  ch.target_rate_hz = 44100;
  const auto y = apply_channel(out.signal, ch, p);
  EXPECT_EQ(y.sample_rate_hz, 44100);
  EXPECT_LT(rms(y.samples), 0.01 * rms(out.signal.samples));
}

TEST(Channel, LevelFallsWithDistance) {
  SampledSignal x{random_vector(20000, 3), 192000};
  double prev = 1e9;
  for (double d : {1.0, 2.0, 4.0, 8.0}) {
    ChannelParams ch;
    ch.distance_m = d;
    const double level = rms(apply_channel(x, ch, ScreenProfile{}).samples);
    EXPECT_LT(level, prev);
    prev = level;
  }
}

TEST(Keyboard, SameColumnKeysShareRowProfile) {
  ScreenProfile p;
  const auto layout = make_phone_keyboard(p, Orientation::kPortrait);
  layout.validate();
  EXPECT_EQ(row_profile(render_keyboard_frame(layout, 'd')).values,
            row_profile(render_keyboard_frame(layout, 'e')).values);
  EXPECT_NE(row_profile(render_keyboard_frame(layout, 'd')).values,
            row_profile(render_keyboard_frame(layout, 'f')).values);
}

TEST(Keyboard, PressedKeyIsBlack) {
  ScreenProfile p;
  const auto layout = make_phone_keyboard(p, Orientation::kLandscape);
  const auto img = render_keyboard_frame(layout, 'q');
  const auto& r = layout.keys.at('q');
  EXPECT_EQ(img.at((r.row_start + r.row_end) / 2, (r.col_start + r.col_end) / 2), 0);
  EXPECT_EQ(render_keyboard_frame(layout).at((r.row_start + r.row_end) / 2, (r.col_start + r.col_end) / 2), 255);
}

TEST(Text, DifferenceConfinedToChangedSlot) {
  ScreenProfile p;
  const auto layout = make_char_layout(p);
  const auto a = row_profile(render_text_frame("A", 150, layout, p)).values;
  const auto b = row_profile(render_text_frame("B", 150, layout, p)).values;
  const auto [lo, hi] = layout.slot_row_ranges[0];
  bool differs = false;
  for (int r = 0; r < p.height_px; ++r) {
    if (r >= lo && r < hi) {
      differs |= a[r] != b[r];
    } else {
      ASSERT_EQ(a[r], b[r]) << r;
    }
  }
  EXPECT_TRUE(differs);
}

TEST(Text, EmptyStringIsWhite) {
  ScreenProfile p;
  const auto img = render_text_frame("", 150, make_char_layout(p), p);
  EXPECT_TRUE(std::all_of(img.pixels.begin(), img.pixels.end(), [](auto v) { return v == 255; }));
}

TEST(Text, GlyphsOnlyForLetters) {
  EXPECT_NO_THROW(glyph_mask('Z'));
  EXPECT_THROW(glyph_mask('a'), ParamError);
  EXPECT_THROW(glyph_mask('1'), ParamError);
}

TEST(Website, SeededLayouts) {
  ScreenProfile p;
  EXPECT_EQ(render_website_frame(p, 5), render_website_frame(p, 5));
  EXPECT_NE(render_website_frame(p, 5), render_website_frame(p, 6));
  EXPECT_NE(render_website_frame(p, 5, 1), render_website_frame(p, 5, 2));
}
