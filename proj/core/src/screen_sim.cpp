#include "screenleak/screen_sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"

namespace screenleak {

void fill_rect(FrameImage& img, int row0, int row1, int col0, int col1, std::uint8_t value) {
  row0 = std::max(row0, 0);
  col0 = std::max(col0, 0);
  row1 = std::min(row1, img.height_px);
  col1 = std::min(col1, img.width_px);
  for (int r = row0; r < row1; ++r) {
    auto* row = &img.at(r, 0);
    std::fill(row + col0, row + std::max(col0, col1), value);
  }
}

void ScreenProfile::validate() const {
  if (width_px < 1 || height_px < 2) throw ParamError("screen must be at least 1x2 pixels");
  if (!(refresh_rate_hz > 0.0)) throw ParamError("refresh rate must be positive");
  if (!(carrier_hz > 0.0)) throw ParamError("carrier frequency must be positive");
  if (!(blanking_fraction >= 0.0 && blanking_fraction < 0.2)) throw ParamError("blanking_fraction must lie in [0, 0.2)");
}

double ScreenFingerprint::gain(double phase) const {
  double p = phase - std::floor(phase);
  p *= kGainPoints;
  const auto k = static_cast<int>(p) % kGainPoints;
  const double f = p - std::floor(p);
  return (1.0 - f) * gain_curve[static_cast<std::size_t>(k)] +
         f * gain_curve[static_cast<std::size_t>((k + 1) % kGainPoints)];
}

ScreenFingerprint make_fingerprint(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gain(0.8, 1.25);
  ScreenFingerprint fp;
  fp.seed = seed;
  double sum = 0.0;
  for (double& g : fp.gain_curve) {
    g = gain(rng);
    sum += g;
  }
  const double m = sum / ScreenFingerprint::kGainPoints;
  for (double& g : fp.gain_curve) g /= m;
  fp.carrier_detune_hz = std::uniform_real_distribution<double>(-200.0, 200.0)(rng);
  fp.refresh_offset_hz = std::uniform_real_distribution<double>(-0.05, 0.05)(rng);
  return fp;
}

ScreenFingerprint null_fingerprint() { return ScreenFingerprint{}; }

void SimParams::validate() const {
  if (baseband_gain < 0.0) throw ParamError("baseband_gain must be >= 0");
  if (!(am_depth >= 0.0 && am_depth <= 1.0)) throw ParamError("am_depth must lie in [0, 1]");
  if (carrier_amp < 0.0) throw ParamError("carrier_amp must be >= 0");
  if (!(jitter_w_prob >= 0.0 && jitter_w_prob <= 1.0)) throw ParamError("jitter_w_prob must lie in [0, 1]");
  if (!(abnormal_prob >= 0.0 && abnormal_prob <= 1.0)) throw ParamError("abnormal_prob must lie in [0, 1]");
  const auto [lo, hi] = abnormal_range;
  if (!(lo >= 0.5 && hi <= 2.5 && lo < hi)) throw ParamError("abnormal_range must satisfy 0.5 <= min < max <= 2.5");
}

RowIntensityProfile row_profile(const FrameImage& frame) {
  if (!frame.valid()) throw ParamError("row_profile: empty or inconsistent frame");
  RowIntensityProfile out;
  out.values.resize(static_cast<std::size_t>(frame.height_px));
  for (int r = 0; r < frame.height_px; ++r) {
    const auto* row = frame.pixels.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(frame.width_px);
    long sum = 0;
    for (int c = 0; c < frame.width_px; ++c) sum += row[c];
    out.values[static_cast<std::size_t>(r)] = static_cast<double>(sum) / (255.0 * frame.width_px);
  }
  return out;
}

FrameImage gen_zebra_frame(const ScreenProfile& profile, int period_px, ZebraKind kind, bool punctured) {
  profile.validate();
  if (period_px < 2 || period_px > profile.height_px) {
    throw ParamError("zebra period must lie in [2, height]");
  }
  FrameImage img(profile.height_px, profile.width_px, 255);
  for (int r = 0; r < profile.height_px; ++r) {
    std::uint8_t v = 0;
    if (kind == ZebraKind::kSquare) {
      v = (r % period_px) < period_px / 2 ? 0 : 255;
    } else {
      const double s = std::sin(2.0 * std::numbers::pi * r / period_px);
      v = static_cast<std::uint8_t>(std::lround(127.5 * (1.0 + s)));
    }
    fill_rect(img, r, r + 1, 0, profile.width_px, v);
  }
  if (punctured) fill_rect(img, profile.height_px / 3, 2 * profile.height_px / 3, 0, profile.width_px, 0);
  return img;
}

std::size_t nominal_cycle_samples(const ScreenProfile& profile, const ScreenFingerprint& fingerprint,
                                  double sample_rate_hz) {
  return static_cast<std::size_t>(std::floor(sample_rate_hz / (profile.refresh_rate_hz + fingerprint.refresh_offset_hz)));
}

SimOutput simulate_profiles(const ScreenProfile& profile, const ScreenFingerprint& fingerprint,
                            const std::vector<RowIntensityProfile>& rows, const FrameSchedule& schedule,
                            double duration_s, const SimParams& params, double sample_rate_hz) {
  profile.validate();
  params.validate();
  if (!(duration_s > 0.0)) throw ParamError("duration must be positive");
  if (!(sample_rate_hz > 0.0)) throw ParamError("sample rate must be positive");
  if (rows.empty()) throw ParamError("no frames to simulate");
  for (const auto& r : rows) {
    if (r.values.size() != static_cast<std::size_t>(profile.height_px)) {
      throw ParamError("row profile length does not match screen height");
    }
  }
  for (const auto& e : schedule) {
    if (e.frame >= rows.size()) throw ParamError("schedule references a missing frame");
  }
  const double carrier = profile.carrier_hz + fingerprint.carrier_detune_hz;
  if (carrier >= sample_rate_hz / 2.0 || carrier <= 0.0) throw ParamError("carrier at or above Nyquist");

  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  const double refresh = profile.refresh_rate_hz + fingerprint.refresh_offset_hz;
  const double w_nom = sample_rate_hz / refresh;
  const auto w = static_cast<std::size_t>(std::floor(w_nom));
  const double active = (1.0 - profile.blanking_fraction) * w_nom;
  const auto height = static_cast<std::size_t>(profile.height_px);

  std::vector<double> means(rows.size());
  for (std::size_t f = 0; f < rows.size(); ++f) means[f] = mean(rows[f].values);

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double phi = 2.0 * std::numbers::pi * unit(rng);
  const auto abn_lo = static_cast<std::size_t>(std::ceil(params.abnormal_range.first * static_cast<double>(w)));
  const auto abn_hi = static_cast<std::size_t>(std::floor(params.abnormal_range.second * static_cast<double>(w)));
  std::uniform_int_distribution<std::size_t> abnormal_len(abn_lo, std::max(abn_lo, abn_hi));

  // Per-row carrier envelope and baseband level for each frame, gain applied later.
  std::vector<std::vector<double>> env(rows.size()), base(rows.size());
  for (std::size_t f = 0; f < rows.size(); ++f) {
    env[f].resize(height + 1);
    base[f].resize(height + 1);
    for (std::size_t r = 0; r <= height; ++r) {
      const double v = r < height ? rows[f].values[r] : means[f];  // index `height` = blanking
      env[f][r] = params.carrier_amp * (1.0 - params.am_depth * v);
      base[f][r] = params.baseband_gain * (v - means[f]);
    }
  }

  SimOutput out;
  out.nominal_w = w;
  out.signal.sample_rate_hz = sample_rate_hz;
  out.signal.samples.resize(n);
  std::vector<double> carrier_term(n);

  const double omega = 2.0 * std::numbers::pi * carrier / sample_rate_hz;
  const std::complex<double> step = std::polar(1.0, omega);
  constexpr std::size_t kAnchor = 1024;
  std::complex<double> z;

  std::size_t sched_idx = 0;
  std::size_t start = 0;
  while (start < n) {
    std::size_t len = 0;
    if (params.abnormal_prob > 0.0 && unit(rng) < params.abnormal_prob) {
      len = abnormal_len(rng);
    } else {
      len = (unit(rng) < params.jitter_w_prob) ? w + 1 : w;
    }
    const double t0 = static_cast<double>(start) / sample_rate_hz;
    while (sched_idx + 1 < schedule.size() && schedule[sched_idx + 1].start_s <= t0) ++sched_idx;
    const std::size_t frame = schedule.empty() ? 0 : schedule[sched_idx].frame;
    out.cycle_starts.push_back(start);
    out.frame_schedule.push_back(frame);

    const auto& e = env[frame];
    const auto& b = base[frame];
    const std::size_t end = std::min(n, start + len);
    for (std::size_t i = start; i < end; ++i) {
      if (i % kAnchor == 0) z = std::polar(1.0, omega * static_cast<double>(i) + phi);
      const double j = static_cast<double>(i - start);
      std::size_t r = height;
      if (j < active) r = std::min(height - 1, static_cast<std::size_t>(j * static_cast<double>(height) / active));
      const double g = fingerprint.gain(j / w_nom);
      const double c = g * e[r] * z.real();
      carrier_term[i] = c;
      out.signal.samples[i] = g * b[r] + c;
      z *= step;
    }
    start += len;
  }

  if (params.noise_snr_db) {
    const double sigma = rms(carrier_term) / std::pow(10.0, *params.noise_snr_db / 20.0);
    std::mt19937_64 noise_rng(params.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (double& s : out.signal.samples) s += gauss(noise_rng);
  }
  return out;
}

SimOutput simulate_trace(const ScreenProfile& profile, const ScreenFingerprint& fingerprint,
                         const std::vector<FrameImage>& frames, const FrameSchedule& schedule,
                         double duration_s, const SimParams& params, double sample_rate_hz) {
  if (frames.empty()) throw ParamError("no frames to simulate");
  std::vector<RowIntensityProfile> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.height_px != profile.height_px) throw ParamError("frame height does not match screen height");
    rows.push_back(row_profile(f));
  }
  return simulate_profiles(profile, fingerprint, rows, schedule, duration_s, params, sample_rate_hz);
}

SimOutput simulate_trace(const ScreenProfile& profile, const ScreenFingerprint& fingerprint,
                         const FrameImage& frame, double duration_s, const SimParams& params,
                         double sample_rate_hz) {
  return simulate_trace(profile, fingerprint, std::vector<FrameImage>{frame}, {}, duration_s, params,
                        sample_rate_hz);
}

std::size_t propagation_delay_samples(double distance_m, double sample_rate_hz) {
  return static_cast<std::size_t>(std::llround(distance_m / 343.0 * sample_rate_hz));
}

SampledSignal apply_channel(const SampledSignal& signal, const ChannelParams& channel,
                            [[maybe_unused]] const ScreenProfile& profile) {
  if (channel.distance_m < 0.0) throw ParamError("distance must be >= 0");
  if (channel.target_rate_hz && *channel.target_rate_hz > signal.sample_rate_hz) {
    throw ParamError("target rate exceeds source rate");
  }
  const std::size_t n = signal.size();
  SampledSignal out{std::vector<double>(n, 0.0), signal.sample_rate_hz};

  const std::size_t delay = propagation_delay_samples(channel.distance_m, signal.sample_rate_hz);
  const double scale = 1.0 / std::max(1.0, channel.distance_m);
  for (std::size_t i = delay; i < n; ++i) out.samples[i] = scale * signal.samples[i - delay];

  if (channel.lowpass_hz) {
    const double hi = std::min(*channel.lowpass_hz, signal.sample_rate_hz / 2.0);
    out = bandpass(out, 0.0, hi);
  }

  std::mt19937_64 rng(channel.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (channel.speech_interference_db && n > 0) {
    SampledSignal noise{std::vector<double>(n), signal.sample_rate_hz};
    for (double& v : noise.samples) v = gauss(rng);
    noise = bandpass(noise, 0.0, std::min(8000.0, signal.sample_rate_hz / 2.0));
    const double target = std::pow(10.0, *channel.speech_interference_db / 20.0);
    const double level = rms(noise.samples);
    if (level > 0.0) {
      for (std::size_t i = 0; i < n; ++i) out.samples[i] += noise.samples[i] * target / level;
    }
  }
  if (channel.noise_floor_db) {
    const double sigma = std::pow(10.0, *channel.noise_floor_db / 20.0);
    for (double& v : out.samples) v += sigma * gauss(rng);
  }

  if (channel.target_rate_hz && *channel.target_rate_hz < signal.sample_rate_hz) {
    out = resample(out, *channel.target_rate_hz);
  }
  return out;
}

// ---- rendered content -------------------------------------------------------

namespace {

constexpr int kKeyLong = 90;    // keyboard-column extent
constexpr int kKeyShort = 175;  // keyboard-row extent
constexpr const char* kKeyRows[3] = {"qwertyuiop", "asdfghjkl", "zxcvbnm"};

// Keyboard-space placement: column offset (in key widths) of each row's first key.
constexpr double kRowOffset[3] = {0.0, 0.0, 0.5};

}  // namespace

void KeyboardLayout::validate() const {
  screen.validate();
  if (keys.size() != 27 || !keys.contains(' ')) throw ParamError("layout needs 26 letters and space");
  for (const auto& [k, rect] : keys) {
    if (!((k >= 'a' && k <= 'z') || k == ' ')) throw ParamError("unexpected key in layout");
    if (rect.row_start < 0 || rect.row_end > screen.height_px || rect.row_start >= rect.row_end ||
        rect.col_start < 0 || rect.col_end > screen.width_px || rect.col_start >= rect.col_end) {
      throw ParamError(std::string("key '") + k + "' outside the screen");
    }
  }
}

KeyboardLayout make_phone_keyboard(const ScreenProfile& screen, Orientation orientation) {
  screen.validate();
  KeyboardLayout layout;
  layout.orientation = orientation;
  layout.screen = screen;

  const int along = 10 * kKeyLong;  // extent along the q..p direction
  const int across = 4 * kKeyShort;
  const bool portrait = orientation == Orientation::kPortrait;
  const int row_extent = portrait ? along : across;
  const int col_extent = portrait ? across : along;
  if (row_extent > screen.height_px || col_extent > screen.width_px) {
    throw ParamError("screen too small for the on-screen keyboard");
  }
  const int row0 = (screen.height_px - row_extent) / 2;
  const int col0 = (screen.width_px - col_extent) / 2;

  // (a, b) = extent along the key row in key widths, k = keyboard row index
  auto place = [&](char key, double a0, double a1, int k) {
    const int along0 = static_cast<int>(std::lround(a0 * kKeyLong));
    const int along1 = static_cast<int>(std::lround(a1 * kKeyLong));
    KeyRect r;
    if (portrait) {
      r = {row0 + along0, row0 + along1, col0 + k * kKeyShort, col0 + (k + 1) * kKeyShort};
    } else {
      // landscape keys are drawn upright: keyboard rows stack down the panel
      r = {row0 + k * kKeyShort, row0 + (k + 1) * kKeyShort, col0 + along0, col0 + along1};
    }
    layout.keys[key] = r;
  };
  for (int k = 0; k < 3; ++k) {
    const std::string row = kKeyRows[k];
    for (std::size_t i = 0; i < row.size(); ++i) {
      const double a = kRowOffset[k] + static_cast<double>(i);
      place(row[i], a, a + 1.0, k);
    }
  }
  place(' ', 2.5, 7.5, 3);
  return layout;
}

FrameImage render_keyboard_frame(const KeyboardLayout& layout, std::optional<char> pressed) {
  if (pressed && !layout.keys.contains(*pressed)) {
    throw ParamError(std::string("unknown key '") + *pressed + "'");
  }
  FrameImage img(layout.screen.height_px, layout.screen.width_px, 255);
  constexpr int kBorder = 2;
  for (const auto& [key, r] : layout.keys) {
    fill_rect(img, r.row_start, r.row_end, r.col_start, r.col_end, 0);
    const std::uint8_t inside = (pressed && *pressed == key) ? 0 : 255;
    fill_rect(img, r.row_start + kBorder, r.row_end - kBorder, r.col_start + kBorder, r.col_end - kBorder, inside);
  }
  return img;
}

void CharLayout::validate(const ScreenProfile& screen) const {
  if (slot_count < 1 || static_cast<int>(slot_row_ranges.size()) != slot_count) {
    throw ParamError("char layout slot count mismatch");
  }
  if (char_width_px < 5) throw ParamError("char width must be at least 5 px");
  int prev_end = 0;
  for (const auto& [r0, r1] : slot_row_ranges) {
    if (r0 < prev_end || r1 <= r0 || r1 > screen.height_px) throw ParamError("char slots must be disjoint, ascending and on screen");
    prev_end = r1;
  }
}

CharLayout make_char_layout(const ScreenProfile& screen, int slot_count, int char_width_px, int top_row) {
  CharLayout layout;
  layout.slot_count = slot_count;
  layout.char_width_px = char_width_px;
  for (int i = 0; i < slot_count; ++i) {
    layout.slot_row_ranges.emplace_back(top_row + i * char_width_px, top_row + (i + 1) * char_width_px);
  }
  layout.validate(screen);
  return layout;
}

FrameImage render_text_frame(const std::string& text, int char_width_px, const CharLayout& layout,
                             const ScreenProfile& screen) {
  layout.validate(screen);
  if (static_cast<int>(text.size()) > layout.slot_count) throw ParamError("text longer than the layout capacity");
  const int scale = char_width_px / 5;
  if (scale < 1) throw ParamError("char width must be at least 5 px");
  const int glyph_cols = 7 * scale;
  if (glyph_cols > screen.width_px) throw ParamError("glyph wider than the screen");
  const int col0 = (screen.width_px - glyph_cols) / 2;

  FrameImage img(screen.height_px, screen.width_px, 255);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == ' ') continue;
    const auto& mask = glyph_mask(text[i]);
    const auto [r0, r1] = layout.slot_row_ranges[i];
    if (5 * scale > r1 - r0) throw ParamError("glyph taller than its slot");
    const int top = r0 + ((r1 - r0) - 5 * scale) / 2;
    for (int gr = 0; gr < 7; ++gr) {
      for (int gc = 0; gc < 5; ++gc) {
        if (mask[static_cast<std::size_t>(gr)][gc] != '#') continue;
        fill_rect(img, top + gc * scale, top + (gc + 1) * scale, col0 + gr * scale, col0 + (gr + 1) * scale, 0);
      }
    }
  }
  return img;
}

FrameImage render_website_frame(const ScreenProfile& screen, std::uint64_t page_seed,
                                std::optional<std::uint64_t> dynamic_seed) {
  screen.validate();
  const int h = screen.height_px;
  const int w = screen.width_px;
  std::mt19937_64 rng(page_seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  FrameImage img(h, w, static_cast<std::uint8_t>(uniform(225, 255)));
  const int count = uniform(8, 20);
  for (int i = 0; i < count; ++i) {
    int rh = 0, cw = 0;
    if (i == count - 1) {  // the dynamic "ad" block is drawn last and stays small
      rh = uniform(std::max(1, h / 50), std::max(2, h / 9));
      cw = uniform(std::max(1, w / 8), std::max(2, w / 3));
    } else {
      rh = uniform(std::max(1, h / 100), std::max(2, h / 3));
      cw = uniform(std::max(1, w / 10), w);
    }
    const int r0 = uniform(0, h - rh);
    const int c0 = uniform(0, w - cw);
    auto level = static_cast<std::uint8_t>(uniform(0, 255));
    if (i == count - 1 && dynamic_seed) {
      std::mt19937_64 dyn(*dynamic_seed);
      level = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, 255)(dyn));
    }
    fill_rect(img, r0, r0 + rh, c0, c0 + cw, level);
  }
  return img;
}

}  // namespace screenleak
