#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "screenleak/types.hpp"

namespace screenleak {

struct ScreenProfile {
  int width_px = 1680;
  int height_px = 1050;
  double refresh_rate_hz = 60.0;
  double carrier_hz = 32000.0;
  /// Fraction of each refresh cycle during which no rows are rendered.
  double blanking_fraction = 0.0;

  void validate() const;
};

/// Per-instance perturbations that make two screens of one model sound slightly different.
struct ScreenFingerprint {
  static constexpr int kGainPoints = 8;

  std::uint64_t seed = 0;
  /// Circular piecewise-linear gain over cycle phase; point k sits at phase k / kGainPoints.
  std::array<double, kGainPoints> gain_curve{1, 1, 1, 1, 1, 1, 1, 1};
  double carrier_detune_hz = 0.0;
  double refresh_offset_hz = 0.0;

  double gain(double phase) const;

  friend bool operator==(const ScreenFingerprint&, const ScreenFingerprint&) = default;
};

ScreenFingerprint make_fingerprint(std::uint64_t seed);
ScreenFingerprint null_fingerprint();

struct SimParams {
  double baseband_gain = 0.05;
  double am_depth = 0.6;
  double carrier_amp = 0.5;
  /// Probability that a regular cycle lasts W + 1 samples instead of W.
  double jitter_w_prob = 0.3;
  double abnormal_prob = 0.0;
  std::pair<double, double> abnormal_range{0.9, 2.0};
  /// Carrier-to-noise ratio in dB; nullopt disables noise.
  std::optional<double> noise_snr_db;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ChannelParams {
  double distance_m = 0.0;
  /// RMS level in dBFS of band-limited (< 8 kHz) interference.
  std::optional<double> speech_interference_db;
  std::optional<double> lowpass_hz;
  std::optional<double> target_rate_hz;
  /// RMS level in dBFS of white ambient noise added after attenuation.
  std::optional<double> noise_floor_db;
  std::uint64_t seed = 0;
};

/// Mean brightness per pixel row, in [0, 1], row 0 at the top.
struct RowIntensityProfile {
  std::vector<double> values;
};

/// A frame shown from start_s (inclusive) until the next entry's start.
struct ScheduleEntry {
  double start_s = 0.0;
  std::size_t frame = 0;
};
using FrameSchedule = std::vector<ScheduleEntry>;

struct SimOutput {
  SampledSignal signal;
  std::vector<std::size_t> cycle_starts;
  /// Frame shown during each cycle, parallel to cycle_starts.
  std::vector<std::size_t> frame_schedule;
  /// Regular cycle length W (samples).
  std::size_t nominal_w = 0;
};

RowIntensityProfile row_profile(const FrameImage& frame);

enum class ZebraKind { kSquare, kSinusoidal };

FrameImage gen_zebra_frame(const ScreenProfile& profile, int period_px, ZebraKind kind, bool punctured = false);

/// Frame id `i` in `frames` is shown according to `schedule`; an empty schedule shows frame 0 throughout.
SimOutput simulate_trace(const ScreenProfile& profile, const ScreenFingerprint& fingerprint,
                         const std::vector<FrameImage>& frames, const FrameSchedule& schedule,
                         double duration_s, const SimParams& params, double sample_rate_hz = 192000.0);

SimOutput simulate_trace(const ScreenProfile& profile, const ScreenFingerprint& fingerprint,
                         const FrameImage& frame, double duration_s, const SimParams& params,
                         double sample_rate_hz = 192000.0);

/// Same as simulate_trace but driven by precomputed row profiles.
SimOutput simulate_profiles(const ScreenProfile& profile, const ScreenFingerprint& fingerprint,
                            const std::vector<RowIntensityProfile>& rows, const FrameSchedule& schedule,
                            double duration_s, const SimParams& params, double sample_rate_hz = 192000.0);

/// Regular cycle length W = floor(rate / (refresh + offset)).
std::size_t nominal_cycle_samples(const ScreenProfile& profile, const ScreenFingerprint& fingerprint,
                                  double sample_rate_hz);

/// Propagation delay, 1/max(1, d) attenuation, then the optional lowpass, interference,
/// noise floor and resampling stages in that order. Output length equals input length
/// unless resampled.
SampledSignal apply_channel(const SampledSignal& signal, const ChannelParams& channel,
                            const ScreenProfile& profile);

/// Samples of delay for a source at distance_m (speed of sound 343 m/s).
std::size_t propagation_delay_samples(double distance_m, double sample_rate_hz);

// ---- rendered content -------------------------------------------------------

enum class Orientation { kPortrait, kLandscape };

struct KeyRect {
  int row_start = 0;
  int row_end = 0;  // exclusive
  int col_start = 0;
  int col_end = 0;  // exclusive

  friend bool operator==(const KeyRect&, const KeyRect&) = default;
};

/// On-screen keyboard geometry in panel pixel coordinates. The space bar is keyed by ' '.
struct KeyboardLayout {
  Orientation orientation = Orientation::kPortrait;
  std::map<char, KeyRect> keys;
  ScreenProfile screen;

  void validate() const;
};

/// Phone-style q..p / a..l / z..m / space layout. In portrait the keyboard is rotated so
/// that keyboard columns run down the panel rows.
KeyboardLayout make_phone_keyboard(const ScreenProfile& screen, Orientation orientation);

/// White background, each key a white rectangle with a 2 px black border; the
/// pressed key, if any, is filled black.
FrameImage render_keyboard_frame(const KeyboardLayout& layout, std::optional<char> pressed = std::nullopt);

struct CharLayout {
  int slot_count = 6;
  std::vector<std::pair<int, int>> slot_row_ranges;
  int char_width_px = 150;

  void validate(const ScreenProfile& screen) const;
};

/// slot_count slots of char_width_px rows each, starting at top_row.
CharLayout make_char_layout(const ScreenProfile& screen, int slot_count = 6, int char_width_px = 150,
                            int top_row = 75);

/// Uppercase A-Z glyphs, one per slot, glyph columns running down the panel rows. A space
/// leaves its slot empty.
FrameImage render_text_frame(const std::string& text, int char_width_px, const CharLayout& layout,
                             const ScreenProfile& screen);

/// 5x7 mask for an uppercase letter; mask[r][c] is glyph row r, column c. Throws ParamError
/// for anything outside A-Z.
const std::array<const char*, 7>& glyph_mask(char c);

/// Seeded block layout of 8-20 gray rectangles standing in for a web page.
/// `dynamic_seed` repaints one rectangle with a random intensity (ads, animations).
FrameImage render_website_frame(const ScreenProfile& screen, std::uint64_t page_seed,
                                std::optional<std::uint64_t> dynamic_seed = std::nullopt);

}  // namespace screenleak
