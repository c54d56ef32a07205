#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "screenleak/attacks.hpp"
#include "screenleak/chunker.hpp"
#include "screenleak/classify.hpp"
#include "screenleak/screen_sim.hpp"

namespace screenleak {

/// Deterministic child seed, so every generated item can be reproduced on its own.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// A simulated victim screen plus the attacker's recording and preprocessing settings.
struct Rig {
  ScreenProfile profile;
  ScreenFingerprint fingerprint;
  SimParams sim;
  std::optional<ChannelParams> channel;
  double sample_rate_hz = 192000.0;
  ChunkParams chunk;
  std::pair<double, double> carrier_band{27500.0, 38000.0};
};

/// Rig at SNR `snr_db` whose chunk size S is the screen's nominal cycle length.
Rig make_rig(const ScreenProfile& profile, const ScreenFingerprint& fingerprint, std::optional<double> snr_db = 20.0,
             double sample_rate_hz = 192000.0);

double cycle_samples(const Rig& rig);

/// Microphone signal for a frame sequence, after the rig's channel.
SampledSignal record(const Rig& rig, const std::vector<RowIntensityProfile>& rows, const FrameSchedule& schedule,
                     double duration_s, std::uint64_t seed);

OutputTrace capture(const Rig& rig, const RowIntensityProfile& rows, double duration_s, std::uint64_t seed);

// ---- keyboard -----------------------------------------------------------------

struct KeyboardSetup {
  KeyboardLayout layout;
  ClassGrouping grouping;
  KeyboardFeatures features;
  RowIntensityProfile idle_rows;
  std::map<char, RowIntensityProfile> key_rows;
};

/// Builds the layout and calibrates the feature aligner on the idle keyboard.
KeyboardSetup make_keyboard_setup(const Rig& rig, Orientation orientation, std::uint64_t seed);

/// `per_key` traces of every key, labelled by group.
LabeledDataset keyboard_dataset(const Rig& rig, const KeyboardSetup& setup, std::size_t per_key, double trace_s,
                                std::uint64_t seed);

/// Recording of `word` typed with each key frame held for dwell_s.
SampledSignal simulate_typing(const Rig& rig, const KeyboardSetup& setup, const std::string& word, double dwell_s,
                              std::uint64_t seed);

struct WordTrial {
  std::string word;
  std::vector<std::string> observed;
  std::size_t list_size = 0;
  bool hit = false;
};

std::vector<WordTrial> keyboard_word_trials(const Rig& rig, const KeyboardSetup& setup, const Model& model,
                                            const std::vector<std::string>& words,
                                            const std::vector<std::string>& dictionary, double dwell_s,
                                            std::size_t runlen_min, std::uint64_t seed);

// ---- text -----------------------------------------------------------------------

struct TextSetup {
  CharLayout layout;
  TextFeatures features;
};

/// Calibrates on a frame with every slot showing 'A'.
TextSetup make_text_setup(const Rig& rig, std::uint64_t seed);

/// Removes labels without items, renumbering the rest in order.
LabeledDataset drop_empty_classes(const LabeledDataset& data);

/// One dataset per slot over the text_slot_labels() that occur there, from `count` random
/// strings of 3-6 letters. Each trace is aligned onto its own (known) frame.
std::vector<LabeledDataset> text_datasets(const Rig& rig, const TextSetup& setup, std::size_t count, double trace_s,
                                          std::uint64_t seed);

/// Per-slot accuracy of decode_slots on `count` fresh random strings (blind alignment).
std::vector<double> text_slot_accuracy(const Rig& rig, const TextSetup& setup, const std::vector<Model>& slot_models,
                                       std::size_t count, double trace_s, std::uint64_t seed);

OutputTrace capture_text(const Rig& rig, const TextSetup& setup, const std::string& text, double trace_s,
                         std::uint64_t seed);

struct TextTrialSummary {
  std::size_t words = 0;
  std::size_t top1 = 0;
  std::size_t top5 = 0;
};

TextTrialSummary text_word_trials(const Rig& rig, const TextSetup& setup, const std::vector<Model>& slot_models,
                                  const std::vector<std::string>& words, const std::vector<std::string>& dictionary,
                                  double trace_s, std::uint64_t seed);

/// `per_length` words of each length 3..6, drawn without replacement from the pool.
std::vector<std::string> pick_words(const std::vector<std::string>& pool, std::size_t per_length,
                                    std::uint64_t seed, std::size_t min_len = 3, std::size_t max_len = 6);

// ---- websites, VoIP, cross-screen -------------------------------------------------

/// Page seed of website class `cls`.
std::uint64_t page_seed(std::size_t cls);

std::vector<std::string> website_labels(std::size_t classes);

enum class SiteContent {
  /// Independent random layouts.
  kDistinct,
  /// One shared layout; classes differ only in two blocks.
  kFamily,
};

/// Page of website class `cls`, with the dynamic block repainted from `item_seed`.
FrameImage website_frame(const ScreenProfile& screen, std::size_t cls, std::uint64_t item_seed,
                         SiteContent content = SiteContent::kDistinct);

/// Carrier-path dataset: harmonic_features of each page's OutputTrace, fresh dynamic content per trace.
LabeledDataset website_dataset(const Rig& rig, std::size_t classes, std::size_t per_class, double trace_s,
                               std::uint64_t seed, const std::string& screen_id = {},
                               SiteContent content = SiteContent::kDistinct);

/// Low-rate path: 10 pages plus a video-call frame whose content changes every cycle,
/// recorded through a 44.1 kHz channel and reduced by voip_features.
LabeledDataset voip_dataset(const Rig& rig, std::size_t per_class, double trace_s, std::uint64_t seed,
                            std::size_t pool_bins = 90);

std::vector<std::string> voip_labels();

struct CrossScreenReport {
  std::vector<std::string> screens;
  /// collection name -> accuracy per victim screen (NaN where the collection does not apply).
  std::vector<std::pair<std::string, std::vector<double>>> matrix;
  double self_mean = 0.0;
  double all_minus_victim_mean = 0.0;
  double single_foreign_mean = 0.0;
};

struct CrossScreenParams {
  std::vector<std::uint64_t> fingerprint_seeds{11, 12, 13, 14, 15, 16};
  std::size_t classes = 25;
  std::size_t per_class = 14;
  /// Training traces per class of every collection, spread evenly over its screens.
  std::size_t quota = 10;
  double trace_s = 0.5;
  std::optional<double> snr_db = 20.0;
  double T = 0.9;
  SiteContent content = SiteContent::kFamily;
};

CrossScreenReport cross_screen(const CrossScreenParams& params, std::uint64_t seed);

void write_cross_screen_csv(const CrossScreenReport& report, const std::filesystem::path& path);

// ---- channel experiments ---------------------------------------------------------

struct DistancePoint {
  double distance_cm = 0.0;
  double correlation = 0.0;
};

std::vector<DistancePoint> distance_sweep(const Rig& rig, const FrameImage& frame, const std::vector<double>& distances_cm,
                                          double trace_s, std::uint64_t seed);

/// Shift (samples, in [0, cycle)) between vsync-triggered averages recorded at distance_m and at 0 m.
std::size_t delay_shift(const Rig& rig, const FrameImage& frame, double distance_m, double trace_s,
                        std::uint64_t seed);

}  // namespace screenleak
