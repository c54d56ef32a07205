#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "screenleak/chunker.hpp"
#include "screenleak/classify.hpp"
#include "screenleak/dsp.hpp"
#include "screenleak/screen_sim.hpp"
#include "screenleak/trace_io.hpp"

namespace screenleak {

// ---- class grouping and dictionary matching ---------------------------------

struct ClassGrouping {
  std::vector<std::string> groups;
  std::map<char, int> key_to_group;

  int group_of(char key) const;
  std::size_t size() const { return groups.size(); }
};

/// Portrait: keys with identical row spans share a class. Landscape: one class per key.
ClassGrouping build_grouping(const KeyboardLayout& layout);

/// Group labels of the word's letters with adjacent duplicates collapsed.
std::vector<std::string> expected_word_trace(const std::string& word, const ClassGrouping& grouping);

struct PredictionList {
  std::vector<std::pair<std::string, double>> candidates;
  std::string query_trace_id;

  /// 1-based rank of `word`, or nullopt when absent.
  std::optional<std::size_t> rank_of(const std::string& word) const;
};

/// Every dictionary word whose expected trace equals `observed`, in dictionary order.
PredictionList match_dictionary(const std::vector<std::string>& observed, const std::vector<std::string>& dictionary,
                                const ClassGrouping& grouping);

void write_prediction_list(const PredictionList& list, const std::filesystem::path& path);

// ---- rotation anchoring -------------------------------------------------------

/// Maps OutputTraces onto a common refresh-phase origin. The reference is the OutputTrace
/// of a known calibration frame; `anchor` is the rotation that takes the frame's
/// predicted envelope onto that reference.
struct TraceAligner {
  std::vector<double> reference;
  std::size_t anchor = 0;

  std::size_t len() const { return reference.size(); }
  /// Left rotation that puts the query in the cycle-start frame (row 0 at index 0).
  std::size_t shift_of(std::span<const double> trace) const;
  std::vector<double> align(std::span<const double> trace) const;
};

/// Predicted carrier envelope shape (up to affine scale) of a frame over `len` samples,
/// starting at the cycle start.
std::vector<double> predicted_envelope(const RowIntensityProfile& rows, const ScreenProfile& profile,
                                       std::size_t len, double cycle_samples);

TraceAligner calibrate_aligner(const OutputTrace& calibration, const FrameImage& calibration_frame,
                               const ScreenProfile& profile, std::size_t len, double cycle_samples);

/// Mean of consecutive blocks of `factor` samples (the tail that does not fill a block is dropped).
std::vector<double> pool(std::span<const double> x, std::size_t factor);

// ---- keyboard snooping --------------------------------------------------------

struct KeyboardFeatures {
  TraceAligner aligner;
  std::size_t pool_factor = 4;

  std::vector<double> operator()(const OutputTrace& trace) const;
};

struct SnoopParams {
  double window_s = 0.5;
  /// Window advance in samples; 0 means one nominal refresh cycle (params.S).
  std::size_t stride_samples = 0;
  std::size_t runlen_min = 35;
  ChunkParams chunk;
  std::pair<double, double> carrier_band{27500.0, 38000.0};
};

struct SnoopResult {
  /// Group id per window, -1 where preprocessing failed.
  std::vector<int> window_labels;
  std::vector<std::string> emitted;
};

/// Slides a window over the trace, classifies each window's OutputTrace, and keeps labels
/// whose contiguous run (ignoring failed windows) reaches runlen_min. Model classes are
/// matched to groups by name.
SnoopResult snoop_stream(const SampledSignal& signal, const Model& model, const ClassGrouping& grouping,
                         const KeyboardFeatures& features, const SnoopParams& params);

/// Run-length filter used by snoop_stream, exposed for testing.
std::vector<std::string> runlength_filter(const std::vector<int>& labels, const std::vector<std::string>& names,
                                          std::size_t runlen_min);

// ---- text extraction ----------------------------------------------------------

/// Sample ranges of each character slot within a cycle-start-aligned trace.
std::vector<std::pair<std::size_t, std::size_t>> char_segment_map(const CharLayout& layout,
                                                                  const ScreenProfile& profile,
                                                                  std::size_t trace_len);

/// Per-slot features. Text frames repeat with the slot pitch, so correlating against the
/// calibration frame can lock whole slots off; decoding therefore tries the calibrated
/// rotation plus or minus up to `candidate_span` slot pitches.
struct TextFeatures {
  TraceAligner aligner;
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  std::size_t pool_factor = 4;
  int candidate_span = 2;
  /// Used to check decoded candidates against their predicted envelope.
  CharLayout layout;
  ScreenProfile profile;
  double cycle_samples = 0.0;

  /// One feature vector per slot, using the calibrated rotation only.
  std::vector<std::vector<double>> operator()(const OutputTrace& trace) const;
  /// Per-slot features of the trace rotated onto a known frame's predicted envelope.
  std::vector<std::vector<double>> known(const OutputTrace& trace, std::span<const double> frame_envelope) const;
  /// Per-slot features for every candidate rotation, calibrated rotation first.
  std::vector<std::vector<std::vector<double>>> candidates(const OutputTrace& trace) const;
  /// The same rotations as candidates(), as aligned traces.
  std::vector<std::vector<double>> candidate_traces(const OutputTrace& trace) const;
  std::vector<std::vector<double>> slots(std::span<const double> aligned) const;
  std::size_t slot_pitch() const;
};

/// Label set of the per-slot models: "A".."Z" followed by the empty-slot class.
std::vector<std::string> text_slot_labels();
inline constexpr const char* kBlankLabel = "_";

/// Ranks dictionary words by the summed per-slot log-probabilities of their first
/// min(len, slots) letters; slots past the end of a word score the empty-slot class.
/// Each word is scored under its best candidate rotation.
/// A slot model may cover a subset of text_slot_labels(); missing classes have probability 0.
/// Ties are broken lexicographically. Only the best top_k words are returned.
PredictionList extract_text(const OutputTrace& trace, const std::vector<Model>& slot_models,
                            const std::vector<std::string>& dictionary, const TextFeatures& features,
                            std::size_t top_k = 100);

/// Per-slot log-probabilities over text_slot_labels() (-inf for classes a model lacks).
std::vector<std::vector<double>> slot_log_probs(const std::vector<Model>& slot_models,
                                                const std::vector<std::vector<double>>& slot_features);

/// Per-slot argmax decode under every candidate rotation; keeps the candidate whose decoded
/// text best explains the aligned trace (Pearson with its predicted envelope).
struct SlotDecode {
  std::size_t candidate = 0;
  double fit = 0.0;
  std::vector<std::vector<double>> log_probs;
  std::vector<int> labels;
};
SlotDecode decode_slots(const OutputTrace& trace, const std::vector<Model>& slot_models, const TextFeatures& features);

/// slot_log_probs[slot] is indexed like text_slot_labels(); words with a -inf score are dropped.
PredictionList rank_words(const std::vector<std::vector<double>>& slot_log_probs,
                          const std::vector<std::string>& dictionary, std::size_t top_k);

// ---- website / foreground distinguishing ------------------------------------

/// Magnitudes of DFT harmonics 1..harmonics of the trace; invariant to rotation.
std::vector<double> harmonic_features(std::span<const double> trace, std::size_t harmonics = 75);

/// Log power of band_features of the low-rate trace, summed over blocks of pool_bins bins.
std::vector<double> voip_features(const SampledSignal& low_rate, double lo_hz = 9000.0, double hi_hz = 15000.0,
                                  std::size_t pool_bins = 90);

std::optional<Confident> distinguish(std::span<const double> features, const Model& model,
                                     std::optional<double> threshold = std::nullopt);

// ---- layout serialization -----------------------------------------------------

KeyValues keyboard_layout_to_kv(const KeyboardLayout& layout);
KeyboardLayout keyboard_layout_from_kv(const KeyValues& kv);
KeyValues char_layout_to_kv(const CharLayout& layout);
CharLayout char_layout_from_kv(const KeyValues& kv);

}  // namespace screenleak
