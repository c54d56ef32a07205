#include "screenleak/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "screenleak/errors.hpp"
#include "screenleak/fft.hpp"

namespace screenleak {
namespace {

std::string key_label(char k) { return k == ' ' ? std::string("space") : std::string(1, k); }

std::string key_name(char k) { return k == ' ' ? std::string("space") : std::string(1, k); }

char key_from_name(const std::string& name) {
  if (name == "space") return ' ';
  if (name.size() == 1 && name[0] >= 'a' && name[0] <= 'z') return name[0];
  throw FormatError("bad key name '" + name + "'");
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::logic_error&) {
      throw FormatError("bad integer '" + tok + "'");
    }
  }
  return out;
}

const std::string& require(const KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("missing key '" + key + "'");
  return it->second;
}

double to_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::logic_error&) {
    throw FormatError("bad number '" + s + "'");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---- class grouping and dictionary matching ---------------------------------

int ClassGrouping::group_of(char key) const {
  const auto it = key_to_group.find(key);
  if (it == key_to_group.end()) throw ParamError(std::string("character '") + key + "' has no class");
  return it->second;
}

ClassGrouping build_grouping(const KeyboardLayout& layout) {
  layout.validate();
  // bucket keys by row span (portrait) or keep them apart (landscape)
  std::map<std::pair<int, int>, std::string> buckets;
  std::vector<std::string> labels;
  if (layout.orientation == Orientation::kPortrait) {
    for (const auto& [k, r] : layout.keys) buckets[{r.row_start, r.row_end}].push_back(k);
    // merged labels list the home-row key first ("aq", "ki")
    static const std::string kOrder = "asdfghjklqwertyuiopzxcvbnm ";
    for (auto& [span, keys] : buckets) {
      std::sort(keys.begin(), keys.end(), [](char a, char b) { return kOrder.find(a) < kOrder.find(b); });
      labels.push_back(keys == " " ? std::string("space") : keys);
    }
  } else {
    for (const auto& [k, r] : layout.keys) labels.push_back(key_label(k));
  }
  // single letters first, then merged pairs, then space
  std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
    const bool sa = a == "space", sb = b == "space";
    if (sa != sb) return sb;
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });

  ClassGrouping g;
  g.groups = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == "space") {
      g.key_to_group[' '] = static_cast<int>(i);
    } else {
      for (char c : labels[i]) g.key_to_group[c] = static_cast<int>(i);
    }
  }
  return g;
}

std::vector<std::string> expected_word_trace(const std::string& word, const ClassGrouping& grouping) {
  std::vector<std::string> out;
  int prev = -1;
  for (char ch : word) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const int g = grouping.group_of(c);
    if (g != prev) out.push_back(grouping.groups[static_cast<std::size_t>(g)]);
    prev = g;
  }
  return out;
}

std::optional<std::size_t> PredictionList::rank_of(const std::string& word) const {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].first == word) return i + 1;
  }
  return std::nullopt;
}

PredictionList match_dictionary(const std::vector<std::string>& observed, const std::vector<std::string>& dictionary,
                                const ClassGrouping& grouping) {
  PredictionList out;
  if (observed.empty()) return out;
  std::vector<int> target;
  for (const auto& label : observed) {
    const auto it = std::find(grouping.groups.begin(), grouping.groups.end(), label);
    if (it == grouping.groups.end()) return out;  // unknown label: nothing can match
    target.push_back(static_cast<int>(it - grouping.groups.begin()));
  }
  for (const auto& word : dictionary) {
    std::size_t t = 0;
    int prev = -1;
    bool ok = !word.empty();
    for (char c : word) {
      const auto it = grouping.key_to_group.find(c);
      if (it == grouping.key_to_group.end()) {
        ok = false;
        break;
      }
      if (it->second == prev) continue;
      prev = it->second;
      if (t >= target.size() || target[t] != it->second) {
        ok = false;
        break;
      }
      ++t;
    }
    if (ok && t == target.size()) out.candidates.emplace_back(word, 1.0);
  }
  return out;
}

void write_prediction_list(const PredictionList& list, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "rank\tword\tscore\n";
  for (std::size_t i = 0; i < list.candidates.size(); ++i) {
    os << (i + 1) << '\t' << list.candidates[i].first << '\t' << fmt(list.candidates[i].second) << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

// ---- rotation anchoring -------------------------------------------------------

std::vector<double> predicted_envelope(const RowIntensityProfile& rows, const ScreenProfile& profile,
                                       std::size_t len, double cycle_samples) {
  const std::size_t h = rows.values.size();
  if (h == 0) throw ParamError("empty row profile");
  const double active = (1.0 - profile.blanking_fraction) * cycle_samples;
  const double blank = mean(rows.values);
  std::vector<double> out(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double pos = static_cast<double>(i) * static_cast<double>(h) / active;
    const double v = pos < static_cast<double>(h) ? rows.values[static_cast<std::size_t>(pos)] : blank;
    out[i] = -v;  // the carrier envelope falls as brightness rises
  }
  return out;
}

TraceAligner calibrate_aligner(const OutputTrace& calibration, const FrameImage& calibration_frame,
                               const ScreenProfile& profile, std::size_t len, double cycle_samples) {
  if (calibration.values.size() < len) throw ParamError("calibration trace shorter than the feature length");
  TraceAligner a;
  a.reference.assign(calibration.values.begin(), calibration.values.begin() + static_cast<std::ptrdiff_t>(len));
  const auto tmpl = predicted_envelope(row_profile(calibration_frame), profile, len, cycle_samples);
  a.anchor = max_corr_shift(tmpl, a.reference).shift;
  return a;
}

std::size_t TraceAligner::shift_of(std::span<const double> trace) const {
  if (trace.size() < len()) throw ParamError("trace shorter than the aligner reference");
  const auto s = max_corr_shift(trace.first(len()), reference).shift;
  return (s + len() - anchor % len()) % len();
}

std::vector<double> TraceAligner::align(std::span<const double> trace) const {
  const auto s = shift_of(trace);
  return rotate(trace.first(len()), static_cast<std::ptrdiff_t>(s));
}

std::vector<double> pool(std::span<const double> x, std::size_t factor) {
  if (factor == 0) throw ParamError("pool factor must be positive");
  std::vector<double> out(x.size() / factor);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < factor; ++k) acc += x[i * factor + k];
    out[i] = acc / static_cast<double>(factor);
  }
  return out;
}

// ---- keyboard snooping --------------------------------------------------------

std::vector<double> KeyboardFeatures::operator()(const OutputTrace& trace) const {
  return pool(aligner.align(trace.values), pool_factor);
}

std::vector<std::string> runlength_filter(const std::vector<int>& labels, const std::vector<std::string>& names,
                                          std::size_t runlen_min) {
  std::vector<int> clean;
  for (int l : labels) {
    if (l >= 0) clean.push_back(l);
  }
  std::vector<std::string> out;
  int last_emitted = -1;
  for (std::size_t i = 0; i < clean.size();) {
    std::size_t j = i;
    while (j < clean.size() && clean[j] == clean[i]) ++j;
    if (j - i >= runlen_min && clean[i] != last_emitted) {
      out.push_back(names.at(static_cast<std::size_t>(clean[i])));
      last_emitted = clean[i];
    }
    i = j;
  }
  return out;
}

SnoopResult snoop_stream(const SampledSignal& signal, const Model& model, const ClassGrouping& grouping,
                         const KeyboardFeatures& features, const SnoopParams& params) {
  // model classes may come in any order; they are matched to groups by name
  std::vector<int> group_of_label;
  for (const auto& name : label_names(model)) {
    const auto it = std::find(grouping.groups.begin(), grouping.groups.end(), name);
    if (it == grouping.groups.end()) throw ParamError("model class '" + name + "' is not a group of the layout");
    group_of_label.push_back(static_cast<int>(it - grouping.groups.begin()));
  }
  const auto win = static_cast<std::size_t>(std::llround(params.window_s * signal.sample_rate_hz));
  if (signal.size() < win || win == 0) throw ParamError("signal shorter than one snooping window");
  const std::size_t stride = params.stride_samples ? params.stride_samples : params.chunk.S;
  const auto [lo, hi] = params.carrier_band;
  if (signal.sample_rate_hz < 2.0 * hi) throw ParamError("sample rate too low for the carrier band");

  const auto env = am_demodulate(signal, lo, hi);
  SnoopResult r;
  SampledSignal window{std::vector<double>(win), env.sample_rate_hz};
  for (std::size_t off = 0; off + win <= env.size(); off += stride) {
    std::copy_n(env.samples.begin() + static_cast<std::ptrdiff_t>(off), win, window.samples.begin());
    int label = -1;
    try {
      const auto trace = trace_from_envelope(window, params.chunk);
      label = group_of_label[static_cast<std::size_t>(predict(model, features(trace)))];
    } catch (const Error&) {
    }
    r.window_labels.push_back(label);
  }
  r.emitted = runlength_filter(r.window_labels, grouping.groups, params.runlen_min);
  return r;
}

// ---- text extraction ----------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> char_segment_map(const CharLayout& layout,
                                                                  const ScreenProfile& profile,
                                                                  std::size_t trace_len) {
  layout.validate(profile);
  const double h = profile.height_px;
  const double span = (1.0 - profile.blanking_fraction) * static_cast<double>(trace_len);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [r0, r1] : layout.slot_row_ranges) {
    if (r0 < 0 || r1 > profile.height_px || r1 <= r0) throw ParamError("slot rows outside the screen");
    out.emplace_back(static_cast<std::size_t>(std::lround(r0 / h * span)),
                     static_cast<std::size_t>(std::lround(r1 / h * span)));
  }
  return out;
}

std::vector<std::vector<double>> TextFeatures::slots(std::span<const double> aligned) const {
  std::vector<std::vector<double>> out;
  for (const auto& [a, b] : segments) {
    if (b > aligned.size()) throw ParamError("segment beyond the trace");
    out.push_back(pool(aligned.subspan(a, b - a), pool_factor));
  }
  return out;
}

std::size_t TextFeatures::slot_pitch() const {
  if (segments.empty()) throw ParamError("no character segments");
  if (segments.size() == 1) return segments.front().second - segments.front().first;
  return (segments.back().first - segments.front().first) / (segments.size() - 1);
}

std::vector<std::vector<double>> TextFeatures::operator()(const OutputTrace& trace) const {
  return slots(aligner.align(trace.values));
}

std::vector<std::vector<double>> TextFeatures::known(const OutputTrace& trace,
                                                     std::span<const double> frame_envelope) const {
  if (trace.values.size() < frame_envelope.size()) throw ParamError("trace shorter than the frame envelope");
  const auto q = std::span(trace.values).first(frame_envelope.size());
  const auto s = max_corr_shift(q, frame_envelope).shift;
  return slots(rotate(q, static_cast<std::ptrdiff_t>(s)));
}

std::vector<std::vector<double>> TextFeatures::candidate_traces(const OutputTrace& trace) const {
  const auto n = static_cast<std::ptrdiff_t>(aligner.len());
  const auto base = static_cast<std::ptrdiff_t>(aligner.shift_of(trace.values));
  const auto pitch = static_cast<std::ptrdiff_t>(slot_pitch());
  const auto q = std::span(trace.values).first(aligner.len());
  std::vector<std::vector<double>> out;
  out.push_back(rotate(q, base));
  for (int k = 1; k <= candidate_span; ++k) {
    for (int sign : {-1, 1}) out.push_back(rotate(q, ((base + sign * k * pitch) % n + n) % n));
  }
  return out;
}

std::vector<std::vector<std::vector<double>>> TextFeatures::candidates(const OutputTrace& trace) const {
  std::vector<std::vector<std::vector<double>>> out;
  for (const auto& aligned : candidate_traces(trace)) out.push_back(slots(aligned));
  return out;
}

std::vector<std::string> text_slot_labels() {
  std::vector<std::string> out;
  for (char c = 'A'; c <= 'Z'; ++c) out.emplace_back(1, c);
  out.emplace_back(kBlankLabel);
  return out;
}

PredictionList rank_words(const std::vector<std::vector<double>>& lp, const std::vector<std::string>& dictionary,
                          std::size_t top_k) {
  const std::size_t slots = lp.size();
  constexpr std::size_t kBlank = 26;
  for (const auto& row : lp) {
    if (row.size() != 27) throw ParamError("slot models must cover A-Z plus the empty class");
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(dictionary.size());
  for (std::size_t w = 0; w < dictionary.size(); ++w) {
    const auto& word = dictionary[w];
    if (word.empty()) continue;
    double s = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < slots; ++i) {
      if (i < word.size()) {
        const char c = word[i];
        if (c < 'a' || c > 'z') {
          ok = false;
          break;
        }
        s += lp[i][static_cast<std::size_t>(c - 'a')];
      } else {
        s += lp[i][kBlank];
      }
    }
    if (ok && std::isfinite(s)) scored.emplace_back(s, w);
  }
  auto better = [&](const std::pair<double, std::size_t>& a, const std::pair<double, std::size_t>& b) {
    if (a.first != b.first) return a.first > b.first;
    return dictionary[a.second] < dictionary[b.second];
  };
  const std::size_t k = std::min(top_k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
  PredictionList out;
  for (std::size_t i = 0; i < k; ++i) out.candidates.emplace_back(dictionary[scored[i].second], scored[i].first);
  return out;
}

std::vector<std::vector<double>> slot_log_probs(const std::vector<Model>& slot_models,
                                                const std::vector<std::vector<double>>& slot_features) {
  if (slot_models.size() != slot_features.size()) throw ParamError("one model per character slot is required");
  const auto all = text_slot_labels();
  std::vector<std::vector<double>> lp;
  for (std::size_t i = 0; i < slot_models.size(); ++i) {
    const auto p = predict_proba(slot_models[i], slot_features[i]);
    const auto& names = label_names(slot_models[i]);
    // classes a slot model never saw are impossible there
    std::vector<double> row(all.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto it = std::find(all.begin(), all.end(), names[c]);
      if (it == all.end()) throw ParamError("slot model label '" + names[c] + "' is not a letter or the empty class");
      row[static_cast<std::size_t>(it - all.begin())] = std::log(std::max(p[c], 1e-300));
    }
    lp.push_back(std::move(row));
  }
  return lp;
}

SlotDecode decode_slots(const OutputTrace& trace, const std::vector<Model>& slot_models,
                        const TextFeatures& features) {
  if (!(features.cycle_samples > 0.0)) throw ParamError("text features lack the screen timing");
  const auto traces = features.candidate_traces(trace);
  SlotDecode best;
  best.fit = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traces.size(); ++k) {
    auto lp = slot_log_probs(slot_models, features.slots(traces[k]));
    std::vector<int> labels;
    std::string text;
    for (const auto& row : lp) {
      const auto c = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      labels.push_back(c);
      text.push_back(c < 26 ? static_cast<char>('A' + c) : ' ');
    }
    const auto frame = render_text_frame(text, features.layout.char_width_px, features.layout, features.profile);
    const auto env =
        predicted_envelope(row_profile(frame), features.profile, traces[k].size(), features.cycle_samples);
    const double fit = pearson(traces[k], env);
    if (fit > best.fit) {
      best.fit = fit;
      best.candidate = k;
      best.log_probs = std::move(lp);
      best.labels = std::move(labels);
    }
  }
  return best;
}

PredictionList extract_text(const OutputTrace& trace, const std::vector<Model>& slot_models,
                            const std::vector<std::string>& dictionary, const TextFeatures& features,
                            std::size_t top_k) {
  if (slot_models.size() != features.segments.size()) throw ParamError("one model per character slot is required");
  // rank under every candidate rotation and keep each word's best score
  std::map<std::string, double> best;
  for (const auto& cand : features.candidates(trace)) {
    const auto list = rank_words(slot_log_probs(slot_models, cand), dictionary, top_k);
    for (const auto& [word, score] : list.candidates) {
      auto [it, fresh] = best.emplace(word, score);
      if (!fresh) it->second = std::max(it->second, score);
    }
  }
  std::vector<std::pair<std::string, double>> merged(best.begin(), best.end());
  std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (merged.size() > top_k) merged.resize(top_k);
  PredictionList out;
  out.candidates = std::move(merged);
  return out;
}

// ---- website / foreground distinguishing ------------------------------------

std::vector<double> harmonic_features(std::span<const double> trace, std::size_t harmonics) {
  if (trace.size() < 2 * harmonics + 2) throw ParamError("trace too short for the requested harmonics");
  const auto spec = fft::rfft(trace);
  std::vector<double> out(harmonics);
  const double scale = 1.0 / static_cast<double>(trace.size());
  for (std::size_t k = 1; k <= harmonics; ++k) out[k - 1] = std::abs(spec[k]) * scale;
  return out;
}

std::vector<double> voip_features(const SampledSignal& low_rate, double lo_hz, double hi_hz, std::size_t pool_bins) {
  if (pool_bins == 0) throw ParamError("pool_bins must be positive");
  const auto bf = band_features(low_rate, lo_hz, hi_hz).values;
  std::vector<double> out((bf.size() + pool_bins - 1) / pool_bins, 0.0);
  for (std::size_t i = 0; i < bf.size(); ++i) out[i / pool_bins] += bf[i] * bf[i];
  for (double& v : out) v = std::log(v + 1e-300);
  return out;
}

std::optional<Confident> distinguish(std::span<const double> features, const Model& model,
                                     std::optional<double> threshold) {
  return predict_confident(model, features, threshold.value_or(0.0));
}

// ---- layout serialization -----------------------------------------------------

KeyValues keyboard_layout_to_kv(const KeyboardLayout& layout) {
  KeyValues kv;
  kv["orientation"] = layout.orientation == Orientation::kPortrait ? "portrait" : "landscape";
  kv["screen_width_px"] = std::to_string(layout.screen.width_px);
  kv["screen_height_px"] = std::to_string(layout.screen.height_px);
  kv["refresh_rate_hz"] = fmt(layout.screen.refresh_rate_hz);
  kv["carrier_hz"] = fmt(layout.screen.carrier_hz);
  kv["blanking_fraction"] = fmt(layout.screen.blanking_fraction);
  for (const auto& [k, r] : layout.keys) {
    kv["key_" + key_name(k)] = std::to_string(r.row_start) + "," + std::to_string(r.row_end) + "," +
                               std::to_string(r.col_start) + "," + std::to_string(r.col_end);
  }
  return kv;
}

KeyboardLayout keyboard_layout_from_kv(const KeyValues& kv) {
  KeyboardLayout layout;
  const auto& o = require(kv, "orientation");
  if (o == "portrait") {
    layout.orientation = Orientation::kPortrait;
  } else if (o == "landscape") {
    layout.orientation = Orientation::kLandscape;
  } else {
    throw FormatError("bad orientation '" + o + "'");
  }
  layout.screen.width_px = static_cast<int>(to_double(require(kv, "screen_width_px")));
  layout.screen.height_px = static_cast<int>(to_double(require(kv, "screen_height_px")));
  layout.screen.refresh_rate_hz = to_double(require(kv, "refresh_rate_hz"));
  layout.screen.carrier_hz = to_double(require(kv, "carrier_hz"));
  layout.screen.blanking_fraction = to_double(require(kv, "blanking_fraction"));
  for (const auto& [key, value] : kv) {
    if (key.rfind("key_", 0) != 0) continue;
    const auto v = parse_ints(value);
    if (v.size() != 4) throw FormatError("key rectangle needs 4 integers: " + key);
    layout.keys[key_from_name(key.substr(4))] = {v[0], v[1], v[2], v[3]};
  }
  layout.validate();
  return layout;
}

KeyValues char_layout_to_kv(const CharLayout& layout) {
  KeyValues kv;
  kv["slot_count"] = std::to_string(layout.slot_count);
  kv["char_width_px"] = std::to_string(layout.char_width_px);
  for (std::size_t i = 0; i < layout.slot_row_ranges.size(); ++i) {
    kv["slot_" + std::to_string(i)] =
        std::to_string(layout.slot_row_ranges[i].first) + "," + std::to_string(layout.slot_row_ranges[i].second);
  }
  return kv;
}

CharLayout char_layout_from_kv(const KeyValues& kv) {
  CharLayout layout;
  layout.slot_count = static_cast<int>(to_double(require(kv, "slot_count")));
  layout.char_width_px = static_cast<int>(to_double(require(kv, "char_width_px")));
  for (int i = 0; i < layout.slot_count; ++i) {
    const auto v = parse_ints(require(kv, "slot_" + std::to_string(i)));
    if (v.size() != 2) throw FormatError("slot range needs 2 integers");
    layout.slot_row_ranges.emplace_back(v[0], v[1]);
  }
  return layout;
}

}  // namespace screenleak
