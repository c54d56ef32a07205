#include "screenleak/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"

namespace screenleak {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

bool is_lower_word(const std::string& w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

std::vector<double> plain_average(const ChunkSet& cs) {
  std::vector<double> avg(cs.chunk_len(), 0.0);
  for (const auto& c : cs.chunks) {
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += c[i];
  }
  for (double& v : avg) v /= static_cast<double>(cs.size());
  return avg;
}

}  // namespace

LabeledDataset drop_empty_classes(const LabeledDataset& data) {
  std::vector<int> remap(data.label_names.size(), -1);
  for (const auto& it : data.items) remap[static_cast<std::size_t>(it.label)] = 0;
  LabeledDataset out;
  out.feature_len = data.feature_len;
  for (std::size_t c = 0; c < remap.size(); ++c) {
    if (remap[c] < 0) continue;
    remap[c] = static_cast<int>(out.label_names.size());
    out.label_names.push_back(data.label_names[c]);
  }
  out.items = data.items;
  for (auto& it : out.items) it.label = remap[static_cast<std::size_t>(it.label)];
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(base) ^ a) ^ b);
}

Rig make_rig(const ScreenProfile& profile, const ScreenFingerprint& fingerprint, std::optional<double> snr_db,
             double sample_rate_hz) {
  Rig rig;
  rig.profile = profile;
  rig.fingerprint = fingerprint;
  rig.sim.noise_snr_db = snr_db;
  rig.sample_rate_hz = sample_rate_hz;
  rig.chunk.S = nominal_cycle_samples(profile, fingerprint, sample_rate_hz);
  return rig;
}

double cycle_samples(const Rig& rig) {
  return rig.sample_rate_hz / (rig.profile.refresh_rate_hz + rig.fingerprint.refresh_offset_hz);
}

SampledSignal record(const Rig& rig, const std::vector<RowIntensityProfile>& rows, const FrameSchedule& schedule,
                     double duration_s, std::uint64_t seed) {
  SimParams sp = rig.sim;
  sp.seed = seed;
  auto out = simulate_profiles(rig.profile, rig.fingerprint, rows, schedule, duration_s, sp, rig.sample_rate_hz);
  if (!rig.channel) return std::move(out.signal);
  ChannelParams ch = *rig.channel;
  ch.seed = derive_seed(seed, 0xc4a7);
  return apply_channel(out.signal, ch, rig.profile);
}

OutputTrace capture(const Rig& rig, const RowIntensityProfile& rows, double duration_s, std::uint64_t seed) {
  return preprocess(record(rig, {rows}, {}, duration_s, seed), rig.chunk, rig.carrier_band);
}

// ---- keyboard -----------------------------------------------------------------

KeyboardSetup make_keyboard_setup(const Rig& rig, Orientation orientation, std::uint64_t seed) {
  KeyboardSetup s;
  s.layout = make_phone_keyboard(rig.profile, orientation);
  s.grouping = build_grouping(s.layout);
  const auto idle = render_keyboard_frame(s.layout);
  s.idle_rows = row_profile(idle);
  for (const auto& [key, rect] : s.layout.keys) s.key_rows[key] = row_profile(render_keyboard_frame(s.layout, key));
  const auto cal = capture(rig, s.idle_rows, 1.0, derive_seed(seed, 0xca1));
  s.features.aligner = calibrate_aligner(cal, idle, rig.profile, rig.chunk.S - rig.chunk.d, cycle_samples(rig));
  return s;
}

LabeledDataset keyboard_dataset(const Rig& rig, const KeyboardSetup& setup, std::size_t per_key, double trace_s,
                                std::uint64_t seed) {
  LabeledDataset ds;
  ds.label_names = setup.grouping.groups;
  for (const auto& [key, rows] : setup.key_rows) {
    const int label = setup.grouping.group_of(key);
    for (std::size_t i = 0; i < per_key; ++i) {
      try {
        const auto trace = capture(rig, rows, trace_s, derive_seed(seed, static_cast<unsigned char>(key), i));
        ds.add(setup.features(trace), label);
      } catch (const Error&) {
        // a failed capture is simply missing from the training data
      }
    }
  }
  return ds;
}

SampledSignal simulate_typing(const Rig& rig, const KeyboardSetup& setup, const std::string& word, double dwell_s,
                              std::uint64_t seed) {
  if (word.empty()) throw ParamError("nothing to type");
  std::vector<RowIntensityProfile> rows;
  FrameSchedule schedule;
  for (std::size_t i = 0; i < word.size(); ++i) {
    const auto it = setup.key_rows.find(word[i]);
    if (it == setup.key_rows.end()) throw ParamError(std::string("no key for '") + word[i] + "'");
    rows.push_back(it->second);
    schedule.push_back({static_cast<double>(i) * dwell_s, i});
  }
  return record(rig, rows, schedule, static_cast<double>(word.size()) * dwell_s, seed);
}

std::vector<WordTrial> keyboard_word_trials(const Rig& rig, const KeyboardSetup& setup, const Model& model,
                                            const std::vector<std::string>& words,
                                            const std::vector<std::string>& dictionary, double dwell_s,
                                            std::size_t runlen_min, std::uint64_t seed) {
  SnoopParams sp;
  sp.runlen_min = runlen_min;
  sp.chunk = rig.chunk;
  sp.carrier_band = rig.carrier_band;
  std::vector<WordTrial> out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    WordTrial t;
    t.word = words[i];
    const auto signal = simulate_typing(rig, setup, t.word, dwell_s, derive_seed(seed, i));
    t.observed = snoop_stream(signal, model, setup.grouping, setup.features, sp).emitted;
    const auto list = match_dictionary(t.observed, dictionary, setup.grouping);
    t.list_size = list.candidates.size();
    t.hit = list.rank_of(t.word).has_value();
    out.push_back(std::move(t));
  }
  return out;
}

// ---- text -----------------------------------------------------------------------

TextSetup make_text_setup(const Rig& rig, std::uint64_t seed) {
  TextSetup s;
  s.layout = make_char_layout(rig.profile);
  const std::string cal_text(static_cast<std::size_t>(s.layout.slot_count), 'A');
  const auto frame = render_text_frame(cal_text, s.layout.char_width_px, s.layout, rig.profile);
  const auto cal = capture(rig, row_profile(frame), 1.0, derive_seed(seed, 0xca1));
  const std::size_t len = rig.chunk.S - rig.chunk.d;
  s.features.aligner = calibrate_aligner(cal, frame, rig.profile, len, cycle_samples(rig));
  s.features.segments = char_segment_map(s.layout, rig.profile, len);
  s.features.layout = s.layout;
  s.features.profile = rig.profile;
  s.features.cycle_samples = cycle_samples(rig);
  return s;
}

OutputTrace capture_text(const Rig& rig, const TextSetup& setup, const std::string& text, double trace_s,
                         std::uint64_t seed) {
  const auto frame = render_text_frame(upper(text), setup.layout.char_width_px, setup.layout, rig.profile);
  return capture(rig, row_profile(frame), trace_s, seed);
}

namespace {

/// Random uppercase strings; length 6 for half of them so the last slots see enough letters.
std::vector<std::string> random_texts(std::size_t count, std::size_t slots, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> short_len(3, slots - 1);
  std::uniform_int_distribution<int> letter('A', 'Z');
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::string text(rng() % 2 ? slots : short_len(rng), ' ');
    for (char& c : text) c = static_cast<char>(letter(rng));
    out.push_back(std::move(text));
  }
  return out;
}

int slot_label(const std::string& text, std::size_t slot) { return slot < text.size() ? text[slot] - 'A' : 26; }

}  // namespace

std::vector<LabeledDataset> text_datasets(const Rig& rig, const TextSetup& setup, std::size_t count, double trace_s,
                                          std::uint64_t seed) {
  const auto slots = static_cast<std::size_t>(setup.layout.slot_count);
  std::vector<LabeledDataset> out(slots);
  for (auto& ds : out) ds.label_names = text_slot_labels();
  const auto texts = random_texts(count, slots, seed);
  const std::size_t len = setup.features.aligner.len();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto frame = render_text_frame(texts[i], setup.layout.char_width_px, setup.layout, rig.profile);
    const auto rows = row_profile(frame);
    try {
      const auto trace = capture(rig, rows, trace_s, derive_seed(seed, i));
      // training frames are known, so each trace is aligned onto its own frame
      const auto tmpl = predicted_envelope(rows, rig.profile, len, cycle_samples(rig));
      const auto per_slot = setup.features.known(trace, tmpl);
      for (std::size_t k = 0; k < slots; ++k) out[k].add(per_slot[k], slot_label(texts[i], k));
    } catch (const Error&) {
    }
  }
  for (auto& ds : out) ds = drop_empty_classes(ds);
  return out;
}

std::vector<double> text_slot_accuracy(const Rig& rig, const TextSetup& setup, const std::vector<Model>& slot_models,
                                       std::size_t count, double trace_s, std::uint64_t seed) {
  const auto slots = static_cast<std::size_t>(setup.layout.slot_count);
  std::vector<double> correct(slots, 0.0);
  const auto texts = random_texts(count, slots, seed);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      const auto dec = decode_slots(capture_text(rig, setup, texts[i], trace_s, derive_seed(seed, i)), slot_models,
                                    setup.features);
      for (std::size_t k = 0; k < slots; ++k) correct[k] += dec.labels[k] == slot_label(texts[i], k) ? 1.0 : 0.0;
    } catch (const Error&) {
    }
  }
  for (double& c : correct) c /= static_cast<double>(std::max<std::size_t>(1, count));
  return correct;
}

TextTrialSummary text_word_trials(const Rig& rig, const TextSetup& setup, const std::vector<Model>& slot_models,
                                  const std::vector<std::string>& words, const std::vector<std::string>& dictionary,
                                  double trace_s, std::uint64_t seed) {
  TextTrialSummary s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    ++s.words;
    try {
      const auto trace = capture_text(rig, setup, words[i], trace_s, derive_seed(seed, i));
      const auto list = extract_text(trace, slot_models, dictionary, setup.features, 5);
      const auto rank = list.rank_of(words[i]);
      if (rank && *rank == 1) ++s.top1;
      if (rank && *rank <= 5) ++s.top5;
    } catch (const Error&) {
    }
  }
  return s;
}

std::vector<std::string> pick_words(const std::vector<std::string>& pool, std::size_t per_length, std::uint64_t seed,
                                    std::size_t min_len, std::size_t max_len) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (std::size_t len = min_len; len <= max_len; ++len) {
    std::vector<std::string> bucket;
    for (const auto& w : pool) {
      if (w.size() == len && is_lower_word(w)) bucket.push_back(w);
    }
    if (bucket.size() < per_length) {
      throw ParamError("only " + std::to_string(bucket.size()) + " words of length " + std::to_string(len));
    }
    std::shuffle(bucket.begin(), bucket.end(), rng);
    out.insert(out.end(), bucket.begin(), bucket.begin() + static_cast<std::ptrdiff_t>(per_length));
  }
  return out;
}

// ---- websites, VoIP, cross-screen -------------------------------------------------

std::uint64_t page_seed(std::size_t cls) { return derive_seed(0x5173, cls); }

std::vector<std::string> website_labels(std::size_t classes) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < classes; ++c) out.push_back("site" + std::to_string(c));
  return out;
}

FrameImage website_frame(const ScreenProfile& screen, std::size_t cls, std::uint64_t item_seed, SiteContent content) {
  if (content == SiteContent::kDistinct) return render_website_frame(screen, page_seed(cls), item_seed);
  auto img = render_website_frame(screen, page_seed(0xfa111e), item_seed);
  std::mt19937_64 rng(page_seed(cls));
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int h = screen.height_px;
  const int w = screen.width_px;
  for (int i = 0; i < 2; ++i) {
    const int rh = uniform(h / 30, h / 8);
    const int cw = uniform(w / 6, w / 2);
    const int r0 = uniform(0, h - rh);
    const int c0 = uniform(0, w - cw);
    fill_rect(img, r0, r0 + rh, c0, c0 + cw, static_cast<std::uint8_t>(uniform(0, 255)));
  }
  return img;
}

LabeledDataset website_dataset(const Rig& rig, std::size_t classes, std::size_t per_class, double trace_s,
                               std::uint64_t seed, const std::string& screen_id, SiteContent content) {
  LabeledDataset ds;
  ds.label_names = website_labels(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    // failed captures are replaced, up to three attempts per requested trace
    std::size_t got = 0;
    for (std::size_t i = 0; got < per_class && i < 3 * per_class; ++i) {
      const auto item_seed = derive_seed(seed, c, i);
      const auto frame = website_frame(rig.profile, c, item_seed, content);
      try {
        const auto trace = capture(rig, row_profile(frame), trace_s, item_seed);
        ds.add(harmonic_features(trace.values), static_cast<int>(c), screen_id);
        ++got;
      } catch (const Error&) {
      }
    }
  }
  return ds;
}

std::vector<std::string> voip_labels() {
  auto out = website_labels(10);
  out.emplace_back("videochat");
  return out;
}

LabeledDataset voip_dataset(const Rig& rig, std::size_t per_class, double trace_s, std::uint64_t seed,
                            std::size_t pool_bins) {
  constexpr std::size_t kPages = 10;
  Rig low = rig;
  ChannelParams ch = rig.channel.value_or(ChannelParams{});
  ch.target_rate_hz = 44100.0;
  low.channel = ch;

  LabeledDataset ds;
  ds.label_names = voip_labels();
  const auto cycles = static_cast<std::size_t>(std::ceil(trace_s * rig.profile.refresh_rate_hz)) + 2;
  const auto h = static_cast<std::size_t>(rig.profile.height_px);
  for (std::size_t c = 0; c <= kPages; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const auto item_seed = derive_seed(seed, c, i);
      std::vector<RowIntensityProfile> rows;
      FrameSchedule schedule;
      if (c < kPages) {
        rows.push_back(row_profile(render_website_frame(rig.profile, page_seed(c), item_seed)));
      } else {
        // video call: smooth content that changes every refresh
        std::mt19937_64 rng(item_seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t k = 0; k < cycles; ++k) {
          RowIntensityProfile p;
          p.values.resize(h);
          double level = u(rng);
          for (std::size_t r = 0; r < h; ++r) {
            if (r % 50 == 0) level = std::clamp(level + 0.3 * (u(rng) - 0.5), 0.0, 1.0);
            p.values[r] = level;
          }
          rows.push_back(std::move(p));
          schedule.push_back({static_cast<double>(k) / rig.profile.refresh_rate_hz, k});
        }
      }
      const auto signal = record(low, rows, schedule, trace_s, item_seed);
      ds.add(voip_features(signal, 9000.0, 15000.0, pool_bins), static_cast<int>(c));
    }
  }
  return ds;
}

CrossScreenReport cross_screen(const CrossScreenParams& params, std::uint64_t seed) {
  const std::size_t m = params.fingerprint_seeds.size();
  if (m < 4) throw ParamError("cross-screen needs at least 4 fingerprints");
  if (params.quota == 0 || params.quota >= params.per_class) throw ParamError("quota must lie in [1, per_class)");

  CrossScreenReport rep;
  std::map<std::string, LabeledDataset> train;
  std::vector<LabeledDataset> test;
  ScreenProfile profile;
  for (std::size_t k = 0; k < m; ++k) {
    const auto name = "screen" + std::to_string(params.fingerprint_seeds[k]);
    rep.screens.push_back(name);
    auto rig = make_rig(profile, make_fingerprint(params.fingerprint_seeds[k]), params.snr_db);
    rig.chunk.T = params.T;
    const auto ds = website_dataset(rig, params.classes, params.per_class, params.trace_s, derive_seed(seed, k), name,
                                    params.content);
    const double test_fraction =
        1.0 - static_cast<double>(params.quota) / static_cast<double>(params.per_class);
    auto [tr, te] = split_dataset(ds, test_fraction, derive_seed(seed, k, 1));
    train[name] = std::move(tr);
    test.push_back(std::move(te));
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  TrainOptions opts;
  opts.seed = derive_seed(seed, 0x7a1);
  auto run = [&](const MixSpec& spec, std::size_t victim, std::uint64_t salt) {
    const auto collection = assemble_collection(train, spec, derive_seed(seed, salt, victim));
    return evaluate(train_softmax(collection, opts), test[victim]).accuracy;
  };

  // Spreads params.quota over the listed screens, the first ones taking the remainder.
  auto spread = [&](const std::vector<std::string>& screens) {
    MixSpec spec;
    for (std::size_t i = 0; i < screens.size(); ++i) {
      const std::size_t q = params.quota / screens.size() + (i < params.quota % screens.size() ? 1 : 0);
      if (q > 0) spec.per_screen_quota[screens[i]] = q;
    }
    return spec;
  };

  std::vector<double> self(m), minus(m), all(m);
  std::vector<std::vector<double>> single(m, std::vector<double>(m, nan));
  for (std::size_t v = 0; v < m; ++v) {
    self[v] = run(spread({rep.screens[v]}), v, 1);
    all[v] = run(spread(rep.screens), v, 2);
    auto others = rep.screens;
    others.erase(others.begin() + static_cast<std::ptrdiff_t>(v));
    minus[v] = run(spread(others), v, 3);
    for (std::size_t u = 0; u < m; ++u) {
      if (u != v) single[u][v] = run(spread({rep.screens[u]}), v, 4 + u);
    }
  }

  rep.matrix.emplace_back("self", self);
  for (std::size_t u = 0; u < m; ++u) rep.matrix.emplace_back("only_" + rep.screens[u], single[u]);
  rep.matrix.emplace_back("all_minus_victim", minus);
  rep.matrix.emplace_back("all", all);

  rep.self_mean = mean(self);
  rep.all_minus_victim_mean = mean(minus);
  double acc = 0.0;
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = 0; v < m; ++v) {
      if (u != v) acc += single[u][v];
    }
  }
  rep.single_foreign_mean = acc / static_cast<double>(m * (m - 1));
  return rep;
}

void write_cross_screen_csv(const CrossScreenReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "collection";
  for (const auto& s : report.screens) os << ',' << s;
  os << '\n';
  char buf[32];
  for (const auto& [name, row] : report.matrix) {
    os << name;
    for (double v : row) {
      if (std::isnan(v)) {
        os << ',';
      } else {
        std::snprintf(buf, sizeof buf, "%.6f", v);
        os << ',' << buf;
      }
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

// ---- channel experiments ---------------------------------------------------------

std::vector<DistancePoint> distance_sweep(const Rig& rig, const FrameImage& frame,
                                          const std::vector<double>& distances_cm, double trace_s,
                                          std::uint64_t seed) {
  const auto rows = row_profile(frame);
  std::vector<DistancePoint> out;
  for (std::size_t k = 0; k < distances_cm.size(); ++k) {
    Rig r = rig;
    ChannelParams ch = rig.channel.value_or(ChannelParams{});
    ch.distance_m = distances_cm[k] / 100.0;
    r.channel = ch;
    DistancePoint p{distances_cm[k], 0.0};
    try {
      const auto res = preprocess_detailed(record(r, {rows}, {}, trace_s, derive_seed(seed, k)), r.chunk,
                                           r.carrier_band);
      p.correlation = mean_chunk_correlation(res.kept);
    } catch (const Error&) {
      p.correlation = 0.0;
    }
    out.push_back(p);
  }
  return out;
}

std::size_t delay_shift(const Rig& rig, const FrameImage& frame, double distance_m, double trace_s,
                        std::uint64_t seed) {
  SimParams sp = rig.sim;
  sp.seed = seed;
  const auto sim = simulate_trace(rig.profile, rig.fingerprint, frame, trace_s, sp, rig.sample_rate_hz);
  ChannelParams ch = rig.channel.value_or(ChannelParams{});
  ch.seed = derive_seed(seed, 0xc4a7);
  auto at = [&](double d) {
    ch.distance_m = d;
    const auto env = am_demodulate(apply_channel(sim.signal, ch, rig.profile), rig.carrier_band.first,
                                   rig.carrier_band.second);
    // vsync-triggered averaging keeps the absolute phase that rotate-to-max discards
    std::vector<std::size_t> starts(sim.cycle_starts.begin() + 1, sim.cycle_starts.end());
    return plain_average(chunk_by_boundaries(env, starts));
  };
  const auto near = at(0.0);
  const auto far = at(distance_m);
  const std::size_t len = near.size();
  const std::size_t s = max_corr_shift(near, far).shift;
  return (len - s) % len;
}

}  // namespace screenleak
