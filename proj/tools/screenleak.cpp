// screenleak: batch drivers for the simulator and the attack pipeline.
//
// Exit codes: 0 success, 1 domain error, 2 usage error. Every subcommand writes its files,
// including run.meta, under --out-dir; stdout carries machine-readable results only.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "options.hpp"
#include "screenleak/attacks.hpp"
#include "screenleak/chunker.hpp"
#include "screenleak/classify.hpp"
#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"
#include "screenleak/experiments.hpp"
#include "screenleak/screen_sim.hpp"
#include "screenleak/trace_io.hpp"

using namespace screenleak;
using namespace screenleak::cli;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

std::vector<std::size_t> read_cycle_starts(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::size_t> out;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string index;
    std::string start;
    std::getline(ss, index, ',');
    std::getline(ss, start, ',');
    try {
      out.push_back(std::stoull(start));
    } catch (const std::exception&) {
      throw FormatError("bad cycle start line: " + line);
    }
  }
  return out;
}

Orientation parse_orientation(const std::string& s) {
  return s == "landscape" ? Orientation::kLandscape : Orientation::kPortrait;
}

std::vector<std::string> read_dictionary(const std::string& path) {
  auto words = read_wordlist(path);
  if (words.empty()) throw EmptyDictionaryError("dictionary " + path + " is empty");
  return words;
}

// ---- gen-pattern ------------------------------------------------------------

struct GenPattern {
  CommonOpts common;
  ScreenOpts screen;
  std::optional<int> zebra;
  bool sinusoidal = false;
  bool punctured = false;
  bool keyboard = false;
  std::string orientation = "portrait";
  std::optional<char> pressed;
  std::optional<std::string> text;
  int char_width = 150;
  int slots = 6;
  std::optional<std::uint64_t> website;
  std::optional<std::uint64_t> dynamic_seed;
  std::string output = "pattern.pgm";

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    auto* z = app->add_option("--zebra", zebra, "Zebra of this period in rows");
    app->add_flag("--sinusoidal", sinusoidal, "Sinusoidal instead of square stripes");
    app->add_flag("--punctured", punctured, "Black full-width band over the middle third");
    auto* k = app->add_flag("--keyboard", keyboard, "On-screen keyboard");
    app->add_option("--orientation", orientation)->check(CLI::IsMember({"portrait", "landscape"}));
    app->add_option("--pressed", pressed, "Pressed key (space is ' ')");
    auto* t = app->add_option("--text", text, "Uppercase text, one letter per slot");
    app->add_option("--char-width", char_width, "Rows per character slot");
    app->add_option("--slots", slots, "Character slots");
    auto* w = app->add_option("--website", website, "Synthetic web page with this page seed");
    app->add_option("--dynamic-seed", dynamic_seed, "Repaints the page's dynamic block");
    app->add_option("--output", output, "PGM file name inside --out-dir");
    z->excludes(k)->excludes(t)->excludes(w);
    k->excludes(t)->excludes(w);
    t->excludes(w);
  }

  void run() {
    const auto profile = screen.profile();
    FrameImage frame;
    if (zebra) {
      frame = gen_zebra_frame(profile, *zebra, sinusoidal ? ZebraKind::kSinusoidal : ZebraKind::kSquare, punctured);
    } else if (keyboard) {
      const auto layout = make_phone_keyboard(profile, parse_orientation(orientation));
      frame = render_keyboard_frame(layout, pressed);
      write_config_file(keyboard_layout_to_kv(layout), common.out("layout.kv"));
    } else if (text) {
      const auto layout = make_char_layout(profile, slots, char_width);
      frame = render_text_frame(*text, char_width, layout, profile);
      write_config_file(char_layout_to_kv(layout), common.out("layout.kv"));
    } else if (website) {
      frame = render_website_frame(profile, *website, dynamic_seed);
    } else {
      throw UsageError("one of --zebra, --keyboard, --text, --website is required");
    }
    write_pgm(frame, common.out(output));
    std::cout << (common.out_dir / output).string() << '\n';
  }
};

// ---- simulate ---------------------------------------------------------------

struct Simulate {
  CommonOpts common;
  ScreenOpts screen;
  std::vector<std::string> frames;
  std::vector<std::string> schedule;
  double seconds = 5.0;
  double snr_db = 20.0;
  bool no_noise = false;
  SimParams sim;
  double distance_m = 0.0;
  std::optional<double> lowpass_hz;
  std::optional<double> target_rate;
  std::optional<double> speech_db;
  std::optional<double> noise_floor_db;
  std::string output = "trace.wav";

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    app->add_option("--frame", frames, "PGM frame(s); frame i is id i in --schedule")->required()->delimiter(',');
    app->add_option("--schedule", schedule, "start_s:frame_id entries")->delimiter(',');
    app->add_option("--seconds", seconds, "Duration")->check(CLI::PositiveNumber);
    app->add_option("--snr-db", snr_db, "Carrier-to-noise ratio");
    app->add_flag("--no-noise", no_noise, "Disable additive noise");
    app->add_option("--jitter", sim.jitter_w_prob, "Probability of a W+1 cycle");
    app->add_option("--abnormal-prob", sim.abnormal_prob, "Probability of an abnormal cycle");
    app->add_option("--baseband-gain", sim.baseband_gain);
    app->add_option("--carrier-amp", sim.carrier_amp);
    app->add_option("--am-depth", sim.am_depth);
    app->add_option("--distance-m", distance_m, "Microphone distance");
    app->add_option("--lowpass-hz", lowpass_hz);
    app->add_option("--target-rate", target_rate, "Resample the recording, e.g. 44100 for VoIP");
    app->add_option("--speech-db", speech_db, "Speech-band interference level (dBFS)");
    app->add_option("--noise-floor-db", noise_floor_db, "Ambient noise level (dBFS)");
    app->add_option("--output", output, "WAV file name inside --out-dir");
  }

  void run() {
    const std::uint64_t seed = common.require_seed();
    std::vector<FrameImage> images;
    for (const auto& f : frames) images.push_back(read_pgm(f));
    auto s = screen;
    s.height = images.front().height_px;
    s.width = images.front().width_px;
    FrameSchedule sched;
    for (const auto& e : schedule) {
      const auto colon = e.find(':');
      if (colon == std::string::npos) throw UsageError("schedule entry '" + e + "' is not start_s:frame_id");
      sched.push_back({std::stod(e.substr(0, colon)), std::stoul(e.substr(colon + 1))});
    }
    SimParams sp = sim;
    sp.seed = seed;
    sp.noise_snr_db = no_noise ? std::nullopt : std::optional<double>(snr_db);
    const auto profile = s.profile();
    const auto out = simulate_trace(profile, s.fingerprint(), images, sched, seconds, sp, s.rate_hz);

    ChannelParams ch;
    ch.distance_m = distance_m;
    ch.lowpass_hz = lowpass_hz;
    ch.target_rate_hz = target_rate;
    ch.speech_interference_db = speech_db;
    ch.noise_floor_db = noise_floor_db;
    ch.seed = derive_seed(seed, 0xc4a7);
    write_wav(apply_channel(out.signal, ch, profile), common.out(output));

    auto os = open_out(common.out("cycle_starts.csv"));
    os << "cycle,start_sample,frame\n";
    for (std::size_t i = 0; i < out.cycle_starts.size(); ++i) {
      os << i << ',' << out.cycle_starts[i] << ',' << out.frame_schedule[i] << '\n';
    }
    std::cout << "nominal_w=" << out.nominal_w << "\tcycles=" << out.cycle_starts.size() << '\n';
  }
};

// ---- preprocess -------------------------------------------------------------

struct Preprocess {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  std::string input;
  std::string output = "trace.csv";

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    app->add_option("--input", input, "WAV recording")->required();
    app->add_option("--output", output, "OutputTrace file name inside --out-dir");
  }

  void run() {
    const auto signal = read_wav(input);
    const auto res = preprocess_detailed(signal, chunk.params(screen, signal.sample_rate_hz), chunk.band());
    write_output_trace(res.trace, common.out(output));
    auto os = open_out(common.out("chunks.csv"));
    os << "chunk,boundary,correlation,kept\n";
    std::size_t k = 0;
    for (std::size_t i = 0; i < res.chunks.size(); ++i) {
      const bool kept = k < res.kept.size() && res.kept.boundaries[k] == res.chunks.boundaries[i];
      if (kept) ++k;
      os << i << ',' << res.chunks.boundaries[i] << ',' << num(res.chunks.correlations[i]) << ',' << kept << '\n';
    }
    std::cout << "chunks=" << res.chunks.size() << "\tkept=" << res.kept.size()
              << "\tsync_iterations=" << res.chunks.sync_iterations << '\n';
  }
};

// ---- find-s -----------------------------------------------------------------

struct FindS {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  std::vector<std::string> inputs;
  std::size_t lo = 0;
  std::size_t hi = 0;

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    app->add_option("--input", inputs, "WAV recordings")->required()->delimiter(',');
    app->add_option("--lo", lo, "First candidate S (0: nominal - 8)");
    app->add_option("--hi", hi, "Last candidate S (0: nominal + 8)");
  }

  void run() {
    std::vector<SampledSignal> envs;
    for (const auto& p : inputs) envs.push_back(am_demodulate(read_wav(p), chunk.band_lo, chunk.band_hi));
    const auto nominal = static_cast<std::size_t>(envs.front().sample_rate_hz / screen.refresh_hz);
    const std::size_t first = lo ? lo : nominal - 8;
    const std::size_t last = hi ? hi : nominal + 8;
    const auto s = find_s(envs, {first, last}, chunk.d, chunk.T);
    write_config_file({{"S", std::to_string(s)}}, common.out("find_s.txt"));
    std::cout << "S=" << s << '\n';
  }
};

// ---- chunk-compare ----------------------------------------------------------

struct ChunkCompare {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  std::string input;

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    app->add_option("--input", input, "WAV recording")->required();
  }

  void run() {
    const auto signal = read_wav(input);
    const auto env = am_demodulate(signal, chunk.band_lo, chunk.band_hi);
    const auto ours = chunkify(env, chunk.params(screen, signal.sample_rate_hz));
    const auto base = baseline_chunkify(env, screen.refresh_hz);
    auto os = open_out(common.out("chunk_compare.csv"));
    os << "method,chunks,mean_correlation\n";
    os << "chunkify," << ours.size() << ',' << num(mean_chunk_correlation(ours)) << '\n';
    os << "baseline," << base.size() << ',' << num(mean_chunk_correlation(base)) << '\n';
    std::cout << "chunkify\t" << num(mean_chunk_correlation(ours)) << "\nbaseline\t"
              << num(mean_chunk_correlation(base)) << '\n';
  }
};

// ---- train / eval -----------------------------------------------------------

struct Dataset {
  LabeledDataset data;
  std::vector<std::string> labels;
};

Dataset load_dataset(const std::string& manifest_path, const FeatureExtractor& fx) {
  const auto manifest = read_manifest(manifest_path);
  Dataset d;
  d.labels = manifest_labels(manifest);
  d.data.label_names = d.labels;
  std::map<std::string, int> id;
  for (std::size_t i = 0; i < d.labels.size(); ++i) id[d.labels[i]] = static_cast<int>(i);
  for (const auto& e : manifest.entries) {
    d.data.add(fx(resolve(manifest_path, e.trace_path)), id.at(e.label), e.screen_id);
    std::cerr << '.' << std::flush;
  }
  std::cerr << '\n';
  return d;
}

struct Train {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  FeatureOpts features;
  std::string manifest;
  std::string model_kind = "softmax";
  TrainOptions train;
  std::string output = "model.txt";

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    features.add(app);
    app->add_option("--manifest", manifest, "Dataset manifest")->required();
    app->add_option("--model", model_kind, "softmax | centroid")->check(CLI::IsMember({"softmax", "centroid"}));
    app->add_option("--epochs", train.epochs);
    app->add_option("--learn-rate", train.learn_rate);
    app->add_option("--l2", train.l2);
    app->add_option("--output", output, "Model file name inside --out-dir (text: one file per slot)");
  }

  void run() {
    const FeatureExtractor fx(features, screen, chunk);
    if (model_kind == "softmax") train.seed = common.require_seed();
    if (features.kind == "text") {
      run_text(fx);
      return;
    }
    const auto d = load_dataset(manifest, fx);
    const Model model = model_kind == "softmax" ? Model(train_softmax(d.data, train)) : Model(train_centroid(d.data));
    save_model(model, common.out(output));
    std::cout << "items=" << d.data.size() << "\tclasses=" << d.labels.size() << '\n';
  }

  // Labels are the displayed strings; every slot gets its own model.
  void run_text(const FeatureExtractor& fx) {
    const auto m = read_manifest(manifest);
    const auto& tf = fx.text();
    const auto slots = static_cast<std::size_t>(fx.char_layout().slot_count);
    std::vector<LabeledDataset> sets(slots);
    for (auto& s : sets) s.label_names = text_slot_labels();
    for (const auto& e : m.entries) {
      std::string text = e.label;
      std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::toupper(c); });
      const auto frame = render_text_frame(text, fx.char_layout().char_width_px, fx.char_layout(), fx.profile());
      const auto trace = fx.trace(resolve(manifest, e.trace_path));
      const auto tmpl = predicted_envelope(row_profile(frame), fx.profile(), tf.aligner.len(), tf.cycle_samples);
      const auto per_slot = tf.known(trace, tmpl);
      for (std::size_t k = 0; k < slots; ++k) {
        const int label = k < text.size() && text[k] != ' ' ? text[k] - 'A' : 26;
        sets[k].add(per_slot[k], label, e.screen_id);
      }
    }
    const auto stem = std::filesystem::path(output).stem().string();
    for (std::size_t k = 0; k < slots; ++k) {
      const auto ds = drop_empty_classes(sets[k]);
      const Model model = model_kind == "softmax" ? Model(train_softmax(ds, train)) : Model(train_centroid(ds));
      save_model(model, common.out(stem + "_slot" + std::to_string(k) + ".txt"));
    }
    std::cout << "items=" << m.entries.size() << "\tslots=" << slots << '\n';
  }
};

struct Eval {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  FeatureOpts features;
  std::string manifest;
  std::string model_path;
  std::optional<double> threshold;

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    features.add(app);
    app->add_option("--manifest", manifest, "Dataset manifest")->required();
    app->add_option("--model", model_path, "Model file")->required();
    app->add_option("--threshold", threshold, "Confidence threshold")->check(CLI::Range(0.0, 1.0));
  }

  void run() {
    const FeatureExtractor fx(features, screen, chunk);
    const auto model = load_model(model_path);
    const auto d = load_dataset(manifest, fx);
    // map manifest labels onto the model's label ids
    const auto& names = label_names(model);
    LabeledDataset data;
    data.label_names = names;
    for (const auto& item : d.data.items) {
      const auto& name = d.labels[static_cast<std::size_t>(item.label)];
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw ParamError("label '" + name + "' is unknown to the model");
      data.add(item.features, static_cast<int>(it - names.begin()), item.screen_id);
    }
    const auto report = evaluate(model, data, threshold);
    write_eval_report(report, names, common.out("eval.csv"));
    std::cout << "accuracy=" << num(report.accuracy);
    if (report.thresholded) {
      std::cout << "\tprecision=" << num(report.thresholded->precision)
                << "\trecall=" << num(report.thresholded->recall);
    }
    std::cout << '\n';
  }
};

// ---- snoop / extract-text / distinguish ---------------------------------------

struct Snoop {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  FeatureOpts features;
  std::string input;
  std::string model_path;
  std::string dictionary;
  SnoopParams params;

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    features.add(app);
    features.kind = "keyboard";
    chunk.T = 0.6;
    app->add_option("--input", input, "WAV recording of the typing session")->required();
    app->add_option("--model", model_path, "Keyboard model")->required();
    app->add_option("--dictionary", dictionary, "Word list for disambiguation");
    app->add_option("--window-s", params.window_s);
    app->add_option("--stride", params.stride_samples, "Window advance in samples (0: one cycle)");
    app->add_option("--runlen-min", params.runlen_min, "35 for clean, 15 for noisy recordings");
  }

  void run() {
    const FeatureExtractor fx(features, screen, chunk);
    const auto signal = read_wav(input);
    SnoopParams p = params;
    p.chunk = chunk.params(screen, signal.sample_rate_hz);
    p.carrier_band = chunk.band();
    const auto grouping = build_grouping(fx.keyboard_layout());
    const auto res = snoop_stream(signal, load_model(model_path), grouping, fx.keyboard(), p);
    auto os = open_out(common.out("observed.txt"));
    for (const auto& g : res.emitted) {
      os << g << '\n';
      std::cout << g << (&g == &res.emitted.back() ? "\n" : " ");
    }
    if (res.emitted.empty()) std::cout << '\n';
    if (!dictionary.empty()) {
      auto list = match_dictionary(res.emitted, read_dictionary(dictionary), grouping);
      list.query_trace_id = input;
      write_prediction_list(list, common.out("predictions.tsv"));
      std::cerr << list.candidates.size() << " candidate words\n";
    }
  }
};

struct ExtractText {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  FeatureOpts features;
  std::string input;
  std::vector<std::string> models;
  std::string dictionary;
  std::size_t top_k = 100;

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    features.add(app);
    features.kind = "text";
    chunk.T = 0.6;
    app->add_option("--input", input, "WAV recording or OutputTrace")->required();
    app->add_option("--models", models, "Per-slot models, slot 0 first")->required()->delimiter(',');
    app->add_option("--dictionary", dictionary, "Word list")->required();
    app->add_option("--top-k", top_k);
  }

  void run() {
    const FeatureExtractor fx(features, screen, chunk);
    std::vector<Model> slot_models;
    for (const auto& m : models) slot_models.push_back(load_model(m));
    auto list = extract_text(fx.trace(input), slot_models, read_dictionary(dictionary), fx.text(), top_k);
    list.query_trace_id = input;
    write_prediction_list(list, common.out("predictions.tsv"));
    for (std::size_t i = 0; i < std::min<std::size_t>(5, list.candidates.size()); ++i) {
      std::cout << i + 1 << '\t' << list.candidates[i].first << '\t' << num(list.candidates[i].second) << '\n';
    }
  }
};

struct Distinguish {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  FeatureOpts features;
  std::string input;
  std::string model_path;
  std::optional<double> threshold;

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    features.add(app);
    features.kind = "harmonics";
    app->add_option("--input", input, "WAV recording or OutputTrace")->required();
    app->add_option("--model", model_path, "Model file")->required();
    app->add_option("--threshold", threshold, "Drop predictions below this confidence")->check(CLI::Range(0.0, 1.0));
  }

  void run() {
    const FeatureExtractor fx(features, screen, chunk);
    const auto model = load_model(model_path);
    const auto r = distinguish(fx(input), model, threshold);
    auto os = open_out(common.out("distinguish.tsv"));
    os << "label\tconfidence\n";
    if (r) {
      const auto& name = label_names(model)[static_cast<std::size_t>(r->label)];
      os << name << '\t' << num(r->confidence) << '\n';
      std::cout << name << '\t' << num(r->confidence) << '\n';
    } else {
      os << "none\t\n";
      std::cout << "none\n";
    }
  }
};

// ---- corr-test / spectrogram -------------------------------------------------

struct CorrTest {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  std::string input;
  std::string vsync;

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    app->add_option("--input", input, "WAV recording")->required();
    app->add_option("--vsync", vsync, "cycle_starts.csv; chops at these instead of chunkify");
  }

  void run() {
    const auto signal = read_wav(input);
    double corr = 0.0;
    std::size_t chunks = 0;
    if (!vsync.empty()) {
      const auto starts = read_cycle_starts(vsync);
      const std::vector<std::size_t> inner(starts.begin() + (starts.size() > 1 ? 1 : 0), starts.end());
      const auto cs = chunk_by_boundaries(am_demodulate(signal, chunk.band_lo, chunk.band_hi), inner);
      corr = mean_chunk_correlation(cs);
      chunks = cs.size();
    } else {
      const auto res = preprocess_detailed(signal, chunk.params(screen, signal.sample_rate_hz), chunk.band());
      corr = mean_chunk_correlation(res.kept);
      chunks = res.kept.size();
    }
    write_config_file({{"chunks", std::to_string(chunks)}, {"mean_chunk_correlation", num(corr)}},
                      common.out("corr_test.txt"));
    std::cout << "mean_chunk_correlation=" << num(corr) << "\tchunks=" << chunks << '\n';
  }
};

struct Spectrogram {
  CommonOpts common;
  std::string input;
  std::size_t win = 4096;
  std::size_t hop = 2048;
  std::optional<double> demod_lo;
  std::optional<double> demod_hi;

  void add(CLI::App* app) {
    common.add(app);
    app->add_option("--input", input, "WAV recording")->required();
    app->add_option("--win", win, "Window length");
    app->add_option("--hop", hop, "Hop length");
    app->add_option("--demod-lo", demod_lo, "AM-demodulate this band first (lower edge)");
    app->add_option("--demod-hi", demod_hi, "AM-demodulate this band first (upper edge)");
  }

  void run() {
    auto signal = read_wav(input);
    if (demod_lo.has_value() != demod_hi.has_value()) throw UsageError("--demod-lo and --demod-hi go together");
    if (demod_lo) signal = am_demodulate(signal, *demod_lo, *demod_hi);
    const auto s = stft(signal, win, hop);
    write_spectrogram_csv(s, common.out("spectrogram.csv"));
    write_spectrogram_pgm(s, common.out("spectrogram.pgm"));
    std::cout << "frames=" << s.frames() << "\tbins=" << s.bins() << '\n';
  }
};

// ---- distance-sweep / cross-screen ----------------------------------------------

struct DistanceSweep {
  CommonOpts common;
  ScreenOpts screen;
  ChunkOpts chunk;
  std::string frame;
  std::vector<double> distances{1, 2, 5, 10, 20, 50, 100, 200, 300, 500};
  double seconds = 2.0;
  double snr_db = 20.0;
  double noise_floor_db = -50.0;
  bool delay_check = false;

  void add(CLI::App* app) {
    common.add(app);
    screen.add(app);
    chunk.add(app);
    chunk.T = 0.5;
    app->add_option("--frame", frame, "PGM frame (default: punctured zebra, period 16)");
    app->add_option("--distances", distances, "Distances in cm")->delimiter(',');
    app->add_option("--seconds", seconds);
    app->add_option("--snr-db", snr_db);
    app->add_option("--noise-floor-db", noise_floor_db, "Ambient noise at the microphone (dBFS)");
    app->add_flag("--delay-check", delay_check, "Also measure the trace shift at 1 m");
  }

  void run() {
    const std::uint64_t seed = common.require_seed();
    const auto profile = screen.profile();
    const auto img = frame.empty() ? gen_zebra_frame(profile, 16, ZebraKind::kSquare, true) : read_pgm(frame);
    auto rig = make_rig(profile, screen.fingerprint(), snr_db, screen.rate_hz);
    rig.chunk = chunk.params(screen, screen.rate_hz);
    rig.chunk.S = chunk.S ? chunk.S : nominal_cycle_samples(profile, rig.fingerprint, screen.rate_hz);
    rig.carrier_band = chunk.band();
    ChannelParams ch;
    ch.noise_floor_db = noise_floor_db;
    rig.channel = ch;
    const auto points = distance_sweep(rig, img, distances, seconds, seed);
    auto os = open_out(common.out("distance_sweep.csv"));
    os << "distance_cm,correlation\n";
    for (const auto& p : points) {
      os << num(p.distance_cm) << ',' << num(p.correlation) << '\n';
      std::cout << num(p.distance_cm) << '\t' << num(p.correlation) << '\n';
    }
    if (delay_check) {
      const auto shift = delay_shift(rig, img, 1.0, seconds, seed);
      const double fraction = static_cast<double>(shift) / cycle_samples(rig);
      write_config_file({{"distance_m", "1"}, {"shift_samples", std::to_string(shift)}, {"cycle_fraction", num(fraction)}},
                        common.out("delay.txt"));
      std::cout << "delay_shift=" << shift << "\tcycle_fraction=" << num(fraction) << '\n';
    }
  }
};

struct CrossScreen {
  CommonOpts common;
  CrossScreenParams params;
  std::optional<double> snr_db = 20.0;
  std::string content = "family";

  void add(CLI::App* app) {
    common.add(app);
    app->add_option("--fingerprints", params.fingerprint_seeds, "Fingerprint seed of every screen")->delimiter(',');
    app->add_option("--classes", params.classes);
    app->add_option("--per-class", params.per_class, "Traces per class and screen");
    app->add_option("--quota", params.quota, "Training traces per class of every collection");
    app->add_option("--trace-s", params.trace_s);
    app->add_option("--snr-db", snr_db);
    app->add_option("-T,--corr-threshold", params.T);
    app->add_option("--content", content, "family: pages share a layout; distinct: independent pages")
        ->check(CLI::IsMember({"family", "distinct"}));
  }

  void run() {
    const std::uint64_t seed = common.require_seed();
    CrossScreenParams p = params;
    p.snr_db = snr_db;
    p.content = content == "family" ? SiteContent::kFamily : SiteContent::kDistinct;
    const auto r = cross_screen(p, seed);
    write_cross_screen_csv(r, common.out("cross_screen.csv"));
    std::cout << "self=" << num(r.self_mean) << "\tall_minus_victim=" << num(r.all_minus_victim_mean)
              << "\tsingle_foreign=" << num(r.single_foreign_mean) << '\n';
  }
};

template <typename Cmd>
CLI::App* add_command(CLI::App& app, Cmd& cmd, const char* name, const char* help) {
  auto* sub = app.add_subcommand(name, help);
  cmd.add(sub);
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic screen leakage simulator and attack pipeline", "screenleak"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "screenleak 0.1.0");

  GenPattern gen;
  Simulate simulate;
  Preprocess pre;
  FindS fs;
  ChunkCompare cmp;
  Train train;
  Eval eval;
  Snoop snoop;
  ExtractText text;
  Distinguish dist;
  CorrTest corr;
  DistanceSweep sweep;
  CrossScreen cross;
  Spectrogram spec;

  std::vector<std::pair<CLI::App*, std::function<void()>>> commands{
      {add_command(app, gen, "gen-pattern", "Render a test frame to PGM"), [&] { gen.run(); }},
      {add_command(app, simulate, "simulate", "Synthesize a leakage recording"), [&] { simulate.run(); }},
      {add_command(app, pre, "preprocess", "Recording -> OutputTrace"), [&] { pre.run(); }},
      {add_command(app, fs, "find-s", "Brute-force the chunk size S"), [&] { fs.run(); }},
      {add_command(app, cmp, "chunk-compare", "Chunkify vs the fixed-period baseline"), [&] { cmp.run(); }},
      {add_command(app, train, "train", "Train a model from a dataset manifest"), [&] { train.run(); }},
      {add_command(app, eval, "eval", "Evaluate a model on a dataset manifest"), [&] { eval.run(); }},
      {add_command(app, snoop, "snoop", "Recover typed keys from a keyboard recording"), [&] { snoop.run(); }},
      {add_command(app, text, "extract-text", "Rank dictionary words for a text recording"), [&] { text.run(); }},
      {add_command(app, dist, "distinguish", "Classify one recording"), [&] { dist.run(); }},
      {add_command(app, corr, "corr-test", "Mean chunk-to-mean correlation"), [&] { corr.run(); }},
      {add_command(app, sweep, "distance-sweep", "Trace quality against microphone distance"), [&] { sweep.run(); }},
      {add_command(app, cross, "cross-screen", "Cross-screen training collections"), [&] { cross.run(); }},
      {add_command(app, spec, "spectrogram", "STFT as CSV and PGM"), [&] { spec.run(); }},
  };

  try {
    for (int i = 1; i < argc; ++i) {
      if (argv[i][0] == '-') continue;
      if (auto* sub = app.get_subcommand_no_throw(argv[i])) apply_config(sub, argc, argv);
      break;
    }
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc != 0) {
      for (auto* sub : app.get_subcommands()) std::cerr << sub->help();
    }
    return rc == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  for (const auto& [sub, run] : commands) {
    if (!sub->parsed()) continue;
    try {
      run();
      const auto out_dir = sub->get_option("--out-dir")->as<std::string>();
      std::filesystem::create_directories(out_dir);
      write_run_meta(sub, std::filesystem::path(out_dir) / "run.meta");
    } catch (const UsageError& e) {
      std::cerr << "usage error: " << e.what() << '\n' << sub->help();
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 0;
}
