#include "options.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"

namespace screenleak::cli {

void CommonOpts::add(CLI::App* app) {
  app->add_option("--out-dir", out_dir, "Directory for every output file");
  app->add_option("--config", config, "key=value file; keys are long option names");
  app->add_option("--seed", seed, "Seed of every random draw");
}

std::uint64_t CommonOpts::require_seed() const {
  if (!seed) throw UsageError("--seed is required for randomized runs");
  return *seed;
}

std::filesystem::path CommonOpts::out(const std::string& name) const {
  std::filesystem::create_directories(out_dir);
  return out_dir / name;
}

void ScreenOpts::add(CLI::App* app) {
  app->add_option("--width", width, "Panel width in pixels");
  app->add_option("--height", height, "Panel height in pixels");
  app->add_option("--refresh-hz", refresh_hz, "Refresh rate");
  app->add_option("--carrier-hz", carrier_hz, "Carrier frequency");
  app->add_option("--blanking", blanking, "Blanking fraction of each cycle");
  app->add_option("--rate", rate_hz, "Recording sample rate");
  app->add_option("--fingerprint-seed", fingerprint_seed, "Screen instance; omitted means an ideal screen");
}

ScreenProfile ScreenOpts::profile() const {
  ScreenProfile p;
  p.width_px = width;
  p.height_px = height;
  p.refresh_rate_hz = refresh_hz;
  p.carrier_hz = carrier_hz;
  p.blanking_fraction = blanking;
  p.validate();
  return p;
}

ScreenFingerprint ScreenOpts::fingerprint() const {
  return fingerprint_seed ? make_fingerprint(*fingerprint_seed) : null_fingerprint();
}

void ChunkOpts::add(CLI::App* app) {
  app->add_option("-S,--cycle-samples", S, "Chunk size guess S (0: nominal cycle length)");
  app->add_option("-d,--drift", d, "Allowed drift d");
  app->add_option("-T,--corr-threshold", T, "Correlation threshold T");
  app->add_option("--band-lo", band_lo, "Carrier band lower edge (Hz)");
  app->add_option("--band-hi", band_hi, "Carrier band upper edge (Hz)");
}

ChunkParams ChunkOpts::params(const ScreenOpts& screen, double sample_rate_hz) const {
  ChunkParams p;
  p.S = S ? S : static_cast<std::size_t>(std::floor(sample_rate_hz / screen.refresh_hz));
  p.d = d;
  p.T = T;
  p.validate();
  return p;
}

void FeatureOpts::add(CLI::App* app) {
  app->add_option("--features", kind, "trace | harmonics | keyboard | text | voip")
      ->check(CLI::IsMember({"trace", "harmonics", "keyboard", "text", "voip"}));
  app->add_option("--trace-len", trace_len, "Samples kept of each trace (0: nominal cycle - 4)");
  app->add_option("--harmonics", harmonics, "DFT harmonics for --features harmonics");
  app->add_option("--calibration", calibration, "Recording of the idle keyboard or of the calibration text");
  app->add_option("--layout", layout, "Keyboard or character layout file");
  app->add_option("--calibration-text", calibration_text, "Text shown during the calibration recording");
  app->add_option("--pool-factor", pool_factor, "Samples averaged per feature for keyboard and text");
  app->add_option("--voip-lo", voip_lo, "VoIP feature band lower edge (Hz)");
  app->add_option("--voip-hi", voip_hi, "VoIP feature band upper edge (Hz)");
  app->add_option("--pool-bins", pool_bins, "FFT bins per VoIP feature");
}

FeatureExtractor::FeatureExtractor(const FeatureOpts& opts, const ScreenOpts& screen, const ChunkOpts& chunk)
    : opts_(opts), screen_(screen), chunk_(chunk), profile_(screen.profile()) {
  if (opts_.kind != "keyboard" && opts_.kind != "text") return;
  if (opts_.calibration.empty() || opts_.layout.empty()) {
    throw UsageError("--features " + opts_.kind + " needs --calibration and --layout");
  }
  const auto kv = read_config_file(opts_.layout);
  const auto cal = trace(opts_.calibration);
  const double cycle = cycle_for(cal.sample_rate_hz);
  const auto cp = chunk_for(cal.sample_rate_hz);
  const std::size_t len = cp.S - cp.d;
  if (opts_.kind == "keyboard") {
    keyboard_layout_ = keyboard_layout_from_kv(kv);
    profile_ = keyboard_layout_.screen;
    KeyboardFeatures f;
    f.pool_factor = opts_.pool_factor;
    f.aligner = calibrate_aligner(cal, render_keyboard_frame(keyboard_layout_), profile_, len, cycle);
    keyboard_ = f;
  } else {
    char_layout_ = char_layout_from_kv(kv);
    char_layout_.validate(profile_);
    std::string text = opts_.calibration_text;
    std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::toupper(c); });
    const auto frame = render_text_frame(text, char_layout_.char_width_px, char_layout_, profile_);
    TextFeatures f;
    f.pool_factor = opts_.pool_factor;
    f.aligner = calibrate_aligner(cal, frame, profile_, len, cycle);
    f.segments = char_segment_map(char_layout_, profile_, len);
    f.layout = char_layout_;
    f.profile = profile_;
    f.cycle_samples = cycle;
    text_ = f;
  }
}

ChunkParams FeatureExtractor::chunk_for(double sample_rate_hz) const { return chunk_.params(screen_, sample_rate_hz); }

double FeatureExtractor::cycle_for(double sample_rate_hz) const { return sample_rate_hz / profile_.refresh_rate_hz; }

OutputTrace FeatureExtractor::trace(const std::filesystem::path& path) const {
  if (path.extension() == ".wav") {
    const auto signal = read_wav(path);
    return preprocess(signal, chunk_for(signal.sample_rate_hz), chunk_.band());
  }
  return read_output_trace(path);
}

std::size_t FeatureExtractor::aligned_len() const {
  if (keyboard_) return keyboard_->aligner.len();
  if (text_) return text_->aligner.len();
  return 0;
}

const KeyboardFeatures& FeatureExtractor::keyboard() const {
  if (!keyboard_) throw UsageError("keyboard features not configured");
  return *keyboard_;
}

const TextFeatures& FeatureExtractor::text() const {
  if (!text_) throw UsageError("text features not configured");
  return *text_;
}

std::vector<double> FeatureExtractor::operator()(const std::filesystem::path& path) const {
  if (opts_.kind == "voip") {
    return voip_features(read_wav(path), opts_.voip_lo, opts_.voip_hi, opts_.pool_bins);
  }
  const auto t = trace(path);
  if (opts_.kind == "harmonics") return harmonic_features(t.values, opts_.harmonics);
  if (opts_.kind == "keyboard") return keyboard()(t);
  if (opts_.kind == "text") throw UsageError("text features are per slot; use train or extract-text");
  std::size_t len = opts_.trace_len;
  if (len == 0) len = static_cast<std::size_t>(std::floor(cycle_for(t.sample_rate_hz))) - 4;
  if (t.values.size() < len) throw ParamError("trace shorter than --trace-len");
  return {t.values.begin(), t.values.begin() + static_cast<std::ptrdiff_t>(len)};
}

namespace {

std::string config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(std::strlen("--config="));
  }
  return {};
}

}  // namespace

void apply_config(CLI::App* sub, int argc, char** argv) {
  const auto path = config_path(argc, argv);
  if (path.empty()) return;
  for (const auto& [key, value] : read_config_file(path)) {
    if (key == "config") continue;
    auto* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError("unknown config key '" + key + "' for " + sub->get_name());
    opt->default_val(value);
  }
}

void write_run_meta(const CLI::App* sub, const std::filesystem::path& path) {
  KeyValues kv;
  kv["subcommand"] = sub->get_name();
  for (const auto* opt : sub->get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    kv[name] = value;
  }
  write_config_file(kv, path);
}

std::filesystem::path resolve(const std::filesystem::path& manifest, const std::string& entry) {
  const std::filesystem::path p(entry);
  return p.is_absolute() ? p : manifest.parent_path() / p;
}

std::vector<std::string> manifest_labels(const DatasetManifest& m) {
  if (!m.label_set.empty()) return m.label_set;
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& e : m.entries) {
    if (seen.insert(e.label).second) out.push_back(e.label);
  }
  return out;
}

}  // namespace screenleak::cli
