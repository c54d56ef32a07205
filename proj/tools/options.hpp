#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "screenleak/attacks.hpp"
#include "screenleak/chunker.hpp"
#include "screenleak/classify.hpp"
#include "screenleak/screen_sim.hpp"
#include "screenleak/trace_io.hpp"

namespace screenleak::cli {

/// Bad invocation detected after parsing (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::filesystem::path out_dir = "out";
  std::string config;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app);
  /// Refuses to run without an explicit --seed.
  std::uint64_t require_seed() const;
  std::filesystem::path out(const std::string& name) const;
};

struct ScreenOpts {
  int width = 1680;
  int height = 1050;
  double refresh_hz = 60.0;
  double carrier_hz = 32000.0;
  double blanking = 0.0;
  double rate_hz = 192000.0;
  std::optional<std::uint64_t> fingerprint_seed;

  void add(CLI::App* app);
  ScreenProfile profile() const;
  ScreenFingerprint fingerprint() const;
};

struct ChunkOpts {
  /// 0 selects the nominal cycle length of the screen at the signal's sample rate.
  std::size_t S = 0;
  std::size_t d = 1;
  double T = 0.9;
  double band_lo = 27500.0;
  double band_hi = 38000.0;

  void add(CLI::App* app);
  ChunkParams params(const ScreenOpts& screen, double sample_rate_hz) const;
  std::pair<double, double> band() const { return {band_lo, band_hi}; }
};

struct FeatureOpts {
  std::string kind = "trace";
  std::size_t trace_len = 0;
  std::size_t harmonics = 75;
  std::string calibration;
  std::string layout;
  std::string calibration_text = "AAAAAA";
  std::size_t pool_factor = 4;
  double voip_lo = 9000.0;
  double voip_hi = 15000.0;
  std::size_t pool_bins = 90;

  void add(CLI::App* app);
};

/// Turns recordings (.wav) or stored OutputTraces into feature vectors for one feature kind.
class FeatureExtractor {
 public:
  FeatureExtractor(const FeatureOpts& opts, const ScreenOpts& screen, const ChunkOpts& chunk);

  /// OutputTrace of a .wav (preprocessed) or of a stored trace file.
  OutputTrace trace(const std::filesystem::path& path) const;
  std::vector<double> operator()(const std::filesystem::path& path) const;

  const std::string& kind() const { return opts_.kind; }
  const KeyboardFeatures& keyboard() const;
  const KeyboardLayout& keyboard_layout() const { return keyboard_layout_; }
  const TextFeatures& text() const;
  const CharLayout& char_layout() const { return char_layout_; }
  const ScreenProfile& profile() const { return profile_; }
  std::size_t aligned_len() const;

 private:
  ChunkParams chunk_for(double sample_rate_hz) const;
  double cycle_for(double sample_rate_hz) const;

  FeatureOpts opts_;
  ScreenOpts screen_;
  ChunkOpts chunk_;
  ScreenProfile profile_;
  std::optional<KeyboardFeatures> keyboard_;
  KeyboardLayout keyboard_layout_;
  std::optional<TextFeatures> text_;
  CharLayout char_layout_;
};

/// Applies `key=value` lines of the --config file found in argv as defaults of the
/// matching long options of `sub`; flags given on the command line still win.
void apply_config(CLI::App* sub, int argc, char** argv);

/// Echo of every option of `sub`, as parsed.
void write_run_meta(const CLI::App* sub, const std::filesystem::path& path);

/// Manifest paths are relative to the manifest's directory.
std::filesystem::path resolve(const std::filesystem::path& manifest, const std::string& entry);

/// Declared label set, or labels in first-seen order.
std::vector<std::string> manifest_labels(const DatasetManifest& m);

}  // namespace screenleak::cli
