#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "screenleak/types.hpp"

namespace screenleak {

/// Reads a mono RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float samples.
/// PCM values are mapped to [-1, 1] by dividing by 32767 (and clamping -32768).
SampledSignal read_wav(const std::filesystem::path& path);

/// Writes mono 16-bit PCM. Samples outside [-1, 1] are clipped. Refuses empty signals.
void write_wav(const SampledSignal& signal, const std::filesystem::path& path);

/// Binary PGM ("P5", maxval 255).
FrameImage read_pgm(const std::filesystem::path& path);
void write_pgm(const FrameImage& image, const std::filesystem::path& path);

/// One word per line; lowercased, deduplicated in first-seen order, blank lines skipped.
std::vector<std::string> read_wordlist(const std::filesystem::path& path);

using KeyValues = std::map<std::string, std::string>;

/// "k1=v1\tk2=v2" style encoding shared by manifests, configs and layouts.
std::string format_key_values(const KeyValues& kv, char separator = '\t');
KeyValues parse_key_values(const std::string& text, char separator = '\t');

/// Flat `key=value` text file; '#' starts a comment line.
KeyValues read_config_file(const std::filesystem::path& path);
void write_config_file(const KeyValues& kv, const std::filesystem::path& path);

struct ManifestEntry {
  std::string trace_path;
  std::string label;
  std::string screen_id;
  KeyValues meta;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Tab-separated dataset listing: path, label, screen_id, then key=value pairs.
/// An optional `#labels` directive line declares the finite label set.
struct DatasetManifest {
  std::vector<std::string> label_set;
  std::vector<ManifestEntry> entries;

  /// Throws FormatError on duplicate paths or labels outside a declared label set.
  void validate() const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace screenleak
