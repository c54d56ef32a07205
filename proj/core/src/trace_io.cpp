#include "screenleak/trace_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "screenleak/errors.hpp"

namespace screenleak {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

SampledSignal read_wav(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = data + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      // Tolerate a truncated trailing data chunk; anything else is malformed.
      if (std::memcmp(chunk, "data", 4) != 0) throw FormatError(path.string() + ": truncated chunk");
    }
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError(path.string() + ": short fmt chunk");
      format = le16(data + body);
      channels = le16(data + body + 2);
      rate = le32(data + body + 4);
      bits = le16(data + body + 14);
      if (format == kFormatExtensible && avail >= 26) format = le16(data + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      pcm = data + body;
      pcm_bytes = avail;
    }
    pos = body + len + (len & 1u);
  }

  if (!have_fmt || pcm == nullptr) throw FormatError(path.string() + ": missing fmt or data chunk");
  if (rate == 0) throw FormatError(path.string() + ": zero sample rate");
  if (channels != 1) throw UnsupportedError(path.string() + ": only mono audio is supported");

  SampledSignal out;
  out.sample_rate_hz = static_cast<double>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = pcm_bytes / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto q = static_cast<std::int16_t>(le16(pcm + 2 * i));
      out.samples[i] = std::max(-1.0, static_cast<double>(q) / 32767.0);
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = pcm_bytes / 4;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t raw = le32(pcm + 4 * i);
      float f;
      std::memcpy(&f, &raw, sizeof f);
      out.samples[i] = static_cast<double>(f);
    }
  } else {
    throw UnsupportedError(path.string() + ": unsupported sample format");
  }
  return out;
}

void write_wav(const SampledSignal& signal, const std::filesystem::path& path) {
  if (signal.samples.empty()) throw IoError("refusing to write an empty signal to " + path.string());
  if (!(signal.sample_rate_hz > 0.0)) throw ParamError("sample rate must be positive");

  const auto rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate_hz));
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, rate);
  put32(out, rate * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (double x : signal.samples) {
    const double clipped = std::clamp(x, -1.0, 1.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32767.0))));
  }
  spit(path, out);
}

FrameImage read_pgm(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError(path.string() + ": not a binary PGM (P5)");
  }
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError(path.string() + ": malformed PGM header");
    return std::stol(bytes.substr(start, pos - start));
  };
  const long width = next_token();
  const long height = next_token();
  const long maxval = next_token();
  if (width <= 0 || height <= 0) throw FormatError(path.string() + ": bad PGM dimensions");
  if (maxval != 255) throw UnsupportedError(path.string() + ": only maxval 255 is supported");
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (pos + n > bytes.size()) throw FormatError(path.string() + ": truncated PGM raster");

  FrameImage img(static_cast<int>(height), static_cast<int>(width));
  std::memcpy(img.pixels.data(), bytes.data() + pos, n);
  return img;
}

void write_pgm(const FrameImage& image, const std::filesystem::path& path) {
  if (!image.valid()) throw ParamError("invalid image");
  std::string out = "P5\n" + std::to_string(image.width_px) + " " + std::to_string(image.height_px) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  spit(path, out);
}

std::vector<std::string> read_wordlist(const std::filesystem::path& path) {
  const std::string text = slurp(path);
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  for (const std::string& raw : lines_of(text)) {
    std::string w = trim(raw);
    if (w.empty()) continue;
    std::transform(w.begin(), w.end(), w.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  if (words.empty()) throw EmptyDictionaryError(path.string() + ": no words");
  return words;
}

std::string format_key_values(const KeyValues& kv, char separator) {
  std::string out;
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) out.push_back(separator);
    first = false;
    out += k;
    out.push_back('=');
    out += v;
  }
  return out;
}

KeyValues parse_key_values(const std::string& text, char separator) {
  KeyValues kv;
  for (const std::string& field : split(text, separator)) {
    const std::string f = trim(field);
    if (f.empty()) continue;
    const auto eq = f.find('=');
    if (eq == std::string::npos || eq == 0) throw FormatError("expected key=value, got '" + f + "'");
    kv[trim(f.substr(0, eq))] = trim(f.substr(eq + 1));
  }
  return kv;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  KeyValues kv;
  for (const std::string& raw : lines_of(slurp(path))) {
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    for (auto& [k, v] : parse_key_values(line, '\n')) kv[k] = v;
  }
  return kv;
}

void write_config_file(const KeyValues& kv, const std::filesystem::path& path) {
  spit(path, format_key_values(kv, '\n') + "\n");
}

void DatasetManifest::validate() const {
  std::set<std::string> paths;
  const std::set<std::string> labels(label_set.begin(), label_set.end());
  for (const ManifestEntry& e : entries) {
    if (e.trace_path.empty()) throw FormatError("manifest entry with empty path");
    if (!paths.insert(e.trace_path).second) throw FormatError("duplicate trace path " + e.trace_path);
    if (!labels.empty() && !labels.count(e.label)) throw FormatError("label '" + e.label + "' not declared");
  }
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  manifest.validate();
  std::string out;
  if (!manifest.label_set.empty()) {
    out += "#labels";
    for (const auto& l : manifest.label_set) out += "\t" + l;
    out += "\n";
  }
  for (const ManifestEntry& e : manifest.entries) {
    out += e.trace_path + "\t" + e.label + "\t" + e.screen_id;
    if (!e.meta.empty()) out += "\t" + format_key_values(e.meta, '\t');
    out += "\n";
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& text) {
  DatasetManifest m;
  for (const std::string& line : lines_of(text)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#labels", 0) == 0) {
        auto parts = split(line, '\t');
        m.label_set.assign(parts.begin() + 1, parts.end());
      }
      continue;
    }
    auto parts = split(line, '\t');
    if (parts.size() < 3) throw FormatError("manifest line needs path, label, screen_id: " + line);
    ManifestEntry e{parts[0], parts[1], parts[2], {}};
    for (std::size_t i = 3; i < parts.size(); ++i) {
      for (auto& [k, v] : parse_key_values(parts[i], '\t')) e.meta[k] = v;
    }
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) { return parse_manifest(slurp(path)); }

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  spit(path, serialize_manifest(manifest));
}

}  // namespace screenleak
