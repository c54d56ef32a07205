#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "screenleak/types.hpp"

namespace screenleak {

/// Hann-windowed magnitude STFT. magnitudes[t][k] is frame t, bin k.
struct SpectrogramMatrix {
  std::vector<std::vector<double>> magnitudes;
  std::size_t win_len = 0;
  std::size_t hop_len = 0;
  double sample_rate_hz = 0.0;

  std::size_t frames() const { return magnitudes.size(); }
  std::size_t bins() const { return win_len / 2 + 1; }
  double bin_hz(std::size_t k) const {
    return static_cast<double>(k) * sample_rate_hz / static_cast<double>(win_len);
  }
  /// One-sided Parseval energy: (|X0|^2 + 2 sum |Xk|^2 + |X_N/2|^2) / N, summed over frames.
  double energy() const;
  /// Mean magnitude over time, one value per bin.
  std::vector<double> mean_spectrum() const;
};

struct FeatureVector {
  std::vector<double> values;
  std::string descriptor;
};

/// Brick-wall FFT band-pass keeping bins with lo_hz <= f <= hi_hz.
SampledSignal bandpass(const SampledSignal& signal, double lo_hz, double hi_hz);

/// Magnitude of the analytic signal of the mean-removed input.
SampledSignal envelope(const SampledSignal& signal);

/// bandpass followed by envelope, sharing one forward transform.
SampledSignal am_demodulate(const SampledSignal& signal, double lo_hz, double hi_hz);

/// Pearson correlation after truncating both inputs to the shorter length.
/// Returns 0 when either side is constant or shorter than two samples.
double pearson(std::span<const double> a, std::span<const double> b);

/// Left rotation: result[i] = x[(i + k) mod n].
std::vector<double> rotate(std::span<const double> x, std::ptrdiff_t k);

struct ShiftMatch {
  std::size_t shift = 0;
  double corr = 0.0;
};

/// Finds s in [0, n) maximizing pearson(rotate(a, s), b), i.e. the rotation that
/// maps a onto b. FFT cross-correlation, refined by exact Pearson on the top 3
/// candidates; ties go to the smallest shift.
ShiftMatch max_corr_shift(std::span<const double> a, std::span<const double> b);

SpectrogramMatrix stft(const SampledSignal& signal, std::size_t win_len, std::size_t hop_len);

/// Anti-aliased windowed-sinc downsampler (cutoff 0.45 * new rate, Kaiser beta 8, 64 taps
/// per output phase).
SampledSignal resample(const SampledSignal& signal, double new_rate_hz);

/// L2-normalized FFT magnitudes of the bins in [lo_hz, hi_hz], ascending frequency.
FeatureVector band_features(const SampledSignal& signal, double lo_hz, double hi_hz);

/// Frequency of the largest-magnitude rfft bin within [lo_hz, hi_hz].
double peak_frequency(const SampledSignal& signal, double lo_hz, double hi_hz);

double rms(std::span<const double> x);
double mean(std::span<const double> x);

void write_spectrogram_csv(const SpectrogramMatrix& s, const std::filesystem::path& path);
/// Log-magnitude heat map, rows = time, columns = frequency, normalized per image.
void write_spectrogram_pgm(const SpectrogramMatrix& s, const std::filesystem::path& path);

}  // namespace screenleak
