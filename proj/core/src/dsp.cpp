#include "screenleak/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include "screenleak/errors.hpp"
#include "screenleak/fft.hpp"
#include "screenleak/trace_io.hpp"

namespace screenleak {
namespace {

using fft::Complex;

void check_band(const SampledSignal& s, double lo, double hi) {
  if (s.sample_rate_hz <= 0.0) throw ParamError("sample rate must be positive");
  const double nyquist = s.sample_rate_hz / 2.0;
  if (!(lo >= 0.0 && lo < hi && hi <= nyquist)) {
    throw ParamError("band [" + std::to_string(lo) + ", " + std::to_string(hi) +
                     "] Hz not within [0, " + std::to_string(nyquist) + "]");
  }
}

// Zeroes every rfft bin whose frequency falls outside [lo, hi].
void mask_band(std::vector<Complex>& spec, std::size_t n, double rate, double lo, double hi) {
  const double df = rate / static_cast<double>(n);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    if (f < lo || f > hi) spec[k] = 0.0;
  }
}

// Magnitude of the analytic signal whose positive-frequency half is `half`.
std::vector<double> analytic_magnitude(const std::vector<Complex>& half, std::size_t n) {
  std::vector<Complex> full(n, Complex{});
  full[0] = half[0];
  const std::size_t last = (n % 2 == 0) ? n / 2 : (n + 1) / 2;  // exclusive bound of doubled bins
  for (std::size_t k = 1; k < last; ++k) full[k] = 2.0 * half[k];
  if (n % 2 == 0 && n > 1) full[n / 2] = half[n / 2];
  auto z = fft::ifft(full);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::abs(z[i]);
  return out;
}

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

}  // namespace

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

SampledSignal bandpass(const SampledSignal& signal, double lo_hz, double hi_hz) {
  check_band(signal, lo_hz, hi_hz);
  const std::size_t n = signal.size();
  if (n == 0) return {{}, signal.sample_rate_hz};
  auto spec = fft::rfft(signal.samples);
  mask_band(spec, n, signal.sample_rate_hz, lo_hz, hi_hz);
  return {fft::irfft(spec, n), signal.sample_rate_hz};
}

SampledSignal envelope(const SampledSignal& signal) {
  const std::size_t n = signal.size();
  if (n == 0) return {{}, signal.sample_rate_hz};
  auto spec = fft::rfft(signal.samples);
  spec[0] = 0.0;  // removes the mean
  return {analytic_magnitude(spec, n), signal.sample_rate_hz};
}

SampledSignal am_demodulate(const SampledSignal& signal, double lo_hz, double hi_hz) {
  check_band(signal, lo_hz, hi_hz);
  const std::size_t n = signal.size();
  if (n == 0) return {{}, signal.sample_rate_hz};
  auto spec = fft::rfft(signal.samples);
  mask_band(spec, n, signal.sample_rate_hz, lo_hz, hi_hz);
  spec[0] = 0.0;
  return {analytic_magnitude(spec, n), signal.sample_rate_hz};
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  a = a.first(n);
  b = b.first(n);
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> rotate(std::span<const double> x, std::ptrdiff_t k) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (n == 0) return {};
  std::ptrdiff_t s = k % n;
  if (s < 0) s += n;
  std::vector<double> out(x.size());
  std::rotate_copy(x.begin(), x.begin() + s, x.end(), out.begin());
  return out;
}

ShiftMatch max_corr_shift(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ParamError("max_corr_shift: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return {0, 0.0};

  auto standardize = [](std::span<const double> x) {
    std::vector<double> z(x.begin(), x.end());
    const double m = mean(z);
    double ss = 0.0;
    for (double& v : z) {
      v -= m;
      ss += v * v;
    }
    if (ss > 0.0) {
      const double inv = 1.0 / std::sqrt(ss);
      for (double& v : z) v *= inv;
    }
    return z;
  };
  const auto za = standardize(a);
  const auto zb = standardize(b);

  // c[s] = sum_i za[i+s] zb[i] = IDFT(A * conj(B))[s]
  auto fa = fft::rfft(za);
  const auto fb = fft::rfft(zb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= std::conj(fb[k]);
  const auto c = fft::irfft(fa, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t top = std::min<std::size_t>(3, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t i, std::size_t j) { return c[i] > c[j] || (c[i] == c[j] && i < j); });

  ShiftMatch best{order[0], -2.0};
  for (std::size_t t = 0; t < top; ++t) {
    const std::size_t s = order[t];
    const double r = pearson(rotate(a, static_cast<std::ptrdiff_t>(s)), b);
    if (r > best.corr || (r == best.corr && s < best.shift)) best = {s, r};
  }
  return best;
}

double SpectrogramMatrix::energy() const {
  if (win_len == 0) return 0.0;
  const std::size_t half = win_len / 2;
  double total = 0.0;
  for (const auto& frame : magnitudes) {
    double e = 0.0;
    for (std::size_t k = 0; k < frame.size(); ++k) {
      const double p = frame[k] * frame[k];
      e += (k == 0 || k == half) ? p : 2.0 * p;
    }
    total += e / static_cast<double>(win_len);
  }
  return total;
}

std::vector<double> SpectrogramMatrix::mean_spectrum() const {
  std::vector<double> out(bins(), 0.0);
  if (magnitudes.empty()) return out;
  for (const auto& frame : magnitudes) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += frame[k];
  }
  for (double& v : out) v /= static_cast<double>(magnitudes.size());
  return out;
}

SpectrogramMatrix stft(const SampledSignal& signal, std::size_t win_len, std::size_t hop_len) {
  if (win_len < 2 || (win_len & (win_len - 1)) != 0) throw ParamError("stft: win_len must be a power of two");
  if (hop_len == 0 || hop_len > win_len) throw ParamError("stft: hop_len must be in [1, win_len]");
  if (signal.size() < win_len) throw ParamError("stft: signal shorter than win_len");

  std::vector<double> window(win_len);
  for (std::size_t i = 0; i < win_len; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(win_len)));
  }

  SpectrogramMatrix out;
  out.win_len = win_len;
  out.hop_len = hop_len;
  out.sample_rate_hz = signal.sample_rate_hz;
  std::vector<double> buf(win_len);
  for (std::size_t start = 0; start + win_len <= signal.size(); start += hop_len) {
    for (std::size_t i = 0; i < win_len; ++i) buf[i] = signal.samples[start + i] * window[i];
    const auto spec = fft::rfft(buf);
    std::vector<double> mags(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) mags[k] = std::abs(spec[k]);
    out.magnitudes.push_back(std::move(mags));
  }
  return out;
}

SampledSignal resample(const SampledSignal& signal, double new_rate_hz) {
  const double old_rate = signal.sample_rate_hz;
  if (new_rate_hz <= 0.0 || old_rate <= 0.0) throw ParamError("resample: rates must be positive");
  if (new_rate_hz > old_rate) throw ParamError("resample: upsampling is not supported");
  if (new_rate_hz == old_rate) return signal;
  if (std::floor(new_rate_hz) != new_rate_hz || std::floor(old_rate) != old_rate) {
    throw ParamError("resample: rates must be whole numbers of hertz");
  }

  const auto up = static_cast<long long>(new_rate_hz);
  const auto down = static_cast<long long>(old_rate);
  const long long g = std::gcd(up, down);
  const long long phases = up / g;  // L
  const long long step = down / g;  // M

  constexpr int kTaps = 64;
  constexpr double kBeta = 8.0;
  const double fc = 0.45 * new_rate_hz / old_rate;  // cycles per input sample
  const double i0_beta = bessel_i0(kBeta);

  // Output k sits at input position k*M/L = base + phase/L. Taps cover
  // input samples base - kTaps/2 + 1 ... base + kTaps/2.
  std::vector<std::vector<double>> bank(static_cast<std::size_t>(phases), std::vector<double>(kTaps));
  for (long long p = 0; p < phases; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(phases);
    auto& h = bank[static_cast<std::size_t>(p)];
    double sum = 0.0;
    for (int t = 0; t < kTaps; ++t) {
      const double offset = static_cast<double>(t - kTaps / 2 + 1) - frac;  // input index minus position
      const double x = 2.0 * fc * offset;
      const double sinc = (x == 0.0) ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double r = offset / (kTaps / 2.0);
      const double w = std::abs(r) >= 1.0 ? 0.0 : bessel_i0(kBeta * std::sqrt(1.0 - r * r)) / i0_beta;
      h[static_cast<std::size_t>(t)] = sinc * w;
      sum += h[static_cast<std::size_t>(t)];
    }
    for (double& v : h) v /= sum;
  }

  const auto n_in = static_cast<long long>(signal.size());
  const long long n_out = n_in * up / down;
  std::vector<double> out(static_cast<std::size_t>(n_out));
  const auto& x = signal.samples;
  for (long long k = 0; k < n_out; ++k) {
    const long long num = k * step;
    const long long base = num / phases;
    const auto& h = bank[static_cast<std::size_t>(num % phases)];
    const long long first = base - kTaps / 2 + 1;
    double acc = 0.0;
    if (first >= 0 && first + kTaps <= n_in) {
      const double* src = x.data() + first;
      for (int t = 0; t < kTaps; ++t) acc += h[static_cast<std::size_t>(t)] * src[t];
    } else {
      for (int t = 0; t < kTaps; ++t) {
        const long long idx = first + t;
        if (idx >= 0 && idx < n_in) acc += h[static_cast<std::size_t>(t)] * x[static_cast<std::size_t>(idx)];
      }
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
  return {std::move(out), new_rate_hz};
}

FeatureVector band_features(const SampledSignal& signal, double lo_hz, double hi_hz) {
  check_band(signal, lo_hz, hi_hz);
  if (signal.duration_s() < 1.0) throw ParamError("band_features: signal shorter than 1 s");
  const std::size_t n = signal.size();
  const double per_hz = static_cast<double>(n) / signal.sample_rate_hz;
  const auto k0 = static_cast<std::size_t>(std::ceil(lo_hz * per_hz - 1e-9));
  const auto k1 = static_cast<std::size_t>(std::floor(hi_hz * per_hz + 1e-9));
  if (k1 < k0) throw ParamError("band_features: band contains no FFT bins");

  const auto spec = fft::rfft(signal.samples);
  FeatureVector fv;
  fv.values.reserve(k1 - k0 + 1);
  double norm = 0.0;
  for (std::size_t k = k0; k <= k1 && k < spec.size(); ++k) {
    const double m = std::abs(spec[k]);
    fv.values.push_back(m);
    norm += m * m;
  }
  if (norm > 0.0) {
    const double inv = 1.0 / std::sqrt(norm);
    for (double& v : fv.values) v *= inv;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "fft_mag[%g-%g Hz] n=%zu fs=%g", lo_hz, hi_hz, n, signal.sample_rate_hz);
  fv.descriptor = buf;
  return fv;
}

double peak_frequency(const SampledSignal& signal, double lo_hz, double hi_hz) {
  check_band(signal, lo_hz, hi_hz);
  const std::size_t n = signal.size();
  if (n < 2) throw ParamError("peak_frequency: signal too short");
  const auto spec = fft::rfft(signal.samples);
  const double df = signal.sample_rate_hz / static_cast<double>(n);
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    if (f < lo_hz || f > hi_hz) continue;
    const double m = std::abs(spec[k]);
    if (m > best_mag) {
      best_mag = m;
      best = k;
    }
  }
  if (best_mag < 0.0) throw ParamError("peak_frequency: band contains no FFT bins");
  return static_cast<double>(best) * df;
}

void write_spectrogram_csv(const SpectrogramMatrix& s, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  char buf[64];
  os << "time_s";
  for (std::size_t k = 0; k < s.bins(); ++k) {
    std::snprintf(buf, sizeof buf, ",%.6g", s.bin_hz(k));
    os << buf;
  }
  os << '\n';
  for (std::size_t t = 0; t < s.frames(); ++t) {
    std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(t * s.hop_len) / s.sample_rate_hz);
    os << buf;
    for (double m : s.magnitudes[t]) {
      std::snprintf(buf, sizeof buf, ",%.9g", m);
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void write_spectrogram_pgm(const SpectrogramMatrix& s, const std::filesystem::path& path) {
  if (s.frames() == 0) throw ParamError("empty spectrogram");
  const int h = static_cast<int>(s.frames());
  const int w = static_cast<int>(s.bins());
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (const auto& frame : s.magnitudes) {
    for (double m : frame) logs.push_back(std::log10(m + 1e-12));
  }
  const auto [lo_it, hi_it] = std::minmax_element(logs.begin(), logs.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  FrameImage img(h, w, 0);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const double u = span > 0.0 ? (logs[i] - lo) / span : 0.0;
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * u));
  }
  write_pgm(img, path);
}

}  // namespace screenleak
