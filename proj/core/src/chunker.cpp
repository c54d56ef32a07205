#include "screenleak/chunker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "screenleak/dsp.hpp"
#include "screenleak/errors.hpp"
#include "screenleak/fft.hpp"

namespace screenleak {

void ChunkParams::validate() const {
  if (d < 1 || d > 3) throw ParamError("chunk drift d must lie in [1, 3]");
  if (!(T >= 0.05 && T <= 0.95)) throw ParamError("correlation threshold T must lie in [0.05, 0.95]");
  if (S <= 2 * d + 2) throw ParamError("S too small for the drift window");
  if (max_sync_fraction < 0.0 || max_sync_fraction > 1.0) throw ParamError("max_sync_fraction must lie in [0, 1]");
}

namespace {

// Mean-free copy of the envelope plus prefix sums for O(1) window statistics.
class Scanner {
 public:
  explicit Scanner(const SampledSignal& env) : x_(env.samples) {
    const double m = mean(x_);
    for (double& v : x_) v -= m;
    p1_.assign(x_.size() + 1, 0.0);
    p2_.assign(x_.size() + 1, 0.0);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      p1_[i + 1] = p1_[i] + x_[i];
      p2_[i + 1] = p2_[i] + x_[i] * x_[i];
    }
  }

  std::size_t size() const { return x_.size(); }
  const double* data() const { return x_.data(); }
  std::span<const double> slice(std::size_t start, std::size_t len) const { return {x_.data() + start, len}; }

  // Centered-sum-of-squares of x[s, s + len).
  double css(std::size_t s, std::size_t len) const {
    const double sum = p1_[s + len] - p1_[s];
    const double v = (p2_[s + len] - p2_[s]) - sum * sum / static_cast<double>(len);
    return std::max(v, 0.0);
  }

 private:
  std::vector<double> x_;
  std::vector<double> p1_, p2_;
};

// The master's first L samples, centered, with cached spectra for FFT correlation.
class MasterRef {
 public:
  MasterRef(std::span<const double> head) : m_(head.begin(), head.end()) {
    const double mu = mean(m_);
    ss_ = 0.0;
    for (double& v : m_) {
      v -= mu;
      ss_ += v * v;
    }
  }

  std::size_t len() const { return m_.size(); }

  double corr_at(const Scanner& sc, std::size_t s) const {
    const double var = sc.css(s, m_.size());
    if (ss_ <= 0.0 || var <= 0.0) return 0.0;
    const double* y = sc.data() + s;
    double dot = 0.0;
    for (std::size_t i = 0; i < m_.size(); ++i) dot += m_[i] * y[i];
    return dot / std::sqrt(ss_ * var);
  }

  // Correlations at window starts s0, s0 + 1, ..., s0 + count - 1.
  std::vector<double> corr_range(const Scanner& sc, std::size_t s0, std::size_t count) {
    const std::size_t L = m_.size();
    const std::size_t span_len = count - 1 + L;
    const std::size_t nfft = fft::fast_size(span_len);
    if (nfft != spec_size_) {
      std::vector<double> padded(nfft, 0.0);
      std::copy(m_.begin(), m_.end(), padded.begin());
      spec_ = fft::rfft(padded);
      spec_size_ = nfft;
    }
    std::vector<double> seg(nfft, 0.0);
    std::copy_n(sc.data() + s0, span_len, seg.begin());
    auto y = fft::rfft(seg);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] *= std::conj(spec_[k]);
    const auto c = fft::irfft(y, nfft);
    std::vector<double> out(count, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
      const double var = sc.css(s0 + k, L);
      if (ss_ > 0.0 && var > 0.0) out[k] = c[k] / std::sqrt(ss_ * var);
    }
    return out;
  }

 private:
  std::vector<double> m_;
  double ss_ = 0.0;
  std::vector<fft::Complex> spec_;
  std::size_t spec_size_ = 0;
};

// Lagged window correlations pearson(x[p, p+L), x[p+j, p+j+L)) for every lag j,
// updated in O(#lags) per step of p.
class LagScan {
 public:
  LagScan(const double* x, std::size_t L, std::vector<std::size_t> lags) : x_(x), L_(L), lags_(std::move(lags)) {
    sb_.resize(lags_.size());
    sbb_.resize(lags_.size());
    sab_.resize(lags_.size());
  }

  void reset(std::size_t p) {
    p_ = p;
    sa_ = saa_ = 0.0;
    for (std::size_t i = p; i < p + L_; ++i) {
      sa_ += x_[i];
      saa_ += x_[i] * x_[i];
    }
    for (std::size_t k = 0; k < lags_.size(); ++k) {
      const std::size_t j = lags_[k];
      double sb = 0.0, sbb = 0.0, sab = 0.0;
      for (std::size_t i = p; i < p + L_; ++i) {
        sb += x_[i + j];
        sbb += x_[i + j] * x_[i + j];
        sab += x_[i] * x_[i + j];
      }
      sb_[k] = sb;
      sbb_[k] = sbb;
      sab_[k] = sab;
    }
  }

  void advance() {
    const double out = x_[p_];
    const double in = x_[p_ + L_];
    sa_ += in - out;
    saa_ += in * in - out * out;
    for (std::size_t k = 0; k < lags_.size(); ++k) {
      const std::size_t j = lags_[k];
      const double bout = x_[p_ + j];
      const double bin = x_[p_ + L_ + j];
      sb_[k] += bin - bout;
      sbb_[k] += bin * bin - bout * bout;
      sab_[k] += in * bin - out * bout;
    }
    ++p_;
  }

  double corr(std::size_t k) const {
    const double n = static_cast<double>(L_);
    const double va = saa_ - sa_ * sa_ / n;
    const double vb = sbb_[k] - sb_[k] * sb_[k] / n;
    if (va <= 1e-12 * (saa_ + 1e-300) || vb <= 1e-12 * (sbb_[k] + 1e-300)) return 0.0;
    return (sab_[k] - sa_ * sb_[k] / n) / std::sqrt(va * vb);
  }

 private:
  const double* x_;
  std::size_t L_;
  std::vector<std::size_t> lags_;
  std::size_t p_ = 0;
  double sa_ = 0.0, saa_ = 0.0;
  std::vector<double> sb_, sbb_, sab_;
};

void truncate_to_min(ChunkSet& set) {
  if (set.chunks.empty()) return;
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& c : set.chunks) len = std::min(len, c.size());
  for (auto& c : set.chunks) c.resize(len);
}

}  // namespace

ChunkSet chunkify(const SampledSignal& envelope, const ChunkParams& params) {
  params.validate();
  const std::size_t S = params.S;
  const std::size_t d = params.d;
  const std::size_t g_lo = S - d;
  const std::size_t g_hi = S + d;
  const std::size_t L = g_lo;  // lookahead length = min G
  if (envelope.size() < 3 * g_hi) throw ParamError("chunkify: signal shorter than 3 (S + d) samples");

  const Scanner sc(envelope);
  const std::size_t n = sc.size();

  // (1) master search
  std::vector<std::size_t> lags;
  for (std::size_t j = g_lo; j <= g_hi; ++j) lags.push_back(j);
  LagScan scan(sc.data(), L, lags);
  constexpr std::size_t kRefresh = 4096;  // exact recompute period against drift of running sums
  std::size_t master_pos = n;
  std::size_t master_len = 0;
  const std::size_t last_p = n - g_hi - L;
  for (std::size_t p = 0; p <= last_p; ++p) {
    if (p % kRefresh == 0) {
      scan.reset(p);
    } else {
      scan.advance();
    }
    double best = -2.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < lags.size(); ++k) {
      const double r = scan.corr(k);
      if (r > best) {
        best = r;
        best_k = k;
      }
    }
    if (best > params.T) {
      master_pos = p;
      master_len = lags[best_k];
      break;
    }
  }
  if (master_len == 0) throw NoMasterError("no pair of consecutive chunks correlates above T");

  ChunkSet out;
  out.sample_rate_hz = envelope.sample_rate_hz;
  const auto master = sc.slice(master_pos, master_len);
  out.chunks.emplace_back(master.begin(), master.end());
  out.boundaries.push_back(master_pos);
  out.correlations.push_back(1.0);
  MasterRef ref(master.first(L));

  // (2)-(4) normal and sync modes
  std::size_t pos = master_pos + master_len;
  bool syncing = false;
  std::size_t consecutive = 0;
  while (true) {
    const std::size_t lo = syncing ? S : g_lo;
    const std::size_t hi = syncing ? S + params.sync_window : g_hi;
    if (pos + hi + L > n) break;
    ++out.total_iterations;

    std::size_t best_j = lo;
    double best_c = -2.0;
    if (syncing) {
      const auto c = ref.corr_range(sc, pos + lo, hi - lo + 1);
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k] > best_c) {
          best_c = c[k];
          best_j = lo + k;
        }
      }
      ++out.sync_iterations;
      if (best_c >= params.T) {
        syncing = false;
        consecutive = 0;
      } else if (++consecutive > params.max_sync_runs) {
        throw SyncBudgetError("more than " + std::to_string(params.max_sync_runs) +
                              " consecutive sync iterations");
      }
    } else {
      for (std::size_t j = lo; j <= hi; ++j) {
        const double c = ref.corr_at(sc, pos + j);
        if (c > best_c) {
          best_c = c;
          best_j = j;
        }
      }
      const auto current = sc.slice(pos, best_j);
      const double cur = pearson(out.chunks.front(), current);
      if (cur > params.T) {
        out.chunks.emplace_back(current.begin(), current.end());
        out.boundaries.push_back(pos);
        out.correlations.push_back(cur);
      } else if (best_c < params.T) {
        syncing = true;
        ++out.sync_iterations;
        ++consecutive;
      }
      // otherwise the current chunk is discarded but the phase lock holds
    }
    pos += best_j;
  }

  if (static_cast<double>(out.sync_iterations) >
      params.max_sync_fraction * static_cast<double>(out.total_iterations)) {
    throw SyncBudgetError("sync iterations exceed " + std::to_string(params.max_sync_fraction) +
                          " of all iterations");
  }
  truncate_to_min(out);
  return out;
}

ChunkSet outlier_reject(const ChunkSet& set) {
  if (set.size() < 2) throw ParamError("outlier_reject needs at least two chunks");
  const std::size_t n = set.size();
  const std::size_t master = set.master_index;

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != master) others.push_back(i);
  }
  std::stable_sort(others.begin(), others.end(),
                   [&](std::size_t a, std::size_t b) { return set.correlations[a] < set.correlations[b]; });
  const auto drop = std::min(others.size(), static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n))));
  std::vector<bool> keep(n, true);
  for (std::size_t i = 0; i < drop; ++i) keep[others[i]] = false;

  std::vector<double> peaks(n, 0.0);
  double peak_sum = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    peaks[i] = set.chunks[i].empty() ? 0.0 : *std::max_element(set.chunks[i].begin(), set.chunks[i].end());
    if (keep[i]) {
      peak_sum += peaks[i];
      ++kept;
    }
  }
  const double limit = 1.5 * peak_sum / static_cast<double>(kept);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != master && keep[i] && peaks[i] > limit) keep[i] = false;
  }

  ChunkSet out;
  out.sync_iterations = set.sync_iterations;
  out.total_iterations = set.total_iterations;
  out.sample_rate_hz = set.sample_rate_hz;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    if (i == master) out.master_index = out.chunks.size();
    out.chunks.push_back(set.chunks[i]);
    out.boundaries.push_back(set.boundaries[i]);
    out.correlations.push_back(set.correlations[i]);
  }
  if (out.size() < 2) throw DegenerateSetError("outlier rejection left only the master chunk");
  return out;
}

OutputTrace average_chunks(const ChunkSet& set) {
  if (set.chunks.empty()) throw ParamError("average_chunks needs at least one chunk");
  const std::size_t len = set.chunk_len();
  std::vector<double> avg(len, 0.0);
  for (const auto& c : set.chunks) {
    for (std::size_t i = 0; i < len; ++i) avg[i] += c[i];
  }
  for (double& v : avg) v /= static_cast<double>(set.size());
  const auto peak = static_cast<std::size_t>(std::max_element(avg.begin(), avg.end()) - avg.begin());
  OutputTrace out;
  out.values = rotate(avg, static_cast<std::ptrdiff_t>(peak));
  out.source_count = set.size();
  out.sample_rate_hz = set.sample_rate_hz;
  out.rotation = peak;
  return out;
}

ChunkSet baseline_chunkify(const SampledSignal& envelope, double refresh_rate_hz) {
  if (!(refresh_rate_hz > 0.0)) throw ParamError("refresh rate must be positive");
  const double period = envelope.sample_rate_hz / refresh_rate_hz;
  const auto len = static_cast<std::size_t>(std::floor(period));
  if (len < 2 || envelope.size() < 2 * len) throw ParamError("baseline_chunkify: signal shorter than two periods");

  ChunkSet out;
  out.sample_rate_hz = envelope.sample_rate_hz;
  const std::span<const double> x(envelope.samples);
  std::vector<double> first;
  for (std::size_t k = 0;; ++k) {
    const auto start = static_cast<std::size_t>(std::llround(static_cast<double>(k) * period));
    if (start + len > x.size()) break;
    ++out.total_iterations;
    const auto chunk = x.subspan(start, len);
    if (k == 0) {
      first.assign(chunk.begin(), chunk.end());
      out.chunks.push_back(first);
      out.boundaries.push_back(start);
      out.correlations.push_back(1.0);
      continue;
    }
    const auto m = max_corr_shift(chunk, first);
    if (m.corr < 0.05) continue;
    out.chunks.push_back(rotate(chunk, static_cast<std::ptrdiff_t>(m.shift)));
    out.boundaries.push_back(start);
    out.correlations.push_back(m.corr);
  }
  return out;
}

ChunkSet chunk_by_boundaries(const SampledSignal& envelope, std::span<const std::size_t> starts) {
  if (starts.size() < 2) throw ParamError("need at least two cycle starts");
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 1; i < starts.size(); ++i) {
    if (starts[i] <= starts[i - 1]) throw ParamError("cycle starts must increase");
    len = std::min(len, starts[i] - starts[i - 1]);
  }
  ChunkSet out;
  out.sample_rate_hz = envelope.sample_rate_hz;
  for (std::size_t s : starts) {
    if (s + len > envelope.size()) break;
    out.chunks.emplace_back(envelope.samples.begin() + static_cast<std::ptrdiff_t>(s),
                            envelope.samples.begin() + static_cast<std::ptrdiff_t>(s + len));
    out.boundaries.push_back(s);
  }
  if (out.chunks.empty()) throw ParamError("no complete cycle inside the signal");
  for (const auto& c : out.chunks) out.correlations.push_back(pearson(out.chunks.front(), c));
  out.total_iterations = out.size();
  return out;
}

double mean_chunk_correlation(const ChunkSet& set) {
  if (set.chunks.empty()) return 0.0;
  const std::size_t len = set.chunk_len();
  std::vector<double> avg(len, 0.0);
  for (const auto& c : set.chunks) {
    for (std::size_t i = 0; i < len; ++i) avg[i] += c[i];
  }
  double sum = 0.0;
  for (const auto& c : set.chunks) sum += pearson(c, avg);
  return sum / static_cast<double>(set.size());
}

double chunking_score(const ChunkSet& set, double T) {
  if (set.total_iterations == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i != set.master_index) sum += set.correlations[i];
  }
  return (sum - T * static_cast<double>(set.sync_iterations)) / static_cast<double>(set.total_iterations);
}

std::size_t find_s(std::span<const SampledSignal> envelopes, std::pair<std::size_t, std::size_t> candidates,
                   std::size_t d, double T) {
  if (envelopes.empty()) throw ParamError("find_s needs at least one signal");
  const auto [first, last] = candidates;
  if (first > last || first < 2) throw ParamError("find_s: empty candidate range");

  // scores for first-1 .. last+1
  const std::size_t lo = first - 1;
  std::vector<double> score(last - first + 3, 0.0);
  bool any_success = false;
  for (std::size_t s = lo; s <= last + 1; ++s) {
    double total = 0.0;
    for (const auto& env : envelopes) {
      ChunkParams p;
      p.S = s;
      p.d = d;
      p.T = T;
      try {
        total += chunking_score(chunkify(env, p), T);
        if (s >= first && s <= last) any_success = true;
      } catch (const NoMasterError&) {
      } catch (const SyncBudgetError&) {
      }
    }
    score[s - lo] = total / static_cast<double>(envelopes.size());
  }
  if (!any_success) throw EstimationError("chunkify failed for every candidate S on every signal");

  std::size_t best = first;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t s = first; s <= last; ++s) {
    const double m = (score[s - 1 - lo] + score[s - lo] + score[s + 1 - lo]) / 3.0;
    if (m > best_mean) {
      best_mean = m;
      best = s;
    }
  }
  return best;
}

PreprocessResult preprocess_detailed(const SampledSignal& signal, const ChunkParams& params,
                                     std::pair<double, double> carrier_band) {
  const auto [lo, hi] = carrier_band;
  if (signal.sample_rate_hz < 2.0 * hi) throw ParamError("sample rate too low for the carrier band");
  const auto env = am_demodulate(signal, lo, hi);
  PreprocessResult r;
  r.chunks = chunkify(env, params);
  r.kept = outlier_reject(r.chunks);
  r.trace = average_chunks(r.kept);
  return r;
}

OutputTrace preprocess(const SampledSignal& signal, const ChunkParams& params,
                       std::pair<double, double> carrier_band) {
  return preprocess_detailed(signal, params, carrier_band).trace;
}

OutputTrace trace_from_envelope(const SampledSignal& envelope, const ChunkParams& params) {
  return average_chunks(outlier_reject(chunkify(envelope, params)));
}

void write_output_trace(const OutputTrace& trace, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", trace.sample_rate_hz);
  os << "sample_rate," << buf << '\n' << "source_count," << trace.source_count << '\n';
  for (double v : trace.values) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

OutputTrace read_output_trace(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  OutputTrace t;
  std::string line;
  auto header = [&](const char* key) {
    if (!std::getline(is, line)) throw FormatError("truncated trace header in " + path.string());
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.substr(0, comma) != key) {
      throw FormatError(std::string("expected '") + key + "' header in " + path.string());
    }
    return line.substr(comma + 1);
  };
  try {
    t.sample_rate_hz = std::stod(header("sample_rate"));
    t.source_count = static_cast<std::size_t>(std::stoull(header("source_count")));
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      t.values.push_back(std::stod(line));
    }
  } catch (const std::logic_error&) {
    throw FormatError("malformed number in " + path.string());
  }
  if (t.values.empty()) throw FormatError("trace file has no samples: " + path.string());
  return t;
}

}  // namespace screenleak
