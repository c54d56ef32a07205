#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "screenleak/types.hpp"

namespace screenleak {

struct ChunkParams {
  /// Regular cycle length guess in samples.
  std::size_t S = 3200;
  /// Allowed drift; normal-mode chunk sizes are S-d .. S+d.
  std::size_t d = 1;
  /// Correlation threshold.
  double T = 0.9;
  std::size_t sync_window = 6000;
  std::size_t max_sync_runs = 3;
  double max_sync_fraction = 0.15;

  void validate() const;
};

struct ChunkSet {
  std::vector<std::vector<double>> chunks;
  std::size_t master_index = 0;
  /// Start sample of each chunk in the source signal.
  std::vector<std::size_t> boundaries;
  /// Pearson correlation of each chunk with the master (1 for the master itself).
  std::vector<double> correlations;
  std::size_t sync_iterations = 0;
  std::size_t total_iterations = 0;
  double sample_rate_hz = 0.0;

  std::size_t size() const { return chunks.size(); }
  std::size_t chunk_len() const { return chunks.empty() ? 0 : chunks.front().size(); }
};

/// One refresh cycle of averaged envelope, rotated so that values[0] is the maximum.
struct OutputTrace {
  std::vector<double> values;
  std::size_t source_count = 0;
  double sample_rate_hz = 0.0;
  /// Left rotation applied to the plain average to bring the maximum to index 0.
  std::size_t rotation = 0;
};

/// Segments a demodulated envelope into refresh-cycle chunks that stay phase-locked to a
/// master chunk despite drift, W/W+1 jitter and abnormal cycles.
ChunkSet chunkify(const SampledSignal& envelope, const ChunkParams& params);

/// Drops the ceil(10%) chunks least correlated with the master, then every chunk whose
/// peak exceeds 1.5x the mean peak. The master always survives.
ChunkSet outlier_reject(const ChunkSet& chunks);

OutputTrace average_chunks(const ChunkSet& chunks);

/// Fixed-period segmentation at sample_rate / refresh_rate; each chunk is rotated onto the
/// first by max_corr_shift and dropped when that correlation is below 0.05.
ChunkSet baseline_chunkify(const SampledSignal& envelope, double refresh_rate_hz);

/// Chunks cut at known cycle starts (a vsync probe), all truncated to the shortest gap.
ChunkSet chunk_by_boundaries(const SampledSignal& envelope, std::span<const std::size_t> starts);

/// Mean Pearson correlation of each chunk with the sample-wise mean of all chunks.
double mean_chunk_correlation(const ChunkSet& chunks);

/// Score of one chunkify run used by find_s:
/// (sum of non-master chunk correlations - T * sync_iterations) / total_iterations.
double chunking_score(const ChunkSet& chunks, double T);

/// Brute-forces S over [first, last] on demodulated envelopes. Failed runs score 0 and the
/// winner maximizes the mean score of S-1, S, S+1; ties go to the smaller S.
std::size_t find_s(std::span<const SampledSignal> envelopes, std::pair<std::size_t, std::size_t> candidates,
                   std::size_t d, double T);

/// bandpass -> envelope -> chunkify -> outlier_reject -> average_chunks.
OutputTrace preprocess(const SampledSignal& signal, const ChunkParams& params,
                       std::pair<double, double> carrier_band = {27500.0, 38000.0});

/// Like preprocess but also returns the intermediate chunk sets (before and after rejection).
struct PreprocessResult {
  OutputTrace trace;
  ChunkSet chunks;
  ChunkSet kept;
};
PreprocessResult preprocess_detailed(const SampledSignal& signal, const ChunkParams& params,
                                     std::pair<double, double> carrier_band = {27500.0, 38000.0});

/// Envelope-domain pipeline: chunkify -> outlier_reject -> average_chunks.
OutputTrace trace_from_envelope(const SampledSignal& envelope, const ChunkParams& params);

void write_output_trace(const OutputTrace& trace, const std::filesystem::path& path);
OutputTrace read_output_trace(const std::filesystem::path& path);

}  // namespace screenleak
