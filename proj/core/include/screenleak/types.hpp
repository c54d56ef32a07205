#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace screenleak {

/// Uniformly sampled real waveform. Amplitudes are nominally within [-1, 1].
struct SampledSignal {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return sample_rate_hz > 0.0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

/// Row-major 8-bit grayscale image; 0 is black, 255 is white.
struct FrameImage {
  int height_px = 0;
  int width_px = 0;
  std::vector<std::uint8_t> pixels;

  FrameImage() = default;
  FrameImage(int height, int width, std::uint8_t fill = 255)
      : height_px(height),
        width_px(width),
        pixels(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}

  std::uint8_t& at(int row, int col) {
    return pixels[static_cast<std::size_t>(row) * static_cast<std::size_t>(width_px) +
                  static_cast<std::size_t>(col)];
  }
  std::uint8_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * static_cast<std::size_t>(width_px) +
                  static_cast<std::size_t>(col)];
  }
  bool valid() const {
    return height_px > 0 && width_px > 0 &&
           pixels.size() == static_cast<std::size_t>(height_px) * static_cast<std::size_t>(width_px);
  }

  friend bool operator==(const FrameImage&, const FrameImage&) = default;
};

/// Fills rows [row0, row1) x cols [col0, col1) with a gray level, clipped to the image.
void fill_rect(FrameImage& img, int row0, int row1, int col0, int col1, std::uint8_t value);

}  // namespace screenleak
