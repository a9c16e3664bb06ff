#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sarnarrator {

// Interleaved 8-bit raster; channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
  int64_t width = 0;
  int64_t height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;

  int64_t pixel_count() const { return width * height; }
};

// Decodes a PNG. Palette, gray and 16-bit inputs are expanded; alpha is
// stripped; output is 1- or 3-channel 8-bit. Throws UnreadableImage.
ImageU8 load_png(const std::string& path);

// Deterministic encoder (fixed zlib settings) so fixtures are reproducible.
void save_png(const std::string& path, const ImageU8& image);

ImageU8 to_gray(const ImageU8& image);
ImageU8 to_rgb(const ImageU8& image);

}  // namespace sarnarrator
