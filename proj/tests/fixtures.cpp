#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iterator>
#include <random>
#include <stdexcept>

namespace fixtures {

namespace fs = std::filesystem;
using sarnarrator::ImageU8;

TempDir::TempDir() {
  std::random_device rd;
  for (int attempt = 0; attempt < 64; ++attempt) {
    fs::path candidate = fs::temp_directory_path() /
                         ("sarnarrator-test-" + std::to_string(rd()));
    std::error_code ec;
    if (fs::create_directory(candidate, ec)) {
      path_ = candidate.string();
      return;
    }
  }
  throw std::runtime_error("cannot create a unique temp directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string TempDir::file(const std::string& rel) const {
  const fs::path full = fs::path(path_) / rel;
  std::error_code ec;
  fs::create_directories(full.parent_path(), ec);
  return full.string();
}

ImageU8 gradient_image(int64_t width, int64_t height, uint64_t key) {
  ImageU8 image;
  image.width = width;
  image.height = height;
  image.channels = 3;
  image.pixels.resize(static_cast<size_t>(width) * height * 3);
  const double fx = 1.0 + static_cast<double>(key % 7);
  const double fy = 1.0 + static_cast<double>((key / 7) % 7);
  const double phase = 0.37 * static_cast<double>(key % 17);
  const double tau = 6.283185307179586;
  for (int64_t y = 0; y < height; ++y) {
    for (int64_t x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / static_cast<double>(width);
      const double v = static_cast<double>(y) / static_cast<double>(height);
      const double wave = std::sin(tau * (fx * u + fy * v) + phase);
      const int g = std::clamp(
          static_cast<int>(std::llround(128.0 + 96.0 * wave)), 0, 255);
      const size_t at = (static_cast<size_t>(y) * width + x) * 3;
      image.pixels[at] = static_cast<uint8_t>(g);
      image.pixels[at + 1] = static_cast<uint8_t>((g * 3 + 64) % 256);
      image.pixels[at + 2] = static_cast<uint8_t>(255 - g);
    }
  }
  return image;
}

ImageU8 noise_image(int64_t width, int64_t height, uint64_t seed) {
  ImageU8 image;
  image.width = width;
  image.height = height;
  image.channels = 3;
  image.pixels.resize(static_cast<size_t>(width) * height * 3);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& px : image.pixels) px = static_cast<uint8_t>(byte(rng));
  return image;
}

ImageU8 shift_brightness(const ImageU8& image, int delta) {
  ImageU8 out = image;
  for (auto& px : out.pixels) {
    px = static_cast<uint8_t>(std::clamp(static_cast<int>(px) + delta, 0, 255));
  }
  return out;
}

ImageU8 perturb_pixels(const ImageU8& image, uint64_t seed, int count) {
  ImageU8 out = image;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, out.pixels.size() - 1);
  for (int i = 0; i < count; ++i) {
    const size_t at = pick(rng);
    const int delta = (rng() & 1) ? 6 : -6;
    out.pixels[at] = static_cast<uint8_t>(
        std::clamp(static_cast<int>(out.pixels[at]) + delta, 0, 255));
  }
  return out;
}

std::string word_soup(std::mt19937_64& rng, int min_words, int max_words) {
  static const char* vocabulary[] = {
      "ship",  "ships",  "harbor", "water",  "bridge", "river", "field",
      "large", "small",  "near",   "the",    "a",      "is",    "are",
      "on",    "in",     "left",   "right",  "dock",   "road",  "island",
      "long",  "narrow", "wide",   "crossing",
  };
  constexpr int kVocab = static_cast<int>(std::size(vocabulary));
  std::uniform_int_distribution<int> length(min_words, max_words);
  std::uniform_int_distribution<int> pick(0, kVocab - 1);
  const int n = length(rng);
  std::string text;
  for (int i = 0; i < n; ++i) {
    if (i > 0) text += ' ';
    text += vocabulary[pick(rng)];
  }
  return text;
}

}  // namespace fixtures
