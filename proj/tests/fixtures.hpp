#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sarnarrator/image.hpp"
#include "sarnarrator/types.hpp"

namespace fixtures {

// Self-deleting unique directory under the system temp root.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  // Joins against the temp root and creates parent directories.
  std::string file(const std::string& rel) const;

 private:
  std::string path_;
};

// Smooth deterministic RGB pattern; distinct keys give visibly different
// low-frequency content.
sarnarrator::ImageU8 gradient_image(int64_t width, int64_t height,
                                    uint64_t key);

// Uniform random pixels.
sarnarrator::ImageU8 noise_image(int64_t width, int64_t height, uint64_t seed);

// Clamped per-pixel brightness shift.
sarnarrator::ImageU8 shift_brightness(const sarnarrator::ImageU8& image,
                                      int delta);

// Perturbs `count` random pixels by +/- 6; a small perceptual change.
sarnarrator::ImageU8 perturb_pixels(const sarnarrator::ImageU8& image,
                                    uint64_t seed, int count);

// Random word soup over a tiny vocabulary (for metric corpora).
std::string word_soup(std::mt19937_64& rng, int min_words, int max_words);

}  // namespace fixtures
