#include <doctest.h>

#include "fixtures.hpp"
#include "sarnarrator/errors.hpp"
#include "sarnarrator/image.hpp"
#include "sarnarrator/util.hpp"

using namespace sarnarrator;

TEST_CASE("png round trip preserves every pixel") {
  fixtures::TempDir dir;
  const ImageU8 original = fixtures::gradient_image(37, 23, 4);
  const std::string path = dir.file("round.png");
  save_png(path, original);
  const ImageU8 loaded = load_png(path);
  CHECK(loaded.width == original.width);
  CHECK(loaded.height == original.height);
  CHECK(loaded.channels == 3);
  CHECK(loaded.pixels == original.pixels);
}

TEST_CASE("png encoding is byte-deterministic") {
  fixtures::TempDir dir;
  const ImageU8 image = fixtures::noise_image(64, 64, 11);
  const std::string a = dir.file("a.png");
  const std::string b = dir.file("b.png");
  save_png(a, image);
  save_png(b, image);
  CHECK(read_file(a) == read_file(b));
}

TEST_CASE("unreadable and corrupt files raise UnreadableImage") {
  fixtures::TempDir dir;
  CHECK_THROWS_WITH_AS(load_png(dir.file("absent.png")),
                       doctest::Contains("absent.png"), Error);
  const std::string junk = dir.file("junk.png");
  write_file(junk, "definitely not a png");
  try {
    load_png(junk);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == errc::unreadable_image);
  }
}

TEST_CASE("to_gray uses integer luma weights and is idempotent") {
  ImageU8 rgb;
  rgb.width = 2;
  rgb.height = 1;
  rgb.channels = 3;
  rgb.pixels = {255, 0, 0, 0, 0, 255};
  const ImageU8 gray = to_gray(rgb);
  CHECK(gray.channels == 1);
  REQUIRE(gray.pixels.size() == 2);
  // Standard BT.601-style integer weighting keeps red brighter than blue.
  CHECK(gray.pixels[0] > gray.pixels[1]);
  const ImageU8 again = to_gray(gray);
  CHECK(again.pixels == gray.pixels);
}

TEST_CASE("gray png loads back as single channel") {
  fixtures::TempDir dir;
  ImageU8 gray;
  gray.width = 9;
  gray.height = 5;
  gray.channels = 1;
  gray.pixels.assign(45, 0);
  for (size_t i = 0; i < gray.pixels.size(); ++i)
    gray.pixels[i] = static_cast<uint8_t>(i * 5);
  const std::string path = dir.file("gray.png");
  save_png(path, gray);
  const ImageU8 loaded = load_png(path);
  CHECK(loaded.channels == 1);
  CHECK(loaded.pixels == gray.pixels);
}
