#include "sarnarrator/image.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

#include "sarnarrator/errors.hpp"

namespace sarnarrator {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageU8 load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) raise(errc::unreadable_image, "cannot open image: " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 ||
      png_sig_cmp(header, 0, 8) != 0) {
    raise(errc::unreadable_image, "not a PNG file: " + path);
  }

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) raise(errc::unreadable_image, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    raise(errc::unreadable_image, "libpng init failed");
  }

  ImageU8 img;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(errc::unreadable_image, "corrupt PNG: " + path);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_byte updated = png_get_color_type(png, info);
  const int channels = (updated == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  if (updated != PNG_COLOR_TYPE_GRAY && updated != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(errc::unreadable_image, "unsupported PNG color type: " + path);
  }

  img.width = w;
  img.height = h;
  img.channels = channels;
  img.pixels.resize(static_cast<size_t>(w) * h * channels);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) {
    row_ptrs[y] = img.pixels.data() + static_cast<size_t>(y) * w * channels;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_png(const std::string& path, const ImageU8& image) {
  if (image.width <= 0 || image.height <= 0 ||
      (image.channels != 1 && image.channels != 3)) {
    raise(errc::io_error, "cannot encode image with invalid shape: " + path);
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) raise(errc::io_error, "cannot create image file: " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) raise(errc::io_error, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    raise(errc::io_error, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(errc::io_error, "PNG encode failed: " + path);
  }

  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> row_ptrs(image.height);
  for (int64_t y = 0; y < image.height; ++y) {
    row_ptrs[static_cast<size_t>(y)] = const_cast<png_bytep>(
        image.pixels.data() + static_cast<size_t>(y) * image.width * image.channels);
  }
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageU8 to_gray(const ImageU8& image) {
  if (image.channels == 1) return image;
  ImageU8 out;
  out.width = image.width;
  out.height = image.height;
  out.channels = 1;
  out.pixels.resize(static_cast<size_t>(image.pixel_count()));
  // Integer BT.601 luma; exact and platform-independent.
  for (int64_t i = 0; i < image.pixel_count(); ++i) {
    const uint8_t* p = image.pixels.data() + i * 3;
    const uint32_t luma = 77u * p[0] + 150u * p[1] + 29u * p[2];
    out.pixels[static_cast<size_t>(i)] = static_cast<uint8_t>((luma + 128) >> 8);
  }
  return out;
}

ImageU8 to_rgb(const ImageU8& image) {
  if (image.channels == 3) return image;
  ImageU8 out;
  out.width = image.width;
  out.height = image.height;
  out.channels = 3;
  out.pixels.resize(static_cast<size_t>(image.pixel_count()) * 3);
  for (int64_t i = 0; i < image.pixel_count(); ++i) {
    const uint8_t g = image.pixels[static_cast<size_t>(i)];
    uint8_t* p = out.pixels.data() + i * 3;
    p[0] = p[1] = p[2] = g;
  }
  return out;
}

}  // namespace sarnarrator
