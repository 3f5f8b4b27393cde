#include "laud/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace laud {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Tensor read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open '" + path.string() + "' for reading");

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw DataError("'" + path.string() + "' is not a PNG file");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialization failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * h);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = pixels.data() + y * rowbytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const auto H = static_cast<int64_t>(h), W = static_cast<int64_t>(w);
  std::vector<double> out(static_cast<size_t>(3 * H * W));
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x)
      for (int64_t c = 0; c < 3; ++c)
        out[static_cast<size_t>(c * H * W + y * W + x)] =
            pixels[static_cast<size_t>(y) * rowbytes +
                   static_cast<size_t>(x) * 3 + static_cast<size_t>(c)] /
            255.0;
  return Tensor::from_data(Shape{1, 3, H, W}, std::move(out));
}

void write_png(const std::filesystem::path& path, const Tensor& img01) {
  const Shape s = img01.shape();
  if (s.b != 1 || (s.c != 3 && s.c != 1))
    throw DataError("write_png expects (1,3,H,W) or (1,1,H,W), got " + s.str());

  const int64_t plane = s.h * s.w;
  const auto channels = static_cast<size_t>(s.c);
  std::vector<png_byte> pixels(static_cast<size_t>(plane) * channels);
  std::span<const double> x = img01.data();
  for (int64_t i = 0; i < plane; ++i)
    for (int64_t c = 0; c < s.c; ++c) {
      const double v = std::floor(x[static_cast<size_t>(c * plane + i)] * 255.0 + 0.5);
      pixels[static_cast<size_t>(i) * channels + static_cast<size_t>(c)] =
          static_cast<png_byte>(std::clamp(v, 0.0, 255.0));
    }

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot open '" + path.string() + "' for writing");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialization failed");
  }
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(s.h));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(s.w),
               static_cast<png_uint_32>(s.h), 8,
               s.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  for (int64_t y = 0; y < s.h; ++y)
    row_ptrs[static_cast<size_t>(y)] =
        pixels.data() + static_cast<size_t>(y * s.w) * channels;
  png_set_rows(png, info, row_ptrs.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace laud
