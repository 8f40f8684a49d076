#include "speckle/png_export.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "speckle/errors.hpp"
#include "speckle/tensor_io.hpp"

namespace speckle {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

PngScaling export_png(const Image& map, const std::filesystem::path& path) {
  if (map.empty()) throw std::invalid_argument("export_png: empty map");
  const auto [lo_it, hi_it] = std::minmax_element(map.begin(), map.end());
  const PngScaling scaling{*lo_it, *hi_it};
  const double range = scaling.max - scaling.min;

  std::vector<png_byte> pixels(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    pixels[i] = range > 0.0 ? static_cast<png_byte>(std::lround(255.0 * (map[i] - scaling.min) / range)) : 128;
  }

  File file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(map.cols()), static_cast<png_uint_32>(map.rows()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < map.rows(); ++r) png_write_row(png, pixels.data() + static_cast<std::size_t>(r) * map.cols());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);

  write_metadata(sidecar_path(path), {{"scaling", "min-max"},
                                      {"min", format_number(scaling.min)},
                                      {"max", format_number(scaling.max)}});
  return scaling;
}

Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path) {
  File file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialization failed");
  }
  Grid<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failed reading " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + " is not an 8-bit grayscale PNG");
  }
  const auto width = static_cast<int>(png_get_image_width(png, info));
  const auto height = static_cast<int>(png_get_image_height(png, info));
  out = Grid<std::uint8_t>(height, width);
  for (int r = 0; r < height; ++r) png_read_row(png, out.data() + static_cast<std::size_t>(r) * width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace speckle
