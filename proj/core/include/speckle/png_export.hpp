#pragma once

#include <cstdint>
#include <filesystem>

#include "speckle/grid.hpp"

namespace speckle {

struct PngScaling {
  double min = 0.0;
  double max = 0.0;
};

/// Min-max scales the map to 0..255 (a constant map becomes mid-gray 128),
/// writes an 8-bit grayscale PNG, and records the scaling in "<path>.meta".
PngScaling export_png(const Image& map, const std::filesystem::path& path);

/// Reads an 8-bit grayscale PNG.
Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path);

}  // namespace speckle
