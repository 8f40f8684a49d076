#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "speckle/grid.hpp"

namespace speckle {

/// On-disk layout: "SPKT", u16 version, u8 ndim, ndim x u32 dims, u8 dtype
/// (1 = f32), then the row-major payload. Everything little-endian.
inline constexpr char kTensorMagic[4] = {'S', 'P', 'K', 'T'};
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Ordered "key = value" pairs stored in the ".meta" sidecar.
using Metadata = std::vector<std::pair<std::string, std::string>>;

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

/// Writes the tensor; writes the sidecar too when `meta` is non-empty.
void write_tensor(const std::filesystem::path& path, const Tensor& tensor, const Metadata& meta = {});
Tensor read_tensor(const std::filesystem::path& path);

void write_metadata(const std::filesystem::path& path, const Metadata& meta);
/// Empty when the sidecar does not exist.
Metadata read_metadata(const std::filesystem::path& tensor_path);
/// Value for `key`, or throws IoError.
std::string metadata_value(const Metadata& meta, const std::string& key);

Tensor to_tensor(const Image& image);
Tensor to_tensor(const SpeckleSequence& seq);
/// Accepts H x W, or N x H x W with N = 1.
Image image_from_tensor(const Tensor& tensor);
/// Accepts N x H x W (or H x W as a single frame).
SpeckleSequence sequence_from_tensor(const Tensor& tensor);

/// Shortest decimal literal that round-trips the double.
std::string format_number(double value);

}  // namespace speckle
