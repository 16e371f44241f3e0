#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shearo/core/tensor.hpp"

namespace shearo {

/// Portable binary tensor file: 16-byte header (4-byte magic, u32 height,
/// u32 width, u32 dtype tag = 1 for 32-bit float, little-endian) followed by
/// row-major float pixels. Phase images use magic "PHZ1", anomaly heatmaps
/// "HMP1".
inline constexpr char kPhaseMagic[5] = "PHZ1";
inline constexpr char kHeatmapMagic[5] = "HMP1";

void write_tensor_file(const std::filesystem::path& path, const Tensor& hw, const char* magic);
Tensor read_tensor_file(const std::filesystem::path& path, const char* expected_magic);

/// 8-bit grayscale PNG of a (H,W) tensor, mapping [lo, hi) linearly to
/// [0, 255]. Values outside the range are clamped.
void write_png_gray(const std::filesystem::path& path, const Tensor& hw, double lo, double hi);

/// 8-bit RGB PNG from an interleaved buffer of size width*height*3.
void write_png_rgb(const std::filesystem::path& path, std::int64_t width, std::int64_t height,
                   const std::vector<std::uint8_t>& rgb);

}  // namespace shearo
