#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pst/image.hpp"
#include "pst/tensor.hpp"

namespace pst {

/// Reads an 8- or 16-bit gray/RGB PNG (alpha dropped) scaled to [0, 1].
/// Palette images are rejected with FormatError.
Image read_png(const std::filesystem::path& path);

/// Writes an 8-bit PNG using round(v * 255) with halves rounded up.
void write_png(const Image& image, const std::filesystem::path& path);

/// Raw integer samples of a single-channel PNG (label maps).
struct RawPng {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};
RawPng read_png_raw(const std::filesystem::path& path);

/// NPY v1.0, little-endian f32, C order, rank 1..4.
Tensor read_npy(const std::filesystem::path& path);
void write_npy(const Tensor& tensor, const std::filesystem::path& path);

std::uint8_t quantize_u8(float v);

}  // namespace pst
