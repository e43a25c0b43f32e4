#pragma once

#include <vector>

#include "pst/tensor.hpp"

namespace pst {

/// Interleaved (HWC) image with 1 or 3 channels and values in [0, 1].
struct Image {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(Index h, Index w, Index c, float fill = 0.0f);

  float& at(Index y, Index x, Index c) { return data[static_cast<std::size_t>((y * width + x) * channels + c)]; }
  float at(Index y, Index x, Index c) const {
    return data[static_cast<std::size_t>((y * width + x) * channels + c)];
  }

  bool empty() const { return data.empty(); }
  bool same_dims(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Image -> planar [C, H, W] tensor.
Tensor to_tensor(const Image& image);

/// Planar [C, H, W] tensor (C = 1 or 3) -> image, clamping values into [0, 1].
Image to_image(const Tensor& chw);

/// Replicate-pads on the right and bottom so both dims are multiples of `multiple`.
Image pad_to_multiple(const Image& image, Index multiple);

Image crop(const Image& image, Index height, Index width);

/// Box average over non-overlapping factor x factor blocks (remainder dropped).
Tensor box_downsample(const Tensor& chw, Index factor);

/// Mean absolute difference over all samples; images must match in dims.
double mean_abs_diff(const Image& a, const Image& b);

}  // namespace pst
