#include "pst/image.hpp"

#include <cmath>

namespace pst {

Image::Image(Index h, Index w, Index c, float fill) : height(h), width(w), channels(c) {
  require(h > 0 && w > 0, "image dims must be positive");
  require(c == 1 || c == 3, "image must have 1 or 3 channels");
  data.assign(static_cast<std::size_t>(h * w * c), fill);
}

Tensor to_tensor(const Image& image) {
  require(!image.empty(), "to_tensor: empty image");
  Tensor out({image.channels, image.height, image.width});
  for (Index c = 0; c < image.channels; ++c)
    for (Index y = 0; y < image.height; ++y)
      for (Index x = 0; x < image.width; ++x) out(c, y, x) = image.at(y, x, c);
  return out;
}

Image to_image(const Tensor& chw) {
  require(chw.rank() == 3, "to_image: expected [C, H, W], got " + shape_string(chw.shape()));
  Image out(chw.dim(1), chw.dim(2), chw.dim(0));
  for (Index c = 0; c < out.channels; ++c)
    for (Index y = 0; y < out.height; ++y)
      for (Index x = 0; x < out.width; ++x) {
        const float v = chw(c, y, x);
        out.at(y, x, c) = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
      }
  return out;
}

Image pad_to_multiple(const Image& image, Index multiple) {
  require(multiple > 0, "pad multiple must be positive");
  const Index h = (image.height + multiple - 1) / multiple * multiple;
  const Index w = (image.width + multiple - 1) / multiple * multiple;
  if (h == image.height && w == image.width) return image;
  Image out(h, w, image.channels);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < image.channels; ++c)
        out.at(y, x, c) = image.at(std::min(y, image.height - 1), std::min(x, image.width - 1), c);
  return out;
}

Image crop(const Image& image, Index height, Index width) {
  require(height <= image.height && width <= image.width, "crop larger than image");
  if (height == image.height && width == image.width) return image;
  Image out(height, width, image.channels);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x)
      for (Index c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(y, x, c);
  return out;
}

Tensor box_downsample(const Tensor& chw, Index factor) {
  require(chw.rank() == 3, "box_downsample: expected [C, H, W]");
  require(factor >= 1, "box_downsample: factor must be >= 1");
  if (factor == 1) return chw;
  const Index h = chw.dim(1) / factor;
  const Index w = chw.dim(2) / factor;
  require(h > 0 && w > 0, "box_downsample: factor " + std::to_string(factor) + " exceeds tensor dims");
  Tensor out({chw.dim(0), h, w});
  const double norm = 1.0 / static_cast<double>(factor * factor);
  for (Index c = 0; c < chw.dim(0); ++c) {
    const auto src = chw.plane(c);
    auto dst = out.plane(c);
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x)
        dst(y, x) = static_cast<float>(
            src.block(y * factor, x * factor, factor, factor).template cast<double>().sum() * norm);
  }
  return out;
}

double mean_abs_diff(const Image& a, const Image& b) {
  require(a.same_dims(b), "mean_abs_diff: image dims differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(double(a.data[i]) - double(b.data[i]));
  return acc / static_cast<double>(a.data.size());
}

}  // namespace pst
