#include "pst/correspondence.hpp"

#include <algorithm>

#include "pst/io.hpp"

namespace pst {
namespace {

RowMatrix<double> softmax_weights(const CorrelationMatrix& corr, float tau) {
  require(tau > 0.0f, "warp: tau must be positive, got " + std::to_string(tau));
  require(!corr.data.empty() && corr.data.rank() == 2, "warp: correlation must be a [rows, cols] tensor");
  return softmax_rows(corr.data.matrix().cast<double>(), static_cast<double>(tau));
}

}  // namespace

CorrelationMatrix make_correlation(Tensor data, GridShape content_grid, GridShape style_grid, Index stride) {
  require(data.rank() == 2, "correlation data must be [rows, cols]");
  CorrelationMatrix corr;
  corr.content_grid = content_grid.size() ? content_grid : GridShape{1, data.dim(0)};
  corr.style_grid = style_grid.size() ? style_grid : GridShape{1, data.dim(1)};
  require(corr.rows() == data.dim(0) && corr.cols() == data.dim(1),
          "correlation grids do not match data shape " + shape_string(data.shape()));
  corr.data = std::move(data);
  corr.stride = stride;
  return corr;
}

SemanticMask::SemanticMask(Index h, Index w, Index k, std::vector<std::int32_t> values)
    : height(h), width(w), num_classes(k), labels(std::move(values)) {
  require(h > 0 && w > 0 && k > 0, "mask dims and class count must be positive");
  require(static_cast<Index>(labels.size()) == h * w, "mask label count does not match dims");
  for (auto v : labels) require(v >= 0 && v < k, "mask label " + std::to_string(v) + " outside [0, K)");
}

Tensor SemanticMask::one_hot() const {
  Tensor out({height * width, num_classes});
  for (Index i = 0; i < height * width; ++i) out(i, labels[static_cast<std::size_t>(i)]) = 1.0f;
  return out;
}

SemanticMask read_mask(const std::filesystem::path& path, Index num_classes) {
  const RawPng raw = read_png_raw(path);
  if (raw.channels != 1) throw FormatError("mask PNG '" + path.string() + "' must be single-channel");
  std::vector<std::int32_t> labels(raw.samples.begin(), raw.samples.end());
  const Index max_label = *std::max_element(labels.begin(), labels.end());
  if (num_classes <= 0) num_classes = max_label + 1;
  if (max_label >= num_classes) {
    throw FormatError("mask '" + path.string() + "' has label " + std::to_string(max_label) + " >= num_classes " +
                      std::to_string(num_classes));
  }
  return SemanticMask(raw.height, raw.width, num_classes, std::move(labels));
}

CorrelationMatrix correlation_matrix(const FeatureMap& content, const FeatureMap& style) {
  require(content.channels == style.channels, "correlation_matrix: channel mismatch (" +
                                                  std::to_string(content.channels) + " vs " +
                                                  std::to_string(style.channels) + ")");
  require(content.positions() > 0 && style.positions() > 0, "correlation_matrix: empty feature map");
  const RowMatrix<double> c = centered_unit_rows(content.flat().cast<double>());
  const RowMatrix<double> s = centered_unit_rows(style.flat().cast<double>());

  // Plain fixed-order dot products keep corr(a, b)^T == corr(b, a) bitwise.
  Tensor data({c.rows(), s.rows()});
  const Index channels = c.cols();
  for (Index i = 0; i < c.rows(); ++i) {
    const double* ci = c.row(i).data();
    for (Index j = 0; j < s.rows(); ++j) {
      const double* sj = s.row(j).data();
      double dot = 0.0;
      for (Index k = 0; k < channels; ++k) dot += ci[k] * sj[k];
      data(i, j) = static_cast<float>(dot);
    }
  }
  return make_correlation(std::move(data), {content.grid_h, content.grid_w}, {style.grid_h, style.grid_w},
                          content.stride);
}

CorrelationMatrix transpose(const CorrelationMatrix& corr) {
  Tensor t({corr.cols(), corr.rows()});
  t.matrix() = corr.data.matrix().transpose();
  return make_correlation(std::move(t), corr.style_grid, corr.content_grid, corr.stride);
}

Tensor warp_weights(const CorrelationMatrix& corr, float tau) {
  Tensor out({corr.rows(), corr.cols()});
  out.matrix() = softmax_weights(corr, tau).cast<float>();
  return out;
}

Tensor warp(const CorrelationMatrix& corr, const Tensor& source, float tau) {
  Index channels = 0;
  if (source.rank() == 3) {
    require(source.dim(0) == corr.style_grid.h && source.dim(1) == corr.style_grid.w,
            "warp: source " + shape_string(source.shape()) + " does not match style grid");
    channels = source.dim(2);
  } else {
    require(source.rank() == 2 && source.dim(0) == corr.cols(),
            "warp: source " + shape_string(source.shape()) + " does not match style grid");
    channels = source.dim(1);
  }
  const RowMatrix<double> weights = softmax_weights(corr, tau);
  const RowMatrix<double> src =
      Eigen::Map<const RowMatrix<float>>(source.data().data(), corr.cols(), channels).cast<double>();
  const Shape shape = source.rank() == 3 ? Shape{corr.content_grid.h, corr.content_grid.w, channels}
                                         : Shape{corr.rows(), channels};
  Tensor out(shape);
  Eigen::Map<RowMatrix<float>>(out.data().data(), corr.rows(), channels) = (weights * src).cast<float>();
  return out;
}

Image warp(const CorrelationMatrix& corr, const Image& source, float tau) {
  const Index s = corr.stride;
  require(source.height == corr.style_grid.h * s && source.width == corr.style_grid.w * s,
          "warp: full-resolution source must be " + std::to_string(corr.style_grid.h * s) + "x" +
              std::to_string(corr.style_grid.w * s) + " pixels");
  const Index channels = source.channels;
  const Index patch = s * s * channels;

  RowMatrix<double> unfolded(corr.cols(), patch);
  for (Index gy = 0; gy < corr.style_grid.h; ++gy)
    for (Index gx = 0; gx < corr.style_grid.w; ++gx) {
      auto row = unfolded.row(gy * corr.style_grid.w + gx);
      for (Index dy = 0; dy < s; ++dy)
        for (Index dx = 0; dx < s; ++dx)
          for (Index c = 0; c < channels; ++c)
            row((dy * s + dx) * channels + c) = source.at(gy * s + dy, gx * s + dx, c);
    }
  const RowMatrix<double> warped = softmax_weights(corr, tau) * unfolded;

  Image out(corr.content_grid.h * s, corr.content_grid.w * s, channels);
  for (Index gy = 0; gy < corr.content_grid.h; ++gy)
    for (Index gx = 0; gx < corr.content_grid.w; ++gx) {
      const auto row = warped.row(gy * corr.content_grid.w + gx);
      for (Index dy = 0; dy < s; ++dy)
        for (Index dx = 0; dx < s; ++dx)
          for (Index c = 0; c < channels; ++c)
            out.at(gy * s + dy, gx * s + dx, c) = static_cast<float>(row((dy * s + dx) * channels + c));
    }
  return out;
}

SemanticMask downsample_mask(const SemanticMask& mask, Index stride) {
  require(stride >= 1, "downsample_mask: stride must be positive");
  const Index h = mask.height / stride;
  const Index w = mask.width / stride;
  require(h > 0 && w > 0, "downsample_mask: stride larger than mask");
  std::vector<std::int32_t> labels(static_cast<std::size_t>(h * w));
  std::vector<Index> votes(static_cast<std::size_t>(mask.num_classes));
  for (Index gy = 0; gy < h; ++gy)
    for (Index gx = 0; gx < w; ++gx) {
      std::fill(votes.begin(), votes.end(), 0);
      for (Index y = gy * stride; y < (gy + 1) * stride; ++y)
        for (Index x = gx * stride; x < (gx + 1) * stride; ++x) ++votes[static_cast<std::size_t>(mask.at(y, x))];
      // max_element returns the first maximum, i.e. the smallest label on ties.
      labels[static_cast<std::size_t>(gy * w + gx)] =
          static_cast<std::int32_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
  return SemanticMask(h, w, mask.num_classes, std::move(labels));
}

Tensor warp_mask(const CorrelationMatrix& corr, const SemanticMask& style_mask, float tau) {
  const bool at_grid = style_mask.height == corr.style_grid.h && style_mask.width == corr.style_grid.w;
  if (!at_grid) {
    require(style_mask.height >= corr.style_grid.h * corr.stride && style_mask.width >= corr.style_grid.w * corr.stride,
            "warp_mask: mask smaller than the style grid");
  }
  SemanticMask grid_mask = at_grid ? style_mask : downsample_mask(style_mask, corr.stride);
  if (!at_grid && (grid_mask.height != corr.style_grid.h || grid_mask.width != corr.style_grid.w)) {
    std::vector<std::int32_t> labels;
    labels.reserve(static_cast<std::size_t>(corr.cols()));
    for (Index y = 0; y < corr.style_grid.h; ++y)
      for (Index x = 0; x < corr.style_grid.w; ++x) labels.push_back(grid_mask.at(y, x));
    grid_mask = SemanticMask(corr.style_grid.h, corr.style_grid.w, style_mask.num_classes, std::move(labels));
  }
  return warp(corr, grid_mask.one_hot(), tau);
}

double mask_warp_loss(const SemanticMask& content_mask, const Tensor& warped_soft) {
  const Tensor target = content_mask.one_hot();
  require_same_shape(target, warped_soft, "mask_warp_loss");
  return (target.array().cast<double>() - warped_soft.array().cast<double>()).abs().mean();
}

double feature_l1_distance(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "feature_l1_distance");
  require(a.rank() == 3, "feature_l1_distance: expected [h, w, C] tensors");
  auto to_chw = [](const Tensor& hwc) {
    Tensor chw({hwc.dim(2), hwc.dim(0), hwc.dim(1)});
    for (Index y = 0; y < hwc.dim(0); ++y)
      for (Index x = 0; x < hwc.dim(1); ++x)
        for (Index c = 0; c < hwc.dim(2); ++c) chw(c, y, x) = hwc(y, x, c);
    return chw;
  };
  const FeatureOptions opts{1, std::min(a.dim(0), a.dim(1)) >= 2 ? Index{2} : Index{1}};
  const FeatureMap fa = extract_features(to_chw(a), opts);
  const FeatureMap fb = extract_features(to_chw(b), opts);
  return (fa.data.array().cast<double>() - fb.data.array().cast<double>()).abs().mean();
}

double cyclic_warp_loss(const Tensor& style, const CorrelationMatrix& corr, float tau, const TensorDistance& distance) {
  const Tensor grid_style =
      style.rank() == 2 ? style.reshaped({corr.style_grid.h, corr.style_grid.w, style.dim(1)}) : style;
  const Tensor forward = warp(corr, grid_style, tau);
  const Tensor round_trip = warp(transpose(corr), forward, tau);
  return distance(grid_style, round_trip);
}

Image similarity_map(const CorrelationMatrix& corr, Index query) {
  require(query >= 0 && query < corr.rows(), "similarity_map: query " + std::to_string(query) +
                                                 " out of range [0, " + std::to_string(corr.rows()) + ")");
  const auto row = corr.data.matrix().row(query);
  const float lo = row.minCoeff();
  const float hi = row.maxCoeff();
  const Index s = corr.stride;
  Image out(corr.style_grid.h * s, corr.style_grid.w * s, 1);
  for (Index y = 0; y < out.height; ++y)
    for (Index x = 0; x < out.width; ++x) {
      const float v = row((y / s) * corr.style_grid.w + x / s);
      out.at(y, x, 0) = hi > lo ? (v - lo) / (hi - lo) : 0.5f;
    }
  return out;
}

}  // namespace pst
