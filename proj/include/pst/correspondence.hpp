#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "pst/features.hpp"
#include "pst/image.hpp"
#include "pst/tensor.hpp"

namespace pst {

inline constexpr float kDefaultTau = 0.01f;

struct GridShape {
  Index h = 0;
  Index w = 0;
  Index size() const { return h * w; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Zero-mean normalized cross-correlation between content cells (rows) and
/// style cells (columns). `stride` is the pixel size of one cell.
struct CorrelationMatrix {
  Tensor data;  // [rows, cols]
  GridShape content_grid;
  GridShape style_grid;
  Index stride = 1;

  Index rows() const { return content_grid.size(); }
  Index cols() const { return style_grid.size(); }
  float operator()(Index i, Index j) const { return data(i, j); }
};

/// Builds a correlation matrix from a raw [rows, cols] tensor; grids default
/// to 1 x rows and 1 x cols.
CorrelationMatrix make_correlation(Tensor data, GridShape content_grid = {}, GridShape style_grid = {},
                                   Index stride = 1);

/// Integer label map over `num_classes` classes.
struct SemanticMask {
  Index height = 0;
  Index width = 0;
  Index num_classes = 1;
  std::vector<std::int32_t> labels;

  SemanticMask() = default;
  SemanticMask(Index h, Index w, Index k, std::vector<std::int32_t> values);

  std::int32_t at(Index y, Index x) const { return labels[static_cast<std::size_t>(y * width + x)]; }
  /// [height * width, num_classes] one-hot expansion.
  Tensor one_hot() const;
};

/// Reads a single-channel label PNG; `num_classes` <= 0 means max label + 1.
SemanticMask read_mask(const std::filesystem::path& path, Index num_classes = 0);

/// Row-stable softmax of `logits / tau` along each row.
template <class Derived>
RowMatrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits,
                                                 typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out = logits / tau;
  for (Index i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return out;
}

/// Centres every row on its own mean and scales it to unit L2 norm; rows with
/// norm below `eps` become zero.
template <class Derived>
RowMatrix<typename Derived::Scalar> centered_unit_rows(const Eigen::MatrixBase<Derived>& features, double eps = 1e-8) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out = features;
  for (Index i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    row.array() -= row.mean();
    const Scalar norm = row.norm();
    row /= std::max(norm, static_cast<Scalar>(eps));
  }
  return out;
}

/// Correlation of every content feature vector against every style vector.
CorrelationMatrix correlation_matrix(const FeatureMap& content, const FeatureMap& style);

/// Swaps the roles of content and style.
CorrelationMatrix transpose(const CorrelationMatrix& corr);

/// softmax_j(M(i, j) / tau) as a [rows, cols] tensor.
Tensor warp_weights(const CorrelationMatrix& corr, float tau = kDefaultTau);

/// Grid mode: `source` is [style_h, style_w, C] or [cols, C]; the result has
/// the matching content-grid shape.
Tensor warp(const CorrelationMatrix& corr, const Tensor& source, float tau = kDefaultTau);

/// Full-resolution mode: `source` is exactly style_grid * stride pixels. Every
/// output pixel uses the softmax row of its content cell and gathers source
/// pixels at the same offset inside each style cell.
Image warp(const CorrelationMatrix& corr, const Image& source, float tau = kDefaultTau);

/// Per-cell majority vote (ties go to the smallest label); excess border
/// pixels are ignored.
SemanticMask downsample_mask(const SemanticMask& mask, Index stride);

/// Soft one-hot [rows, K] of the style mask warped onto the content grid. A
/// mask at grid resolution is used as is, otherwise it is majority-downsampled
/// by the correlation stride first.
Tensor warp_mask(const CorrelationMatrix& corr, const SemanticMask& style_mask, float tau = kDefaultTau);

/// Mean absolute difference between one_hot(content_mask) and `warped_soft`.
double mask_warp_loss(const SemanticMask& content_mask, const Tensor& warped_soft);

using TensorDistance = std::function<double(const Tensor&, const Tensor&)>;

/// Mean L1 between toy features of two [h, w, C] tensors (stride 1, up to two
/// pyramid levels). Used as the default perceptual distance.
double feature_l1_distance(const Tensor& a, const Tensor& b);

/// distance(style, warp(corr^T, warp(corr, style))).
double cyclic_warp_loss(const Tensor& style, const CorrelationMatrix& corr, float tau = kDefaultTau,
                        const TensorDistance& distance = feature_l1_distance);

/// Row `query` of the correlation as a gray heatmap on the style grid,
/// upsampled by the stride and min-max normalized (constant rows give 0.5).
Image similarity_map(const CorrelationMatrix& corr, Index query);

}  // namespace pst
