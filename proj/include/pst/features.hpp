#pragma once

#include <filesystem>

#include "pst/image.hpp"
#include "pst/tensor.hpp"

namespace pst {

struct FeatureOptions {
  Index stride = 8;
  Index scales = 3;
};

/// Per-cell appearance features on a regular grid, data shaped [grid_h, grid_w, C].
struct FeatureMap {
  Index grid_h = 0;
  Index grid_w = 0;
  Index channels = 0;
  Index stride = 1;
  Index scales = 1;
  Tensor data;

  Index positions() const { return grid_h * grid_w; }
  /// [positions, channels] view of the features.
  Tensor::ConstMatrixMap flat() const {
    return Tensor::ConstMatrixMap(data.data().data(), positions(), channels);
  }
};

/// Number of features per cell per pyramid level for an input with `image_channels`.
inline Index features_per_scale(Index image_channels) { return 2 * image_channels + 2; }

/// Toy multi-scale appearance features.
///
/// The image is cropped to whole cells. For each pyramid level l (box
/// downsampled by 2^l) every cell contributes, in order: the mean of each
/// channel, the mean absolute forward difference of luma along x and along y,
/// and the standard deviation of each channel. Statistics at level l are
/// taken over a `stride` x `stride` window of the downsampled image centred
/// on the cell, so coarser levels see a wider context. Out-of-image window
/// pixels replicate the border. Luma is Rec.601 for RGB, the channel itself
/// for gray and the channel mean otherwise.
FeatureMap extract_features(const Image& image, const FeatureOptions& options = {});

/// Same recipe on a planar [C, H, W] tensor (values are not clamped).
FeatureMap extract_features(const Tensor& chw, const FeatureOptions& options = {});

/// Z-scores every feature channel over the grid cells of one map (channels
/// with no spread become 0). Removes per-image offsets so the correlation
/// compares the layout of features rather than their absolute level.
FeatureMap standardize_channels(const FeatureMap& features, double eps = 1e-8);

/// Writes `<path>` as NPY and `<path stem>.json` with `{"stride": n, "scales": k}`.
void save_feature_map(const FeatureMap& features, const std::filesystem::path& npy_path);
FeatureMap load_feature_map(const std::filesystem::path& npy_path);

}  // namespace pst
