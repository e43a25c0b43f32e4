#include "pst/features.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "pst/io.hpp"

namespace pst {
namespace {

RowMatrix<float> luma_of(const Tensor& chw) {
  const Index channels = chw.dim(0);
  if (channels == 1) return chw.plane(0);
  if (channels == 3) return 0.299f * chw.plane(0) + 0.587f * chw.plane(1) + 0.114f * chw.plane(2);
  RowMatrix<float> sum = chw.plane(0);
  for (Index c = 1; c < channels; ++c) sum += chw.plane(c);
  return sum / static_cast<float>(channels);
}

Index clamp_index(Index v, Index hi) { return std::clamp<Index>(v, 0, hi - 1); }

}  // namespace

FeatureMap extract_features(const Image& image, const FeatureOptions& options) {
  return extract_features(to_tensor(image), options);
}

FeatureMap extract_features(const Tensor& chw, const FeatureOptions& options) {
  require(chw.rank() == 3, "extract_features: expected [C, H, W], got " + shape_string(chw.shape()));
  require(options.stride >= 1, "extract_features: stride must be positive");
  require(options.scales >= 1, "extract_features: scales must be positive");
  const Index channels = chw.dim(0);
  const Index height = chw.dim(1);
  const Index width = chw.dim(2);
  require(options.stride <= height && options.stride <= width,
          "extract_features: stride " + std::to_string(options.stride) + " larger than image " +
              std::to_string(height) + "x" + std::to_string(width));

  FeatureMap fm;
  fm.grid_h = height / options.stride;
  fm.grid_w = width / options.stride;
  fm.stride = options.stride;
  fm.scales = options.scales;
  const Index per_scale = features_per_scale(channels);
  fm.channels = per_scale * options.scales;
  fm.data = Tensor({fm.grid_h, fm.grid_w, fm.channels});

  Tensor level({channels, fm.grid_h * options.stride, fm.grid_w * options.stride});
  for (Index c = 0; c < channels; ++c)
    level.plane(c) = chw.plane(c).topLeftCorner(level.dim(1), level.dim(2));

  const Index win = options.stride;
  const double norm = 1.0 / static_cast<double>(win * win);
  for (Index l = 0; l < options.scales; ++l) {
    const Index factor = Index{1} << l;
    const Tensor ds = box_downsample(level, factor);
    const Index h = ds.dim(1);
    const Index w = ds.dim(2);
    const RowMatrix<float> luma = luma_of(ds);
    RowMatrix<float> gx(h, w), gy(h, w);
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        gx(y, x) = std::abs(luma(y, std::min(x + 1, w - 1)) - luma(y, x));
        gy(y, x) = std::abs(luma(std::min(y + 1, h - 1), x) - luma(y, x));
      }

    for (Index gyi = 0; gyi < fm.grid_h; ++gyi) {
      const auto y0 = static_cast<Index>(std::floor((gyi + 0.5) * options.stride / factor - win / 2.0));
      for (Index gxi = 0; gxi < fm.grid_w; ++gxi) {
        const auto x0 = static_cast<Index>(std::floor((gxi + 0.5) * options.stride / factor - win / 2.0));
        float* cell = &fm.data(gyi, gxi, l * per_scale);
        double sum_gx = 0.0, sum_gy = 0.0;
        for (Index dy = 0; dy < win; ++dy)
          for (Index dx = 0; dx < win; ++dx) {
            const Index y = clamp_index(y0 + dy, h), x = clamp_index(x0 + dx, w);
            sum_gx += gx(y, x);
            sum_gy += gy(y, x);
          }
        for (Index c = 0; c < channels; ++c) {
          const auto plane = ds.plane(c);
          double sum = 0.0;
          for (Index dy = 0; dy < win; ++dy)
            for (Index dx = 0; dx < win; ++dx) sum += plane(clamp_index(y0 + dy, h), clamp_index(x0 + dx, w));
          const double mean = sum * norm;
          double var = 0.0;
          for (Index dy = 0; dy < win; ++dy)
            for (Index dx = 0; dx < win; ++dx) {
              const double d = plane(clamp_index(y0 + dy, h), clamp_index(x0 + dx, w)) - mean;
              var += d * d;
            }
          cell[c] = static_cast<float>(mean);
          cell[channels + 2 + c] = static_cast<float>(std::sqrt(var * norm));
        }
        cell[channels] = static_cast<float>(sum_gx * norm);
        cell[channels + 1] = static_cast<float>(sum_gy * norm);
      }
    }
  }
  return fm;
}

FeatureMap standardize_channels(const FeatureMap& features, double eps) {
  require(features.positions() > 0, "standardize_channels: empty feature map");
  FeatureMap out = features;
  auto flat = Tensor::MatrixMap(out.data.data().data(), out.positions(), out.channels);
  for (Index c = 0; c < out.channels; ++c) {
    const Eigen::ArrayXd col = flat.col(c).cast<double>().array();
    const double mean = col.mean();
    const double sd = std::sqrt((col - mean).square().mean());
    if (sd > eps) {
      flat.col(c) = ((col - mean) / sd).cast<float>().matrix();
    } else {
      flat.col(c).setZero();
    }
  }
  return out;
}

void save_feature_map(const FeatureMap& features, const std::filesystem::path& npy_path) {
  write_npy(features.data, npy_path);
  std::filesystem::path sidecar = npy_path;
  sidecar.replace_extension(".json");
  std::ofstream out(sidecar);
  if (!out) throw IoError("cannot write '" + sidecar.string() + "'");
  out << nlohmann::json{{"stride", features.stride}, {"scales", features.scales}}.dump() << '\n';
}

FeatureMap load_feature_map(const std::filesystem::path& npy_path) {
  FeatureMap fm;
  fm.data = read_npy(npy_path);
  if (fm.data.rank() != 3) throw FormatError("feature map NPY must be [grid_h, grid_w, C]");
  std::filesystem::path sidecar = npy_path;
  sidecar.replace_extension(".json");
  std::ifstream in(sidecar);
  if (!in) throw IoError("missing feature sidecar '" + sidecar.string() + "'");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
    fm.stride = meta.at("stride").get<Index>();
    fm.scales = meta.at("scales").get<Index>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad feature sidecar '" + sidecar.string() + "': " + e.what());
  }
  fm.grid_h = fm.data.dim(0);
  fm.grid_w = fm.data.dim(1);
  fm.channels = fm.data.dim(2);
  return fm;
}

}  // namespace pst
