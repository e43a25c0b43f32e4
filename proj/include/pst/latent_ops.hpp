#pragma once

#include <cmath>
#include <vector>

#include "pst/tensor.hpp"
#include "pst/wavelet.hpp"

namespace pst {

inline constexpr double kVarianceFloor = 1e-6;

/// Per-channel mean and floored standard deviation sqrt(var + eps).
///
/// Statistics run over the last two (spatial) axes; every leading index of a
/// [C, H, W] or [B, C, H, W] tensor is its own channel, so batches never mix.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
  double eps = kVarianceFloor;
};

template <class Scalar>
ChannelStats channel_stats(const BasicTensor<Scalar>& x, double eps = kVarianceFloor) {
  require(x.rank() >= 3, "channel_stats: expected [C, H, W] or [B, C, H, W], got " + shape_string(x.shape()));
  const Index spatial = x.dim(x.rank() - 1) * x.dim(x.rank() - 2);
  const Index channels = x.size() / spatial;
  ChannelStats stats;
  stats.eps = eps;
  stats.mean.resize(static_cast<std::size_t>(channels));
  stats.std.resize(static_cast<std::size_t>(channels));
  for (Index c = 0; c < channels; ++c) {
    const auto v = x.array().segment(c * spatial, spatial).template cast<double>();
    const double mean = v.mean();
    const double var = (v - mean).square().mean();
    stats.mean[static_cast<std::size_t>(c)] = mean;
    stats.std[static_cast<std::size_t>(c)] = std::sqrt(var + eps);
  }
  return stats;
}

namespace detail {
inline Shape leading_dims(const Shape& s) { return Shape(s.begin(), s.end() - 2); }
}  // namespace detail

/// Adaptive instance normalization: re-centres and re-scales every channel of
/// `content` to the mean and standard deviation of the matching `style`
/// channel. Spatial sizes may differ.
template <class Scalar>
BasicTensor<Scalar> adain(const BasicTensor<Scalar>& content, const BasicTensor<Scalar>& style) {
  require(content.rank() >= 3 && style.rank() == content.rank() &&
              detail::leading_dims(content.shape()) == detail::leading_dims(style.shape()),
          "adain: channel layout mismatch " + shape_string(content.shape()) + " vs " + shape_string(style.shape()));
  const ChannelStats cs = channel_stats(content);
  const ChannelStats ss = channel_stats(style);
  const Index spatial = content.dim(content.rank() - 1) * content.dim(content.rank() - 2);
  BasicTensor<Scalar> out(content.shape());
  for (std::size_t c = 0; c < cs.mean.size(); ++c) {
    const double scale = ss.std[c] / cs.std[c];
    const auto src = content.array().segment(static_cast<Index>(c) * spatial, spatial).template cast<double>();
    out.array().segment(static_cast<Index>(c) * spatial, spatial) =
        ((src - cs.mean[c]) * scale + ss.mean[c]).template cast<Scalar>();
  }
  return out;
}

/// Initial latent: low band of `z_sw`, high bands of adain(z_c, z_sw).
template <class Scalar>
BasicTensor<Scalar> adain_wavelet_init(const BasicTensor<Scalar>& z_c, const BasicTensor<Scalar>& z_sw) {
  require_same_shape(z_c, z_sw, "adain_wavelet_init");
  const BasicSubbandSet<Scalar> style = dwt_haar(z_sw);
  BasicSubbandSet<Scalar> blend = dwt_haar(adain(z_c, z_sw));
  blend.ll = style.ll;
  return idwt_haar(blend);
}

/// gamma * a + (1 - gamma) * b, exact at both endpoints.
template <class Scalar>
BasicTensor<Scalar> lerp_toward(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b, double gamma,
                                const char* what) {
  require(gamma >= 0.0 && gamma <= 1.0,
          std::string(what) + ": gamma must lie in [0, 1], got " + std::to_string(gamma));
  require_same_shape(a, b, what);
  if (gamma == 0.0) return b;
  if (gamma == 1.0) return a;
  BasicTensor<Scalar> out(a.shape());
  const auto g = static_cast<Scalar>(gamma);
  out.array() = g * a.array() + (Scalar(1) - g) * b.array();
  return out;
}

/// Stylization strength on the latent: gamma * z_cs + (1 - gamma) * z_c.
template <class Scalar>
BasicTensor<Scalar> interpolate_strength(const BasicTensor<Scalar>& z_cs, const BasicTensor<Scalar>& z_c,
                                         double gamma) {
  return lerp_toward(z_cs, z_c, gamma, "interpolate_strength");
}

/// Same blend on the style-adapter embeddings (reference vs input).
template <class Scalar>
BasicTensor<Scalar> interpolate_conditioning(const BasicTensor<Scalar>& c_ref, const BasicTensor<Scalar>& c_input,
                                             double gamma) {
  return lerp_toward(c_ref, c_input, gamma, "interpolate_conditioning");
}

}  // namespace pst
