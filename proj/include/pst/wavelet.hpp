#pragma once

#include <cmath>

#include "pst/image.hpp"
#include "pst/tensor.hpp"

namespace pst {

/// One level of Haar subbands, each [C, H/2, W/2].
///
/// Kernels are outer products A * B^T of L = [1 1]/sqrt(2) and
/// H = [-1 1]/sqrt(2); the first factor runs down the rows, the second along
/// the columns. So `lh` holds horizontal differences, `hl` vertical ones.
template <class Scalar>
struct BasicSubbandSet {
  BasicTensor<Scalar> ll, lh, hl, hh;
};
using SubbandSet = BasicSubbandSet<float>;

/// Depthwise stride-2 Haar analysis of a [C, H, W] tensor with even H and W.
template <class Scalar>
BasicSubbandSet<Scalar> dwt_haar(const BasicTensor<Scalar>& x) {
  require(x.rank() == 3, "dwt_haar: expected [C, H, W], got " + shape_string(x.shape()));
  require(x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0,
          "dwt_haar: H and W must be even, got " + shape_string(x.shape()) + " (pad first)");
  const Shape half{x.dim(0), x.dim(1) / 2, x.dim(2) / 2};
  BasicSubbandSet<Scalar> s{BasicTensor<Scalar>(half), BasicTensor<Scalar>(half), BasicTensor<Scalar>(half),
                            BasicTensor<Scalar>(half)};
  const Scalar k = Scalar(0.5);
  for (Index c = 0; c < half[0]; ++c)
    for (Index i = 0; i < half[1]; ++i)
      for (Index j = 0; j < half[2]; ++j) {
        const Scalar a = x(c, 2 * i, 2 * j), b = x(c, 2 * i, 2 * j + 1);
        const Scalar d = x(c, 2 * i + 1, 2 * j), e = x(c, 2 * i + 1, 2 * j + 1);
        s.ll(c, i, j) = k * (a + b + d + e);
        s.lh(c, i, j) = k * (-a + b - d + e);
        s.hl(c, i, j) = k * (-a - b + d + e);
        s.hh(c, i, j) = k * (a - b - d + e);
      }
  return s;
}

/// Exact inverse of dwt_haar (the kernels are orthonormal).
template <class Scalar>
BasicTensor<Scalar> idwt_haar(const BasicSubbandSet<Scalar>& s) {
  require(s.ll.rank() == 3, "idwt_haar: subbands must be [C, H, W]");
  require(s.ll.same_shape(s.lh) && s.ll.same_shape(s.hl) && s.ll.same_shape(s.hh),
          "idwt_haar: subband shapes differ");
  const Index channels = s.ll.dim(0), h = s.ll.dim(1), w = s.ll.dim(2);
  BasicTensor<Scalar> x({channels, 2 * h, 2 * w});
  const Scalar k = Scalar(0.5);
  for (Index c = 0; c < channels; ++c)
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        const Scalar ll = s.ll(c, i, j), lh = s.lh(c, i, j), hl = s.hl(c, i, j), hh = s.hh(c, i, j);
        x(c, 2 * i, 2 * j) = k * (ll - lh - hl + hh);
        x(c, 2 * i, 2 * j + 1) = k * (ll + lh - hl - hh);
        x(c, 2 * i + 1, 2 * j) = k * (ll - lh + hl - hh);
        x(c, 2 * i + 1, 2 * j + 1) = k * (ll + lh + hl + hh);
      }
  return x;
}

/// Bilinear x2 upsampling of a [C, H, W] tensor with half-pixel centres
/// (align_corners = false, edge samples clamped).
template <class Scalar>
BasicTensor<Scalar> upsample_bilinear2x(const BasicTensor<Scalar>& x) {
  require(x.rank() == 3, "upsample_bilinear2x: expected [C, H, W]");
  const Index channels = x.dim(0), h = x.dim(1), w = x.dim(2);
  BasicTensor<Scalar> out({channels, 2 * h, 2 * w});
  auto source_coord = [](Index dst, Index size, Index& i0, Index& i1, Scalar& frac) {
    const Scalar src = std::max(Scalar(0), (Scalar(dst) + Scalar(0.5)) / Scalar(2) - Scalar(0.5));
    i0 = std::min(static_cast<Index>(src), size - 1);
    i1 = std::min(i0 + 1, size - 1);
    frac = src - Scalar(i0);
  };
  for (Index y = 0; y < 2 * h; ++y) {
    Index y0, y1;
    Scalar fy;
    source_coord(y, h, y0, y1, fy);
    for (Index xo = 0; xo < 2 * w; ++xo) {
      Index x0, x1;
      Scalar fx;
      source_coord(xo, w, x0, x1, fx);
      for (Index c = 0; c < channels; ++c) {
        const Scalar top = (1 - fx) * x(c, y0, x0) + fx * x(c, y0, x1);
        const Scalar bottom = (1 - fx) * x(c, y1, x0) + fx * x(c, y1, x1);
        out(c, y, xo) = (1 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

/// Subbands packed as [4, C, H/2, W/2] in (ll, lh, hl, hh) order.
template <class Scalar>
BasicTensor<Scalar> pack_subbands(const BasicSubbandSet<Scalar>& s) {
  const Shape& b = s.ll.shape();
  BasicTensor<Scalar> out({4, b[0], b[1], b[2]});
  const Index n = s.ll.size();
  const BasicTensor<Scalar>* bands[] = {&s.ll, &s.lh, &s.hl, &s.hh};
  for (Index k = 0; k < 4; ++k) out.array().segment(k * n, n) = bands[k]->array();
  return out;
}

template <class Scalar>
BasicSubbandSet<Scalar> unpack_subbands(const BasicTensor<Scalar>& packed) {
  require(packed.rank() == 4 && packed.dim(0) == 4, "unpack_subbands: expected [4, C, H, W]");
  const Shape band{packed.dim(1), packed.dim(2), packed.dim(3)};
  const Index n = shape_size(band);
  BasicSubbandSet<Scalar> s{BasicTensor<Scalar>(band), BasicTensor<Scalar>(band), BasicTensor<Scalar>(band),
                            BasicTensor<Scalar>(band)};
  BasicTensor<Scalar>* bands[] = {&s.ll, &s.lh, &s.hl, &s.hh};
  for (Index k = 0; k < 4; ++k) bands[k]->array() = packed.array().segment(k * n, n);
  return s;
}

/// High-pass Haar subbands [lh, hl, hh] stacked channel-wise and bilinearly
/// upsampled back to the input size: a [3C, H, W] content conditioning.
template <class Scalar>
BasicTensor<Scalar> high_freq_conditioning(const BasicTensor<Scalar>& x) {
  const BasicSubbandSet<Scalar> s = dwt_haar(x);
  const Index channels = x.dim(0);
  const Index n = s.lh.size();
  BasicTensor<Scalar> stacked({3 * channels, s.lh.dim(1), s.lh.dim(2)});
  stacked.array().segment(0, n) = s.lh.array();
  stacked.array().segment(n, n) = s.hl.array();
  stacked.array().segment(2 * n, n) = s.hh.array();
  return upsample_bilinear2x(stacked);
}

inline Tensor high_freq_conditioning(const Image& content) { return high_freq_conditioning(to_tensor(content)); }

}  // namespace pst
