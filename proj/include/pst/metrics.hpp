#pragma once

#include "pst/features.hpp"
#include "pst/image.hpp"
#include "pst/tensor.hpp"

namespace pst {

/// G = F^T F / (H W) over the flattened [positions, C] features.
Tensor gram_matrix(const FeatureMap& features);

/// Mean squared difference of the Gram matrices of the two images' features.
double gram_loss(const Image& a, const Image& b, const FeatureOptions& options = {});

/// Mean L1 between the toy features of two same-sized images.
double content_distance(const Image& a, const Image& b, const FeatureOptions& options = {});

}  // namespace pst
