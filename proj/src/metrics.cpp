#include "pst/metrics.hpp"

namespace pst {

Tensor gram_matrix(const FeatureMap& features) {
  require(features.positions() > 0 && features.channels > 0, "gram_matrix: empty features");
  const RowMatrix<double> f = features.flat().cast<double>();
  Tensor g({features.channels, features.channels});
  g.matrix() = ((f.transpose() * f) / static_cast<double>(features.positions())).cast<float>();
  return g;
}

double gram_loss(const Image& a, const Image& b, const FeatureOptions& options) {
  require(a.channels == b.channels, "gram_loss: channel counts differ");
  const Tensor ga = gram_matrix(extract_features(a, options));
  const Tensor gb = gram_matrix(extract_features(b, options));
  return (ga.array().cast<double>() - gb.array().cast<double>()).square().mean();
}

double content_distance(const Image& a, const Image& b, const FeatureOptions& options) {
  require(a.same_dims(b), "content_distance: images must have identical dims");
  const FeatureMap fa = extract_features(a, options);
  const FeatureMap fb = extract_features(b, options);
  return (fa.data.array().cast<double>() - fb.data.array().cast<double>()).abs().mean();
}

}  // namespace pst
