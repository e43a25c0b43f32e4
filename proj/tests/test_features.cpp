#include <doctest.h>

#include <fstream>
#include <json.hpp>

#include "pst/features.hpp"
#include "pst/io.hpp"
#include "test_util.hpp"

using namespace pst;

namespace {

// Straightforward per-cell statistics for a single scale, window fully inside the image.
std::vector<double> brute_cell(const Image& img, Index y0, Index x0, Index n) {
  const Index c = img.channels;
  std::vector<double> out;
  std::vector<double> mean(c, 0.0), sq(c, 0.0);
  for (Index y = y0; y < y0 + n; ++y)
    for (Index x = x0; x < x0 + n; ++x)
      for (Index k = 0; k < c; ++k) mean[k] += img.at(y, x, k);
  for (auto& m : mean) m /= static_cast<double>(n * n);
  for (Index y = y0; y < y0 + n; ++y)
    for (Index x = x0; x < x0 + n; ++x)
      for (Index k = 0; k < c; ++k) sq[k] += std::pow(img.at(y, x, k) - mean[k], 2);
  auto luma = [&](Index y, Index x) {
    y = std::min(y, img.height - 1);
    x = std::min(x, img.width - 1);
    if (c == 1) return static_cast<double>(img.at(y, x, 0));
    return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  };
  double gx = 0.0, gy = 0.0;
  for (Index y = y0; y < y0 + n; ++y)
    for (Index x = x0; x < x0 + n; ++x) {
      gx += std::abs(luma(y, x + 1) - luma(y, x));
      gy += std::abs(luma(y + 1, x) - luma(y, x));
    }
  out.insert(out.end(), mean.begin(), mean.end());
  out.push_back(gx / static_cast<double>(n * n));
  out.push_back(gy / static_cast<double>(n * n));
  for (auto s : sq) out.push_back(std::sqrt(s / static_cast<double>(n * n)));
  return out;
}

}  // namespace

TEST_CASE("feature channel counts and grid") {
  Image rgb(64, 48, 3, 0.3f);
  const FeatureMap fm = extract_features(rgb, {8, 3});
  CHECK(fm.grid_h == 8);
  CHECK(fm.grid_w == 6);
  CHECK(fm.channels == 3 * 8);
  CHECK(extract_features(Image(16, 16, 1), {8, 2}).channels == 2 * 4);
  CHECK(features_per_scale(3) == 8);
  CHECK_THROWS_AS(extract_features(Image(4, 4, 3), {8, 1}), PreconditionError);
  CHECK_THROWS_AS(extract_features(rgb, {0, 1}), PreconditionError);
}

TEST_CASE("constant image gives identical cells and zero gradients") {
  Image img(32, 32, 3);
  for (Index y = 0; y < 32; ++y)
    for (Index x = 0; x < 32; ++x) {
      img.at(y, x, 0) = 0.2f;
      img.at(y, x, 1) = 0.5f;
      img.at(y, x, 2) = 0.9f;
    }
  const FeatureMap fm = extract_features(img, {4, 3});
  const auto flat = fm.flat();
  for (Index i = 0; i < fm.positions(); ++i) {
    CHECK((flat.row(i) - flat.row(0)).cwiseAbs().maxCoeff() == 0.0f);
    for (Index l = 0; l < 3; ++l) {
      CHECK(flat(i, l * 8 + 0) == doctest::Approx(0.2f));
      CHECK(flat(i, l * 8 + 3) == 0.0f);
      CHECK(flat(i, l * 8 + 4) == 0.0f);
      CHECK(flat(i, l * 8 + 5) == doctest::Approx(0.0f).epsilon(1e-6));
    }
  }
}

TEST_CASE("features are deterministic") {
  std::mt19937 rng(5);
  const Image img = pst::testing::random_image(40, 40, 3, rng);
  CHECK(extract_features(img).data == extract_features(img).data);
}

TEST_CASE("single-scale cells match brute-force statistics") {
  std::mt19937 rng(7);
  for (Index c : {Index{1}, Index{3}}) {
    const Image img = pst::testing::random_image(8, 8, c, rng);
    const FeatureMap fm = extract_features(img, {4, 1});
    REQUIRE(fm.grid_h == 2);
    for (Index gy = 0; gy < 2; ++gy)
      for (Index gx = 0; gx < 2; ++gx) {
        const auto expect = brute_cell(img, gy * 4, gx * 4, 4);
        for (Index k = 0; k < fm.channels; ++k)
          CHECK(fm.data(gy, gx, k) == doctest::Approx(expect[static_cast<std::size_t>(k)]).epsilon(1e-5));
      }
  }
}

TEST_CASE("features are translation covariant") {
  std::mt19937 rng(9);
  const Index stride = 4;
  const Image img = pst::testing::random_image(64, 64, 3, rng);
  Image shifted(64, 64, 3);
  for (Index y = 0; y < 64; ++y)
    for (Index x = 0; x < 64; ++x)
      for (Index k = 0; k < 3; ++k) shifted.at(y, x, k) = img.at(y, std::max<Index>(x - 2 * stride, 0), k);
  const FeatureMap a = extract_features(img, {stride, 3});
  const FeatureMap b = extract_features(shifted, {stride, 3});
  // Coarsest window spans 16 px, so keep three cells clear of every border.
  for (Index gy = 3; gy < a.grid_h - 3; ++gy)
    for (Index gx = 3; gx < a.grid_w - 5; ++gx)
      for (Index k = 0; k < a.channels; ++k)
        CHECK(b.data(gy, gx + 2, k) == doctest::Approx(a.data(gy, gx, k)).epsilon(1e-5));
}

TEST_CASE("standardize_channels z-scores each channel") {
  std::mt19937 rng(13);
  FeatureMap fm = extract_features(pst::testing::random_image(32, 32, 3, rng), {4, 2});
  for (Index i = 0; i < fm.positions(); ++i) fm.data(i / fm.grid_w, i % fm.grid_w, 0) = 0.7f;
  const FeatureMap z = standardize_channels(fm);
  const auto flat = z.flat();
  CHECK(flat.col(0).cwiseAbs().maxCoeff() == 0.0f);
  for (Index k = 1; k < z.channels; ++k) {
    const double mean = flat.col(k).cast<double>().mean();
    const double var = (flat.col(k).cast<double>().array() - mean).square().mean();
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("feature map save and load") {
  const auto dir = pst::testing::scratch_dir("features_io");
  std::mt19937 rng(17);
  const FeatureMap fm = extract_features(pst::testing::random_image(24, 16, 3, rng), {8, 2});
  save_feature_map(fm, dir / "fm.npy");
  const auto meta = nlohmann::json::parse(std::ifstream(dir / "fm.json"));
  CHECK(meta["stride"] == 8);
  CHECK(meta["scales"] == 2);
  const FeatureMap back = load_feature_map(dir / "fm.npy");
  CHECK(back.data == fm.data);
  CHECK(back.stride == 8);
  CHECK(back.grid_w == 2);
  CHECK(read_npy(dir / "fm.npy").shape() == Shape{3, 2, 16});
}
