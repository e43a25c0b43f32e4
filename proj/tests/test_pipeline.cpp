#include <doctest.h>

#include "pst/io.hpp"
#include "pst/pipeline.hpp"
#include "test_util.hpp"

using namespace pst;

namespace {

const std::filesystem::path kData = PST_DATA_DIR;

TransferInputs bundled_pair(Index h = 0, Index w = 0) {
  TransferInputs in;
  in.input = read_png(kData / "portrait_a.png");
  in.reference = read_png(kData / "portrait_b.png");
  in.input_mask = read_mask(kData / "mask_a.png");
  in.reference_mask = read_mask(kData / "mask_b.png");
  if (h > 0) {
    in.input = crop(in.input, h, w);
    in.input_mask = SemanticMask(h, w, in.input_mask->num_classes, [&] {
      std::vector<std::int32_t> labels;
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) labels.push_back(in.input_mask->at(y, x));
      return labels;
    }());
  }
  return in;
}

TransferConfig fast_config() {
  TransferConfig cfg;
  cfg.steps_inversion = 4;
  cfg.steps_sampling = 6;
  return cfg;
}

}  // namespace

TEST_CASE("region transfer partitions the pixels") {
  std::mt19937 rng(107);
  const Image warped = pst::testing::random_image(6, 8, 3, rng);
  const Image input = pst::testing::random_image(6, 8, 3, rng);
  std::vector<std::int32_t> labels;
  for (Index y = 0; y < 6; ++y)
    for (Index x = 0; x < 8; ++x) labels.push_back(static_cast<std::int32_t>((x / 3 + y) % 3));
  const SemanticMask mask(6, 8, 3, labels);

  CHECK(region_transfer(warped, input, mask, {0, 1, 2}) == warped);
  CHECK(region_transfer(warped, input, mask, {}) == input);
  const Image hair = region_transfer(warped, input, mask, {2});
  for (Index y = 0; y < 6; ++y)
    for (Index x = 0; x < 8; ++x)
      for (Index c = 0; c < 3; ++c)
        CHECK(hair.at(y, x, c) == (mask.at(y, x) == 2 ? warped : input).at(y, x, c));

  CHECK_THROWS_WITH_AS(region_transfer(warped, input, mask, {3}), doctest::Contains("unknown label 3"),
                       PreconditionError);
  CHECK_THROWS_AS(region_transfer(warped, crop(input, 5, 8), mask, {1}), PreconditionError);
}

TEST_CASE("feathered region edge is a monotone ramp") {
  const Image warped(4, 16, 1, 1.0f), input(4, 16, 1, 0.0f);
  std::vector<std::int32_t> labels;
  for (Index y = 0; y < 4; ++y)
    for (Index x = 0; x < 16; ++x) labels.push_back(x >= 8 ? 1 : 0);
  const Image out = region_transfer(warped, input, SemanticMask(4, 16, 2, labels), {1}, 4);
  for (Index x = 1; x < 16; ++x) CHECK(out.at(2, x, 0) >= out.at(2, x - 1, 0));
  CHECK(out.at(2, 0, 0) == 0.0f);
  CHECK(out.at(2, 15, 0) == 1.0f);
  CHECK(out.at(2, 7, 0) > 0.0f);
  CHECK(out.at(2, 8, 0) < 1.0f);
}

TEST_CASE("transfer keeps input dims and is deterministic") {
  const TransferInputs in = bundled_pair(45, 37);
  TransferConfig cfg = fast_config();
  cfg.similarity_query = 3;
  const TransferResult a = transfer(in, cfg);
  const TransferResult b = transfer(in, cfg);
  CHECK(a.output.height == 45);
  CHECK(a.output.width == 37);
  CHECK(a.output.channels == 3);
  CHECK(a.warped.same_dims(a.output));
  CHECK(a.output == b.output);
  CHECK(a.warped == b.warped);
  REQUIRE(a.similarity.has_value());
  CHECK(a.similarity->height == in.reference.height);
  for (float v : a.output.data) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("gamma endpoints and monotone strength") {
  const TransferInputs in = bundled_pair(32, 32);
  TransferConfig cfg = fast_config();
  cfg.gamma = 0.0;
  const TransferResult zero = transfer(in, cfg);
  CHECK(zero.initial_latent == zero.input_latent);

  double previous = -1.0;
  for (double g : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    cfg.gamma = g;
    const TransferResult r = transfer(in, cfg);
    const double d = max_abs_diff(r.initial_latent, r.input_latent);
    CHECK(d >= previous);
    previous = d;
  }
}

TEST_CASE("identity pair warps onto itself") {
  const Image a = read_png(kData / "portrait_a.png");
  const WarpResult w = warp_reference(a, a, {8, 3});
  CHECK(mean_abs_diff(w.warped, a) <= 0.02);
}

TEST_CASE("regions need a mask and report the stage") {
  TransferInputs in = bundled_pair(32, 32);
  in.input_mask.reset();
  TransferConfig cfg = fast_config();
  cfg.regions = {1};
  try {
    transfer(in, cfg);
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "region-transfer");
    CHECK(std::string(e.what()).find("stage 'region-transfer'") == 0);
  }
  cfg.regions.clear();
  cfg.gamma = 2.0;
  CHECK_THROWS_WITH_AS(transfer(in, cfg), doctest::Contains("gamma"), StageError);
}

TEST_CASE("loss report") {
  const TransferInputs in = bundled_pair(64, 64);
  const LossReport r = evaluate_losses(in, fast_config(), 500);
  REQUIRE(r.mask.has_value());
  REQUIRE(r.stage1_total.has_value());
  CHECK(std::isfinite(r.sem));
  CHECK(std::isfinite(r.rec));
  CHECK(r.cyclic >= 0.0);
  CHECK(*r.stage1_total == doctest::Approx(r.sem + r.cyclic + 10.0 * *r.mask));
  CHECK(evaluate_losses(in, fast_config(), 500).sem == r.sem);

  TransferInputs no_masks = in;
  no_masks.reference_mask.reset();
  const LossReport partial = evaluate_losses(no_masks, fast_config(), 500);
  CHECK_FALSE(partial.mask.has_value());
  CHECK_FALSE(partial.stage1_total.has_value());
}

TEST_CASE("transfer config JSON") {
  TransferConfig base;
  const TransferConfig cfg =
      merge_transfer_config(base, R"({"gamma": 0.4, "steps_inv": 7, "regions": [1, 2], "input": "a.png"})");
  CHECK(cfg.gamma == 0.4);
  CHECK(cfg.steps_inversion == 7);
  CHECK(cfg.steps_sampling == 30);
  CHECK(cfg.regions == std::vector<int>{1, 2});
  CHECK(cfg.input == "a.png");
  CHECK_THROWS_WITH_AS(merge_transfer_config(base, R"({"gama": 0.4})"), doctest::Contains("gama"), FormatError);
  CHECK_THROWS_AS(merge_transfer_config(base, "[1]"), FormatError);
  CHECK_THROWS_AS(merge_transfer_config(base, R"({"gamma": "high"})"), FormatError);

  const TransferConfig back = merge_transfer_config(TransferConfig{}, to_json_string(cfg));
  CHECK(back.gamma == cfg.gamma);
  CHECK(back.regions == cfg.regions);
  CHECK(back.input == cfg.input);

  TransferConfig bad;
  bad.gamma = 1.5;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("gamma must lie in [0, 1]"), PreconditionError);
  bad = TransferConfig{};
  bad.tau = 0.0f;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
}

TEST_CASE("helpers") {
  CHECK(side_path("out/x.png", ".warped.png") == std::filesystem::path("out/x.warped.png"));
  CHECK(side_path("y", ".sim.png") == std::filesystem::path("y.sim.png"));
  const Tensor g = seeded_gaussian({64, 64}, 4);
  CHECK(g == seeded_gaussian({64, 64}, 4));
  const double mean = g.array().cast<double>().mean();
  const double var = (g.array().cast<double>() - mean).square().mean();
  CHECK(std::abs(mean) < 0.05);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}
