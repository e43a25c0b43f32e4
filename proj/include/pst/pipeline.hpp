#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pst/correspondence.hpp"
#include "pst/diffusion.hpp"
#include "pst/features.hpp"
#include "pst/image.hpp"

namespace pst {

/// Every knob of one transfer. Defaults are the reference settings.
struct TransferConfig {
  std::filesystem::path input;
  std::filesystem::path reference;
  std::optional<std::filesystem::path> input_mask;
  std::optional<std::filesystem::path> reference_mask;
  std::vector<int> regions;  // labels kept from the warped reference; empty = all
  double gamma = 1.0;
  float tau = kDefaultTau;
  Index stride = 8;
  Index scales = 3;
  float lambda = 1.0f;
  float cnt_scale = 1.0f;
  int steps_inversion = kDefaultInversionSteps;
  int steps_sampling = kDefaultSamplingSteps;
  int fixed_point_iters = kDefaultFixedPointIters;
  std::uint64_t seed = 0;
  Index feather = 0;
  Index num_classes = 0;  // 0: max mask label + 1
  bool latent_downsample = false;
  bool normalize_features = true;  // standardize_channels() before correlating
  int train_steps = kDefaultTrainSteps;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
  std::filesystem::path out;
  std::optional<Index> similarity_query;

  /// Throws PreconditionError naming the first out-of-range field.
  void validate() const;
  FeatureOptions feature_options() const { return {stride, scales}; }
};

/// Reads a JSON object whose keys mirror the CLI flags (snake_case).
TransferConfig load_transfer_config(const std::filesystem::path& path);
/// Applies the keys present in `json_text` on top of `base`.
TransferConfig merge_transfer_config(const TransferConfig& base, const std::string& json_text);
std::string to_json_string(const TransferConfig& config);

/// A pipeline stage failed; the message is prefixed with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "': " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct TransferInputs {
  Image input;
  Image reference;
  std::optional<SemanticMask> input_mask;
  std::optional<SemanticMask> reference_mask;
};

TransferInputs load_inputs(const TransferConfig& config);

struct TransferResult {
  Image output;
  Image warped;  // warped reference, input dims
  std::optional<Image> similarity;
  CorrelationMatrix correlation;
  Tensor input_latent;    // inverted input, z_T^c
  Tensor warped_latent;   // inverted warped reference, z_T^{s_w}
  Tensor initial_latent;  // after adain_wavelet_init and gamma
};

/// Features -> correlation -> warped reference -> conditioning -> inversion
/// -> AdaIN-Wavelet init -> sampling -> decoded output.
TransferResult transfer(const TransferInputs& inputs, const TransferConfig& config);

/// Loads the files named in `config`, runs transfer() and writes `out`,
/// `<out>.warped.png` and, with a similarity query, `<out>.sim.png`.
TransferResult run_transfer(const TransferConfig& config);

struct WarpResult {
  CorrelationMatrix correlation;  // on padded grids
  Image warped;                   // cropped to the input dims
};

/// Correspondence and full-resolution warp of `reference` onto `input`.
WarpResult warp_reference(const Image& input, const Image& reference, const FeatureOptions& options,
                          float tau = kDefaultTau, bool normalize_features = true);

/// Correlation between two (already padded) images as the pipeline builds it.
CorrelationMatrix image_correlation(const Image& input, const Image& reference, const FeatureOptions& options,
                                   bool normalize_features = true);

/// Keeps the warped reference where the input label is in `regions` and the
/// input elsewhere; `feather` > 0 blends with a box-filtered mask of that width.
Image region_transfer(const Image& warped, const Image& input, const SemanticMask& input_mask,
                      const std::vector<int>& regions, Index feather = 0);

/// Training objectives evaluated on one pair.
struct LossReport {
  std::optional<double> mask;  // needs both masks
  double cyclic = 0.0;
  double sem = 0.0;  // noise prediction, image conditioning only
  double rec = 0.0;  // noise prediction, content + style conditioning
  std::optional<double> stage1_total;
  double lambda_c = kDefaultLambdaCyc;
  double lambda_m = kDefaultLambdaMask;
  int timestep = 0;
};

LossReport evaluate_losses(const TransferInputs& inputs, const TransferConfig& config, int timestep,
                           double lambda_c = kDefaultLambdaCyc, double lambda_m = kDefaultLambdaMask);

/// "<out without .png>" + suffix, e.g. out.png -> out.warped.png.
std::filesystem::path side_path(const std::filesystem::path& out, const std::string& suffix);

/// Seeded standard-normal tensor (Box-Muller over mt19937_64).
Tensor seeded_gaussian(const Shape& shape, std::uint64_t seed);

}  // namespace pst
