#include "pst/pipeline.hpp"

#include <cmath>
#include <random>
#include <set>

#include "pst/io.hpp"
#include "pst/latent_ops.hpp"
#include "pst/wavelet.hpp"

namespace pst {
namespace {

constexpr Index kTextTokens = 4;

template <class F>
auto run_stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

Image to_rgb(const Image& gray) {
  Image out(gray.height, gray.width, 3);
  for (Index i = 0; i < gray.height * gray.width; ++i)
    for (Index c = 0; c < 3; ++c) out.data[static_cast<std::size_t>(i * 3 + c)] = gray.data[static_cast<std::size_t>(i)];
  return out;
}

SemanticMask pad_mask(const SemanticMask& mask, Index multiple) {
  const Index h = (mask.height + multiple - 1) / multiple * multiple;
  const Index w = (mask.width + multiple - 1) / multiple * multiple;
  std::vector<std::int32_t> labels(static_cast<std::size_t>(h * w));
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      labels[static_cast<std::size_t>(y * w + x)] = mask.at(std::min(y, mask.height - 1), std::min(x, mask.width - 1));
  return SemanticMask(h, w, mask.num_classes, std::move(labels));
}

/// Padded working copies shared by transfer() and evaluate_losses().
struct Prepared {
  Image input;
  Image reference;
  Index multiple = 1;
};

Prepared prepare(const TransferInputs& inputs, const TransferConfig& config) {
  require(!inputs.input.empty() && !inputs.reference.empty(), "input and reference images are required");
  Prepared p;
  p.input = inputs.input;
  p.reference = inputs.reference;
  if (p.input.channels != p.reference.channels) {
    if (p.input.channels == 1) p.input = to_rgb(p.input);
    if (p.reference.channels == 1) p.reference = to_rgb(p.reference);
  }
  p.multiple = 2 * config.stride * (config.latent_downsample ? 2 : 1);
  p.input = pad_to_multiple(p.input, p.multiple);
  p.reference = pad_to_multiple(p.reference, p.multiple);
  return p;
}

Tensor encode(const Image& image, bool downsample) {
  const Tensor t = to_tensor(image);
  return downsample ? box_downsample(t, 2) : t;
}

Image decode(const Tensor& latent, bool upsample) { return to_image(upsample ? upsample_bilinear2x(latent) : latent); }

NoiseSchedule schedule_for(const TransferConfig& config) {
  return make_schedule(config.train_steps, config.beta_start, config.beta_end);
}

ToyDenoiserConfig denoiser_config(const TransferConfig& config, Index channels, float cnt_scale) {
  ToyDenoiserConfig dc;
  dc.latent_channels = channels;
  dc.cnt_scale = cnt_scale;
  dc.seed = config.seed;
  return dc;
}

}  // namespace

void TransferConfig::validate() const {
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1], got " + std::to_string(gamma));
  require(tau > 0.0f, "tau must be > 0, got " + std::to_string(tau));
  require(stride >= 1, "stride must be >= 1");
  require(scales >= 1, "scales must be >= 1");
  require(lambda >= 0.0f, "lambda must be >= 0");
  require(steps_inversion >= 1, "steps-inv must be >= 1");
  require(steps_sampling >= 1, "steps-sample must be >= 1");
  require(fixed_point_iters >= 0, "fixed-point iterations must be >= 0");
  require(feather >= 0, "feather must be >= 0");
  require(!similarity_query || *similarity_query >= 0, "similarity query must be >= 0");
}

std::filesystem::path side_path(const std::filesystem::path& out, const std::string& suffix) {
  std::filesystem::path base = out;
  if (base.extension() == ".png") base.replace_extension();
  base += suffix;
  return base;
}

Tensor seeded_gaussian(const Shape& shape, std::uint64_t seed) {
  Tensor out(shape);
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };  // (0, 1)
  for (Index i = 0; i < out.size(); i += 2) {
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * 3.14159265358979323846 * uniform();
    out[i] = static_cast<float>(r * std::cos(theta));
    if (i + 1 < out.size()) out[i + 1] = static_cast<float>(r * std::sin(theta));
  }
  return out;
}

TransferInputs load_inputs(const TransferConfig& config) {
  return run_stage("load", [&] {
    require(!config.input.empty(), "missing input path");
    require(!config.reference.empty(), "missing reference path");
    TransferInputs in;
    in.input = read_png(config.input);
    in.reference = read_png(config.reference);
    if (config.input_mask) in.input_mask = read_mask(*config.input_mask, config.num_classes);
    if (config.reference_mask) in.reference_mask = read_mask(*config.reference_mask, config.num_classes);
    return in;
  });
}

CorrelationMatrix image_correlation(const Image& input, const Image& reference, const FeatureOptions& options,
                                   bool normalize_features) {
  FeatureMap fc = extract_features(input, options);
  FeatureMap fs = extract_features(reference, options);
  if (normalize_features) {
    fc = standardize_channels(fc);
    fs = standardize_channels(fs);
  }
  return correlation_matrix(fc, fs);
}

WarpResult warp_reference(const Image& input, const Image& reference, const FeatureOptions& options, float tau,
                          bool normalize_features) {
  TransferInputs in{input, reference, std::nullopt, std::nullopt};
  TransferConfig cfg;
  cfg.stride = options.stride;
  cfg.scales = options.scales;
  cfg.tau = tau;
  cfg.validate();
  const Prepared p = prepare(in, cfg);
  WarpResult result;
  result.correlation = run_stage("correspondence", [&] {
    return image_correlation(p.input, p.reference, options, normalize_features);
  });
  result.warped = run_stage("warp", [&] {
    return crop(warp(result.correlation, p.reference, tau), input.height, input.width);
  });
  return result;
}

Image region_transfer(const Image& warped, const Image& input, const SemanticMask& input_mask,
                      const std::vector<int>& regions, Index feather) {
  require(warped.same_dims(input), "region_transfer: warped and input dims differ");
  require(input_mask.height == input.height && input_mask.width == input.width,
          "region_transfer: mask dims do not match the images");
  require(feather >= 0, "region_transfer: feather must be >= 0");
  std::set<int> keep;
  for (int label : regions) {
    if (label < 0 || label >= input_mask.num_classes) {
      throw PreconditionError("region_transfer: unknown label " + std::to_string(label) + " (mask has " +
                              std::to_string(input_mask.num_classes) + " classes)");
    }
    keep.insert(label);
  }

  const Index h = input.height, w = input.width;
  RowMatrix<double> alpha(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) alpha(y, x) = keep.count(input_mask.at(y, x)) ? 1.0 : 0.0;

  if (feather > 1) {
    // Separable box filter: a straight edge becomes a linear ramp `feather` px wide.
    const Index lo = feather / 2, hi = (feather - 1) / 2;
    auto blur = [&](const RowMatrix<double>& src, bool along_x) {
      RowMatrix<double> dst(h, w);
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          double acc = 0.0;
          for (Index k = -lo; k <= hi; ++k)
            acc += along_x ? src(y, std::clamp<Index>(x + k, 0, w - 1)) : src(std::clamp<Index>(y + k, 0, h - 1), x);
          dst(y, x) = acc / static_cast<double>(feather);
        }
      return dst;
    };
    alpha = blur(blur(alpha, true), false);
  }

  Image out = input;
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const double a = alpha(y, x);
      if (a == 0.0) continue;
      for (Index c = 0; c < input.channels; ++c) {
        out.at(y, x, c) = a == 1.0 ? warped.at(y, x, c)
                                   : static_cast<float>(a * warped.at(y, x, c) + (1.0 - a) * input.at(y, x, c));
      }
    }
  return out;
}

TransferResult transfer(const TransferInputs& inputs, const TransferConfig& config) {
  run_stage("config", [&] { config.validate(); });
  const Prepared p = run_stage("prepare", [&] { return prepare(inputs, config); });
  const FeatureOptions fopts = config.feature_options();
  TransferResult result;

  const FeatureMap input_features = run_stage("features", [&] { return extract_features(p.input, fopts); });
  result.correlation = run_stage("correspondence", [&] {
    return image_correlation(p.input, p.reference, fopts, config.normalize_features);
  });
  Image warped = run_stage("warp", [&] { return warp(result.correlation, p.reference, config.tau); });
  if (!config.regions.empty()) {
    warped = run_stage("region-transfer", [&] {
      require(inputs.input_mask.has_value(), "--regions needs an input mask");
      return region_transfer(warped, p.input, pad_mask(*inputs.input_mask, p.multiple), config.regions,
                             config.feather);
    });
  }
  if (config.similarity_query) {
    result.similarity = run_stage("similarity", [&] {
      return crop(similarity_map(result.correlation, *config.similarity_query), inputs.reference.height,
                  inputs.reference.width);
    });
  }

  const bool ds = config.latent_downsample;
  const Tensor z_input = encode(p.input, ds);
  const Tensor z_warped = encode(warped, ds);
  const Index channels = z_input.dim(0);
  const ToyDenoiserConfig dcfg = denoiser_config(config, channels, config.cnt_scale);

  Conditioning neutral, styled;
  run_stage("conditioning", [&] {
    neutral.content = high_freq_conditioning(z_input);
    const Tensor text = text_embedding(kTextTokens, dcfg.token_dim, config.seed);
    const Tensor input_tokens = image_tokens(input_features, dcfg.token_dim, config.seed);
    const Tensor ref_tokens = image_tokens(extract_features(warped, fopts), dcfg.token_dim, config.seed);
    neutral.style = {text, input_tokens, config.lambda};
    styled.content = neutral.content;
    styled.style = {text, interpolate_conditioning(ref_tokens, input_tokens, config.gamma), config.lambda};
  });

  const ToyDenoiser denoiser(dcfg);
  const NoiseSchedule schedule = run_stage("schedule", [&] { return schedule_for(config); });
  run_stage("inversion", [&] {
    result.input_latent =
        ddim_invert(z_input, denoiser, config.steps_inversion, neutral, schedule, config.fixed_point_iters);
    result.warped_latent =
        ddim_invert(z_warped, denoiser, config.steps_inversion, neutral, schedule, config.fixed_point_iters);
  });
  result.initial_latent = run_stage("initialization", [&] {
    return interpolate_strength(adain_wavelet_init(result.input_latent, result.warped_latent), result.input_latent,
                                config.gamma);
  });
  const Tensor z0 = run_stage("sampling", [&] {
    return ddim_sample(result.initial_latent, denoiser, config.steps_sampling, styled, schedule);
  });

  result.output = crop(decode(z0, ds), inputs.input.height, inputs.input.width);
  result.warped = crop(warped, inputs.input.height, inputs.input.width);
  return result;
}

TransferResult run_transfer(const TransferConfig& config) {
  run_stage("config", [&] {
    config.validate();
    require(!config.out.empty(), "missing output path");
  });
  const TransferInputs inputs = load_inputs(config);
  TransferResult result = transfer(inputs, config);
  run_stage("write", [&] {
    write_png(result.output, config.out);
    write_png(result.warped, side_path(config.out, ".warped.png"));
    if (result.similarity) write_png(*result.similarity, side_path(config.out, ".sim.png"));
  });
  return result;
}

LossReport evaluate_losses(const TransferInputs& inputs, const TransferConfig& config, int timestep, double lambda_c,
                           double lambda_m) {
  run_stage("config", [&] { config.validate(); });
  const Prepared p = run_stage("prepare", [&] { return prepare(inputs, config); });
  const FeatureOptions fopts = config.feature_options();
  const FeatureMap input_features = run_stage("features", [&] { return extract_features(p.input, fopts); });
  const CorrelationMatrix corr = run_stage("correspondence", [&] {
    return image_correlation(p.input, p.reference, fopts, config.normalize_features);
  });

  LossReport report;
  report.lambda_c = lambda_c;
  report.lambda_m = lambda_m;
  report.timestep = timestep;
  report.cyclic = run_stage("cyclic-loss", [&] {
    const Tensor grid = box_downsample(to_tensor(p.reference), config.stride);  // [C, h, w]
    Tensor hwc({grid.dim(1), grid.dim(2), grid.dim(0)});
    for (Index c = 0; c < grid.dim(0); ++c)
      for (Index y = 0; y < grid.dim(1); ++y)
        for (Index x = 0; x < grid.dim(2); ++x) hwc(y, x, c) = grid(c, y, x);
    return cyclic_warp_loss(hwc, corr, config.tau);
  });
  if (inputs.input_mask && inputs.reference_mask) {
    report.mask = run_stage("mask-loss", [&] {
      const SemanticMask content_grid = downsample_mask(pad_mask(*inputs.input_mask, p.multiple), config.stride);
      return mask_warp_loss(content_grid, warp_mask(corr, pad_mask(*inputs.reference_mask, p.multiple), config.tau));
    });
  }

  run_stage("noise-prediction", [&] {
    const NoiseSchedule schedule = schedule_for(config);
    const Tensor z0 = encode(p.input, config.latent_downsample);
    const Tensor eps = seeded_gaussian(z0.shape(), config.seed);
    const Tensor z_t = forward_noise(z0, timestep, eps, schedule);
    const Index channels = z0.dim(0);
    const Index token_dim = ToyDenoiserConfig{}.token_dim;
    // Both conditionings come from the input itself.
    Conditioning cond;
    cond.style = {text_embedding(kTextTokens, token_dim, config.seed),
                  image_tokens(input_features, token_dim, config.seed), config.lambda};
    report.sem = noise_pred_loss(eps, ToyDenoiser(denoiser_config(config, channels, 0.0f)).predict(z_t, timestep, cond));
    cond.content = high_freq_conditioning(z0);
    report.rec =
        noise_pred_loss(eps, ToyDenoiser(denoiser_config(config, channels, config.cnt_scale)).predict(z_t, timestep, cond));
  });
  if (report.mask) report.stage1_total = stage1_total_loss(report.sem, report.cyclic, *report.mask, lambda_c, lambda_m);
  return report;
}

}  // namespace pst
