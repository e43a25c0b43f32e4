#include "pst/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pst {

NoiseSchedule make_schedule(int total_steps, double beta_start, double beta_end) {
  require(total_steps >= 1, "make_schedule: T must be >= 1");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          "make_schedule: need 0 < beta_start <= beta_end < 1, got [" + std::to_string(beta_start) + ", " +
              std::to_string(beta_end) + "]");
  NoiseSchedule s;
  s.total_steps = total_steps;
  s.alpha_bar.resize(static_cast<std::size_t>(total_steps) + 1);
  s.alpha_bar[0] = 1.0;
  for (int t = 1; t <= total_steps; ++t) {
    const double frac = total_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (total_steps - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    s.alpha_bar[static_cast<std::size_t>(t)] = s.alpha_bar[static_cast<std::size_t>(t) - 1] * (1.0 - beta);
  }
  return s;
}

std::vector<int> timestep_subsequence(const NoiseSchedule& schedule, int steps) {
  require(steps >= 1, "step count must be >= 1, got " + std::to_string(steps));
  require(steps <= schedule.total_steps, "step count " + std::to_string(steps) + " exceeds schedule length " +
                                             std::to_string(schedule.total_steps));
  std::vector<int> ts(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k)
    ts[static_cast<std::size_t>(k)] = static_cast<int>((static_cast<std::int64_t>(k) * schedule.total_steps) / steps);
  return ts;
}

Tensor forward_noise(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& schedule) {
  require_same_shape(z0, eps, "forward_noise");
  const double ab = schedule.at(t);
  Tensor out(z0.shape());
  out.array() = (std::sqrt(ab) * z0.array().cast<double>() + std::sqrt(1.0 - ab) * eps.array().cast<double>())
                    .cast<float>();
  return out;
}

namespace {

Tensor ddim_move(const Tensor& z_t, const Tensor& eps_hat, int t, int t_to, const NoiseSchedule& schedule) {
  require_same_shape(z_t, eps_hat, "ddim_step");
  const double ab = schedule.at(t);
  const double ab_to = schedule.at(t_to);
  const auto z = z_t.array().cast<double>();
  const auto e = eps_hat.array().cast<double>();
  const Eigen::ArrayXd x0 = (z - std::sqrt(1.0 - ab) * e) / std::sqrt(ab);
  Tensor out(z_t.shape());
  out.array() = (std::sqrt(ab_to) * x0 + std::sqrt(1.0 - ab_to) * e).cast<float>();
  return out;
}

}  // namespace

Tensor ddim_step(const Tensor& z_t, const Tensor& eps_hat, int t, int t_prev, const NoiseSchedule& schedule) {
  require(t_prev < t, "ddim_step: t_prev (" + std::to_string(t_prev) + ") must be < t (" + std::to_string(t) + ")");
  return ddim_move(z_t, eps_hat, t, t_prev, schedule);
}

Tensor ddim_step_up(const Tensor& z_t, const Tensor& eps_hat, int t, int t_next, const NoiseSchedule& schedule) {
  require(t_next > t, "ddim_step_up: t_next (" + std::to_string(t_next) + ") must be > t (" + std::to_string(t) + ")");
  return ddim_move(z_t, eps_hat, t, t_next, schedule);
}

Tensor LinearDenoiser::predict(const Tensor& z_t, int, const Conditioning&) const {
  Tensor out(z_t.shape());
  out.array() = slope_ * z_t.array();
  return out;
}

Tensor ddim_sample(const Tensor& z_T, const Denoiser& denoiser, int steps, const Conditioning& cond,
                   const NoiseSchedule& schedule) {
  const std::vector<int> ts = timestep_subsequence(schedule, steps);
  Tensor z = z_T;
  for (std::size_t k = ts.size() - 1; k > 0; --k) {
    const Tensor eps = denoiser.predict(z, ts[k], cond);
    require(eps.same_shape(z), "denoiser returned shape " + shape_string(eps.shape()));
    z = ddim_step(z, eps, ts[k], ts[k - 1], schedule);
  }
  return z;
}

Tensor ddim_invert(const Tensor& z0, const Denoiser& denoiser, int steps, const Conditioning& cond,
                   const NoiseSchedule& schedule, int fixed_point_iters) {
  require(fixed_point_iters >= 0, "ddim_invert: fixed_point_iters must be >= 0");
  const std::vector<int> ts = timestep_subsequence(schedule, steps);
  Tensor z = z0;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    // The downward step from ts[k+1] evaluates the denoiser at (z_next, ts[k+1]);
    // iterate so the upward step uses that same estimate.
    Tensor eps = denoiser.predict(z, ts[k + 1], cond);
    Tensor next = ddim_step_up(z, eps, ts[k], ts[k + 1], schedule);
    for (int it = 0; it < fixed_point_iters; ++it) {
      eps = denoiser.predict(next, ts[k + 1], cond);
      next = ddim_step_up(z, eps, ts[k], ts[k + 1], schedule);
    }
    z = std::move(next);
  }
  return z;
}

Tensor decoupled_cross_attention(const Tensor& z, const Tensor& text_tokens, const Tensor& image_tokens,
                                 const AttentionWeights& w, float lambda) {
  require(lambda >= 0.0f, "decoupled_cross_attention: lambda must be >= 0");
  require(z.rank() == 2 && z.dim(1) == w.query.rows(),
          "decoupled_cross_attention: z " + shape_string(z.shape()) + " does not match W_q rows");
  require(text_tokens.rank() == 2 && text_tokens.dim(1) == w.text_key.rows() &&
              w.text_value.rows() == w.text_key.rows() && w.text_key.cols() == w.query.cols() &&
              w.text_value.cols() == z.dim(1),
          "decoupled_cross_attention: text branch shapes do not match");
  const RowMatrix<float> q = z.matrix() * w.query;
  RowMatrix<float> out = attention(q, text_tokens.matrix() * w.text_key, text_tokens.matrix() * w.text_value);
  if (lambda != 0.0f && !image_tokens.empty()) {
    require(image_tokens.rank() == 2 && image_tokens.dim(1) == w.image_key.rows() &&
                w.image_value.rows() == w.image_key.rows() && w.image_key.cols() == w.query.cols() &&
                w.image_value.cols() == z.dim(1),
            "decoupled_cross_attention: image branch shapes do not match");
    out += lambda * attention(q, image_tokens.matrix() * w.image_key, image_tokens.matrix() * w.image_value);
  }
  Tensor result(z.shape());
  result.matrix() = out;
  return result;
}

RowMatrix<float> seeded_uniform(Index rows, Index cols, float scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RowMatrix<float> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    m.data()[i] = static_cast<float>((2.0 * u - 1.0) * scale);
  }
  return m;
}

namespace {

constexpr Index kTimeFeatures = 8;

Eigen::RowVectorXf time_features(int t) {
  Eigen::RowVectorXf f(kTimeFeatures);
  const double phase = static_cast<double>(t) / kDefaultTrainSteps * std::numbers::pi;
  for (Index k = 0; k < kTimeFeatures / 2; ++k) {
    f(2 * k) = static_cast<float>(std::sin(phase * std::ldexp(1.0, static_cast<int>(k))));
    f(2 * k + 1) = static_cast<float>(std::cos(phase * std::ldexp(1.0, static_cast<int>(k))));
  }
  return f;
}

float fan_in_scale(Index fan_in) { return 1.0f / std::sqrt(static_cast<float>(fan_in)); }

}  // namespace

ToyDenoiser::ToyDenoiser(const ToyDenoiserConfig& config) : config_(config) {
  require(config.latent_channels > 0 && config.width > 0 && config.token_dim > 0 && config.key_dim > 0,
          "ToyDenoiser: dimensions must be positive");
  const Index c = config.latent_channels, d = config.width, dc = config.token_dim, dk = config.key_dim;
  std::uint64_t s = config.seed * 0x9E3779B97F4A7C15ull;
  in_proj_ = seeded_uniform(c, d, fan_in_scale(c), ++s);
  in_bias_ = seeded_uniform(1, d, 0.1f, ++s);
  time_proj_ = seeded_uniform(kTimeFeatures, d, fan_in_scale(kTimeFeatures), ++s);
  cnt_proj_ = seeded_uniform(3 * c, d, fan_in_scale(3 * c), ++s);
  attn_.query = seeded_uniform(d, dk, fan_in_scale(d), ++s);
  attn_.text_key = seeded_uniform(dc, dk, fan_in_scale(dc), ++s);
  attn_.text_value = seeded_uniform(dc, d, fan_in_scale(dc), ++s);
  attn_.image_key = seeded_uniform(dc, dk, fan_in_scale(dc), ++s);
  attn_.image_value = seeded_uniform(dc, d, fan_in_scale(dc), ++s);
  out_proj_ = seeded_uniform(d, c, config.output_scale * fan_in_scale(d), ++s);
}

double ToyDenoiser::output_bound() const {
  return std::sqrt(static_cast<double>(config_.width)) * out_proj_.cast<double>().norm();
}

Tensor ToyDenoiser::predict(const Tensor& z_t, int t, const Conditioning& cond) const {
  require(z_t.rank() == 3 && z_t.dim(0) == config_.latent_channels,
          "ToyDenoiser: z_t must be [" + std::to_string(config_.latent_channels) + ", H, W], got " +
              shape_string(z_t.shape()));
  const Index positions = z_t.dim(1) * z_t.dim(2);
  const Tensor::ConstMatrixMap z = z_t.matrix();  // [C, N]

  RowMatrix<float> h = z.transpose() * in_proj_;
  h.rowwise() += in_bias_ + time_features(t) * time_proj_;
  if (config_.cnt_scale != 0.0f) {
    require(cond.content.rank() == 3 && cond.content.dim(0) == 3 * config_.latent_channels &&
                cond.content.dim(1) == z_t.dim(1) && cond.content.dim(2) == z_t.dim(2),
            "ToyDenoiser: content conditioning must be [3C, H, W] matching z_t, got " +
                shape_string(cond.content.shape()));
    h.noalias() += config_.cnt_scale * (cond.content.matrix().transpose() * cnt_proj_);
  }
  if (!cond.style.text_tokens.empty()) {
    Tensor hidden({positions, config_.width}, std::vector<float>(h.data(), h.data() + h.size()));
    const Tensor mixed =
        decoupled_cross_attention(hidden, cond.style.text_tokens, cond.style.image_tokens, attn_, cond.style.lambda);
    h += mixed.matrix();
  }
  const RowMatrix<float> eps = h.array().tanh().matrix() * out_proj_;  // [N, C]
  Tensor out(z_t.shape());
  out.matrix() = eps.transpose();
  return out;
}

Tensor text_embedding(Index tokens, Index dim, std::uint64_t seed) {
  const RowMatrix<float> m = seeded_uniform(tokens, dim, 1.0f, seed ^ 0x7465787400000000ull);
  return Tensor({tokens, dim}, std::vector<float>(m.data(), m.data() + m.size()));
}

Tensor image_tokens(const FeatureMap& features, Index dim, std::uint64_t seed) {
  require(features.positions() > 0, "image_tokens: empty feature map");
  const Index c = features.channels;
  RowMatrix<double> pooled(5, c);
  pooled.row(0) = features.flat().cast<double>().colwise().mean();
  const Index hh = std::max<Index>(1, features.grid_h / 2), hw = std::max<Index>(1, features.grid_w / 2);
  const Index y_starts[2] = {0, features.grid_h - hh}, x_starts[2] = {0, features.grid_w - hw};
  for (int qy = 0; qy < 2; ++qy)
    for (int qx = 0; qx < 2; ++qx) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(c);
      for (Index y = y_starts[qy]; y < y_starts[qy] + hh; ++y)
        for (Index x = x_starts[qx]; x < x_starts[qx] + hw; ++x)
          acc += Eigen::Map<const Eigen::RowVectorXf>(&features.data(y, x, 0), c).cast<double>();
      pooled.row(1 + qy * 2 + qx) = acc / static_cast<double>(hh * hw);
    }
  const RowMatrix<float> proj = seeded_uniform(c, dim, fan_in_scale(c), seed ^ 0x696d616765000000ull);
  const RowMatrix<float> tokens = pooled.cast<float>() * proj;
  return Tensor({5, dim}, std::vector<float>(tokens.data(), tokens.data() + tokens.size()));
}

double noise_pred_loss(const Tensor& eps, const Tensor& eps_hat) {
  require_same_shape(eps, eps_hat, "noise_pred_loss");
  return (eps.array().cast<double>() - eps_hat.array().cast<double>()).square().mean();
}

double stage1_total_loss(double l_sem, double l_cyc, double l_mask, double lambda_c, double lambda_m) {
  return l_sem + lambda_c * l_cyc + lambda_m * l_mask;
}

}  // namespace pst
