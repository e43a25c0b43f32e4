#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pst/features.hpp"
#include "pst/tensor.hpp"

namespace pst {

inline constexpr int kDefaultTrainSteps = 1000;
inline constexpr double kDefaultBetaStart = 8.5e-4;
inline constexpr double kDefaultBetaEnd = 0.012;
inline constexpr int kDefaultInversionSteps = 10;
inline constexpr int kDefaultSamplingSteps = 30;
inline constexpr int kDefaultFixedPointIters = 5;
inline constexpr double kDefaultLambdaCyc = 1.0;
inline constexpr double kDefaultLambdaMask = 10.0;

/// Cumulative signal level alpha_bar[t], t = 0..T, with alpha_bar[0] = 1.
struct NoiseSchedule {
  int total_steps = 0;
  std::vector<double> alpha_bar;

  double at(int t) const {
    require(t >= 0 && t <= total_steps, "timestep " + std::to_string(t) + " outside [0, " +
                                            std::to_string(total_steps) + "]");
    return alpha_bar[static_cast<std::size_t>(t)];
  }
};

/// Linear beta ramp over T steps; alpha_bar[t] = prod_{s <= t} (1 - beta_s).
NoiseSchedule make_schedule(int total_steps = kDefaultTrainSteps, double beta_start = kDefaultBetaStart,
                            double beta_end = kDefaultBetaEnd);

/// Ascending timesteps floor(k * T / steps), k = 0..steps (both endpoints).
std::vector<int> timestep_subsequence(const NoiseSchedule& schedule, int steps);

/// sqrt(ab_t) * z0 + sqrt(1 - ab_t) * eps.
Tensor forward_noise(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& schedule);

/// Deterministic DDIM update from `t` to `t_prev < t`.
Tensor ddim_step(const Tensor& z_t, const Tensor& eps_hat, int t, int t_prev, const NoiseSchedule& schedule);

/// The same recurrence run upward, from `t` to `t_next > t`.
Tensor ddim_step_up(const Tensor& z_t, const Tensor& eps_hat, int t, int t_next, const NoiseSchedule& schedule);

/// Image-prompt / text-prompt token sequences for the cross-attention block.
struct StyleConditioning {
  Tensor text_tokens;   // [M_t, d_c]
  Tensor image_tokens;  // [M_i, d_c]
  float lambda = 1.0f;
};

/// Everything a denoiser sees besides z_t and t.
struct Conditioning {
  Tensor content;  // c_cnt, [3C, H, W]
  StyleConditioning style;
};

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  /// Predicted noise, same shape as `z_t`.
  virtual Tensor predict(const Tensor& z_t, int t, const Conditioning& cond) const = 0;
};

class ZeroDenoiser final : public Denoiser {
 public:
  Tensor predict(const Tensor& z_t, int, const Conditioning&) const override { return Tensor(z_t.shape()); }
};

/// eps_hat = slope * z_t.
class LinearDenoiser final : public Denoiser {
 public:
  explicit LinearDenoiser(float slope) : slope_(slope) {}
  Tensor predict(const Tensor& z_t, int t, const Conditioning& cond) const override;

 private:
  float slope_;
};

/// Runs the sampler from the highest subsequence timestep down to 0.
Tensor ddim_sample(const Tensor& z_T, const Denoiser& denoiser, int steps, const Conditioning& cond,
                   const NoiseSchedule& schedule);

/// Maps a clean latent up to timestep T. Each upward step is refined by
/// `fixed_point_iters` fixed-point passes on the noise estimate, so the result
/// is the point the matching downward step maps back to; 0 gives the plain
/// one-evaluation inversion.
Tensor ddim_invert(const Tensor& z0, const Denoiser& denoiser, int steps, const Conditioning& cond,
                   const NoiseSchedule& schedule, int fixed_point_iters = kDefaultFixedPointIters);

/// Projection weights for one decoupled cross-attention block.
struct AttentionWeights {
  RowMatrix<float> query;       // [d, d_k]
  RowMatrix<float> text_key;    // [d_c, d_k]
  RowMatrix<float> text_value;  // [d_c, d]
  RowMatrix<float> image_key;   // [d_c, d_k]
  RowMatrix<float> image_value; // [d_c, d]
};

/// softmax(Q K^T / sqrt(d_k)) V with row-stable softmax.
template <class DQ, class DK, class DV>
RowMatrix<typename DQ::Scalar> attention(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DK>& k,
                                         const Eigen::MatrixBase<DV>& v) {
  using Scalar = typename DQ::Scalar;
  RowMatrix<Scalar> logits = (q * k.transpose()) / std::sqrt(static_cast<Scalar>(q.cols()));
  for (Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return logits * v;
}

/// Z_new = softmax(Q K_t^T / sqrt(d)) V_t + lambda * softmax(Q K_i^T / sqrt(d)) V_i
/// with Q = Z W_q, K_t = c_t W_k^t, V_t = c_t W_v^t and likewise for c_i.
/// With lambda == 0 (or no image tokens) the image branch is skipped.
Tensor decoupled_cross_attention(const Tensor& z, const Tensor& text_tokens, const Tensor& image_tokens,
                                 const AttentionWeights& weights, float lambda);

struct ToyDenoiserConfig {
  Index latent_channels = 3;
  Index width = 16;
  Index token_dim = 8;
  Index key_dim = 8;
  float cnt_scale = 1.0f;
  float output_scale = 0.1f;
  std::uint64_t seed = 0;
};

/// Small seeded stand-in for the noise-prediction network: pointwise lift of
/// z_t plus a time embedding, additive content injection scaled by
/// `cnt_scale`, one residual decoupled cross-attention block, and a tanh
/// readout projected back to the latent channels.
class ToyDenoiser final : public Denoiser {
 public:
  explicit ToyDenoiser(const ToyDenoiserConfig& config);
  Tensor predict(const Tensor& z_t, int t, const Conditioning& cond) const override;

  const ToyDenoiserConfig& config() const { return config_; }
  const AttentionWeights& attention_weights() const { return attn_; }
  /// Upper bound on the L2 norm of the prediction at any single position.
  double output_bound() const;

 private:
  ToyDenoiserConfig config_;
  RowMatrix<float> in_proj_;    // [C, d]
  Eigen::RowVectorXf in_bias_;  // [d]
  RowMatrix<float> time_proj_;  // [8, d]
  RowMatrix<float> cnt_proj_;   // [3C, d]
  AttentionWeights attn_;
  RowMatrix<float> out_proj_;   // [d, C]
};

/// Seeded pseudo text-prompt embedding [tokens, dim].
Tensor text_embedding(Index tokens, Index dim, std::uint64_t seed);

/// Five image tokens (global mean plus four quadrant means of the feature
/// grid) projected to `dim` by a seeded matrix: [5, dim].
Tensor image_tokens(const FeatureMap& features, Index dim, std::uint64_t seed);

/// Mean squared error over all elements.
double noise_pred_loss(const Tensor& eps, const Tensor& eps_hat);

/// l_sem + lambda_c * l_cyc + lambda_m * l_mask.
double stage1_total_loss(double l_sem, double l_cyc, double l_mask, double lambda_c = kDefaultLambdaCyc,
                         double lambda_m = kDefaultLambdaMask);

/// Deterministic uniform [-scale, scale) matrix from a 64-bit seed.
RowMatrix<float> seeded_uniform(Index rows, Index cols, float scale, std::uint64_t seed);

}  // namespace pst
