#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stgan/skipthought.hpp"
#include "stgan/tensor.hpp"

namespace stgan::gan {

using nd::Tensor;
using Rows = std::vector<std::vector<double>>;

enum class FMeasure { Vanilla, LSGAN, WGAN, WGAN_GP };

std::string_view fmeasure_name(FMeasure f);
FMeasure parse_fmeasure(std::string_view name);

enum class OutputActivation { Linear, Tanh };

std::string_view output_name(OutputActivation a);
OutputActivation parse_output(std::string_view name);

struct MinibatchConfig {
  bool enabled = false;
  std::size_t a_in = 64;  // must equal the last discriminator hidden width
  std::size_t b = 16;
  std::size_t c = 8;
};

struct GanConfig {
  std::size_t noise_dim = 32;
  std::size_t data_dim = 128;
  std::size_t cond_dim = 0;  // 0: unconditional
  std::vector<std::size_t> g_hidden{128, 128};
  OutputActivation g_output = OutputActivation::Linear;  // tanh suits data bounded in (-1, 1)
  std::vector<std::size_t> d_hidden{128, 64};
  // Optional 1-D convolution over the input vector (as a length-D, one-channel
  // sequence) ahead of the dense discriminator layers. Empty means off.
  std::vector<std::size_t> d_conv_channels;
  std::size_t d_conv_kernel = 5;
  FMeasure fmeasure = FMeasure::WGAN_GP;
  MinibatchConfig minibatch;
  double gp_lambda = 10.0;
  double clip_value = 0.01;  // critic weight clamp for plain WGAN
  double leaky_slope = 0.2;
  std::size_t g_updates = 2;
  std::size_t d_updates = 1;
  std::size_t batch_size = 16;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double clip_norm = 5.0;  // global gradient-norm clip, 0 disables
  std::size_t rounds = 1000;
  std::size_t snapshot_every = 0;  // rounds between sample snapshots, 0 disables
  std::size_t snapshot_size = 16;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on inconsistent sizes.
  void validate() const;
};

struct Dense {
  Tensor weight;  // in x out
  Tensor bias;    // out
  Tensor operator()(const Tensor& x) const;
};

struct Conv1d {
  Tensor weight;  // (kernel * in_channels) x out_channels
  Tensor bias;    // out_channels
  std::size_t kernel = 1;
  /// x [B, L, C_in] -> [B, L - kernel + 1, C_out], valid padding, stride 1.
  Tensor operator()(const Tensor& x) const;
};

struct Generator {
  std::vector<Dense> layers;
  std::size_t noise_dim = 0, cond_dim = 0;
  double slope = 0.2;
  OutputActivation output = OutputActivation::Linear;

  /// noise [B, Z], condition [B, c] iff cond_dim > 0. Leaky hidden layers, then `output`.
  Tensor operator()(const Tensor& noise, const Tensor& condition = {}) const;
  std::vector<std::pair<std::string, Tensor>> named_params() const;
};

struct Discriminator {
  std::vector<Conv1d> convs;
  std::vector<Dense> hidden;
  Tensor minibatch_t;  // A x B x C, undefined when off
  Dense out;
  std::size_t data_dim = 0, cond_dim = 0;
  double slope = 0.2;

  /// x [B, D] -> raw scores [B].
  Tensor operator()(const Tensor& x, const Tensor& condition = {}) const;
  std::vector<std::pair<std::string, Tensor>> named_params() const;
};

std::vector<Tensor> values_of(const std::vector<std::pair<std::string, Tensor>>& named);

/// f [n, A], T [A, B, C] -> [n, B]; feature b of sample i is
/// sum over j != i of exp(-||M_ib - M_jb||_1) with M_i = f_i T.
Tensor minibatch_features(const Tensor& f, const Tensor& t);

struct Losses {
  Tensor d_loss, g_loss;
};

Losses loss_vanilla(const Tensor& real, const Tensor& fake);
Losses loss_lsgan(const Tensor& real, const Tensor& fake);
Losses loss_wgan(const Tensor& real, const Tensor& fake);
Losses gan_losses(FMeasure f, const Tensor& real, const Tensor& fake);

using Critic = std::function<Tensor(const Tensor&)>;

struct Penalty {
  Tensor value;           // lambda * mean((||grad|| - 1)^2), differentiable w.r.t. the critic
  double mean_grad_norm;  // mean ||grad D(x_hat)||
};

/// Interpolates x_hat = e x_real + (1 - e) x_fake with e ~ U(0,1) per row.
/// x_hat is a fresh leaf: the penalty differentiates w.r.t. the critic only.
Penalty gradient_penalty(const Critic& critic, const Tensor& x_real, const Tensor& x_fake, double lambda,
                         std::mt19937_64& rng);
/// Mean gradient norm of the critic at `n` interpolates (no penalty graph kept).
double interpolate_grad_norm(const Critic& critic, const Tensor& x_real, const Tensor& x_fake,
                             std::mt19937_64& rng);

struct GanModel {
  GanConfig config;
  Generator g;
  Discriminator d;
  std::size_t d_steps = 0, g_steps = 0;
};

GanModel make_gan(const GanConfig& config);

struct HistoryRow {
  std::size_t round = 0;
  double d_loss = 0, g_loss = 0;
  double grad_norm = std::numeric_limits<double>::quiet_NaN();  // wgan-gp only
};

struct Snapshot {
  std::size_t round = 0;
  Rows samples;
};

struct GanResult {
  std::vector<HistoryRow> history;
  std::vector<Snapshot> snapshots;
};

/// Each round: d_updates discriminator steps on fresh real and fake batches,
/// then g_updates generator steps. `conditions` holds one row per real row in
/// conditional mode. A non-finite loss restores the round's starting
/// parameters and throws.
GanResult gan_train(GanModel& model, const Rows& real, const Rows& conditions = {});

/// Samples G on n standard-normal draws seeded by `seed`.
Rows generate(const GanModel& model, std::size_t n, std::uint64_t seed, const Rows& conditions = {});

// ---- toy data and diagnostics ---------------------------------------------

Rows ring_centers(std::size_t k = 8, double radius = 2.0);
/// n points from an equal-weight isotropic Gaussian mixture at `centers`.
Rows sample_mixture(const Rows& centers, double sigma, std::size_t n, std::mt19937_64& rng);
std::size_t mode_coverage(const Rows& samples, const Rows& centers, double radius);
/// Fraction of distinct rows (exact comparison of the given strings).
double distinct_ratio(const std::vector<std::string>& items);

enum class DecodeMode { Greedy, Sample };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::Greedy;
  std::size_t beam_width = 5;
  double temperature = 1.0;
  std::size_t max_len = 30;
};

std::vector<st::DecodeResult> sample_and_decode(const GanModel& model, std::size_t n, const st::Decoder& decoder,
                                                const DecodeOptions& options, std::uint64_t seed,
                                                const Rows& conditions = {});

}  // namespace stgan::gan
