#include "stgan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "stgan/autograd.hpp"
#include "stgan/optim.hpp"

namespace stgan::gan {

using namespace nd;

namespace {

constexpr double kMinibatchInitStd = 0.05;

Dense make_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {scaled_normal_param({in, out}, in, rng), Tensor::zeros({out}, true)};
}

Tensor rows_tensor(const Rows& rows, std::span<const std::size_t> idx, std::size_t width) {
  std::vector<double> flat;
  flat.reserve(idx.size() * width);
  for (auto i : idx) {
    if (rows[i].size() != width)
      throw std::invalid_argument("row of width " + std::to_string(rows[i].size()) + ", expected " +
                                  std::to_string(width));
    flat.insert(flat.end(), rows[i].begin(), rows[i].end());
  }
  return Tensor({idx.size(), width}, std::move(flat));
}

Rows tensor_rows(const Tensor& t) {
  Rows out(t.size(0));
  const std::size_t w = t.size(1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].assign(t.data().begin() + i * w, t.data().begin() + (i + 1) * w);
  return out;
}

Tensor generator_loss(FMeasure f, const Tensor& fake) {
  switch (f) {
    case FMeasure::Vanilla: return neg(mean(log(sigmoid(fake))));
    case FMeasure::LSGAN: return scale(mean(square(add_scalar(fake, -1.0))), 0.5);
    case FMeasure::WGAN:
    case FMeasure::WGAN_GP: return neg(mean(fake));
  }
  throw std::logic_error("unreachable");
}

// Cycles through seeded shuffles of [0, n) so every row is used once per pass.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<std::size_t> next(std::size_t size) {
    std::vector<std::size_t> out;
    while (out.size() < size) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64& rng_;
  std::size_t cursor_ = 0;
};

std::vector<std::vector<double>> snapshot(std::span<const Tensor> params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

void restore(std::span<const Tensor> params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = Tensor(params[i]).mutable_data();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void check_condition(std::size_t cond_dim, const Tensor& condition, std::size_t batch, const char* who) {
  if ((cond_dim > 0) != condition.defined())
    throw std::invalid_argument(std::string(who) + (cond_dim > 0 ? ": condition required" : ": unexpected condition"));
  if (condition.defined() && (condition.dim() != 2 || condition.size(0) != batch || condition.size(1) != cond_dim))
    throw std::invalid_argument(std::string(who) + ": condition shape " + shape_str(condition.shape()) +
                                ", expected [" + std::to_string(batch) + ", " + std::to_string(cond_dim) + "]");
}

}  // namespace

std::string_view fmeasure_name(FMeasure f) {
  switch (f) {
    case FMeasure::Vanilla: return "vanilla";
    case FMeasure::LSGAN: return "lsgan";
    case FMeasure::WGAN: return "wgan";
    case FMeasure::WGAN_GP: return "wgan-gp";
  }
  return "?";
}

std::string_view output_name(OutputActivation a) { return a == OutputActivation::Tanh ? "tanh" : "linear"; }

OutputActivation parse_output(std::string_view name) {
  for (auto a : {OutputActivation::Linear, OutputActivation::Tanh})
    if (output_name(a) == name) return a;
  throw std::invalid_argument("unknown generator output '" + std::string(name) + "'");
}

FMeasure parse_fmeasure(std::string_view name) {
  for (auto f : {FMeasure::Vanilla, FMeasure::LSGAN, FMeasure::WGAN, FMeasure::WGAN_GP})
    if (fmeasure_name(f) == name) return f;
  throw std::invalid_argument("unknown f-measure '" + std::string(name) + "'");
}

void GanConfig::validate() const {
  if (noise_dim == 0 || data_dim == 0) throw std::invalid_argument("noise and data dimensions must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (minibatch.enabled) {
    if (batch_size < 2) throw std::invalid_argument("minibatch discrimination needs batches of at least 2");
    if (d_hidden.empty()) throw std::invalid_argument("minibatch discrimination needs a hidden discriminator layer");
    if (minibatch.a_in != d_hidden.back())
      throw std::invalid_argument("minibatch A_in " + std::to_string(minibatch.a_in) +
                                  " differs from the last discriminator width " + std::to_string(d_hidden.back()));
    if (minibatch.b == 0 || minibatch.c == 0) throw std::invalid_argument("minibatch B and C must be >= 1");
  }
  if (!d_conv_channels.empty()) {
    if (d_conv_kernel == 0) throw std::invalid_argument("convolution kernel must be >= 1");
    if ((d_conv_kernel - 1) * d_conv_channels.size() >= data_dim)
      throw std::invalid_argument("convolution stack does not fit the data dimension");
  }
  if (g_updates == 0 && d_updates == 0) throw std::invalid_argument("schedule performs no updates");
}

Tensor Dense::operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }

Tensor Conv1d::operator()(const Tensor& x) const {
  const std::size_t batch = x.size(0), len = x.size(1), cin = x.size(2);
  if (len < kernel) throw std::invalid_argument("conv1d input shorter than kernel");
  const std::size_t out_len = len - kernel + 1;
  std::vector<Tensor> taps;
  for (std::size_t j = 0; j < kernel; ++j) taps.push_back(slice(x, 1, j, out_len));
  const Tensor cols = reshape(concat(taps, 2), {batch * out_len, kernel * cin});
  return reshape(add(matmul(cols, weight), bias), {batch, out_len, bias.size(0)});
}

Tensor Generator::operator()(const Tensor& noise, const Tensor& condition) const {
  if (noise.dim() != 2 || noise.size(1) != noise_dim)
    throw std::invalid_argument("generator noise shape " + shape_str(noise.shape()) + ", expected [B, " +
                                std::to_string(noise_dim) + "]");
  check_condition(cond_dim, condition, noise.size(0), "generator");
  Tensor h = condition.defined() ? concat({noise, condition}, 1) : noise;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = leaky_relu(h, slope);
  }
  return output == OutputActivation::Tanh ? tanh(h) : h;
}

std::vector<std::pair<std::string, Tensor>> Generator::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.emplace_back("layer" + std::to_string(i) + ".weight", layers[i].weight);
    out.emplace_back("layer" + std::to_string(i) + ".bias", layers[i].bias);
  }
  return out;
}

Tensor Discriminator::operator()(const Tensor& x, const Tensor& condition) const {
  if (x.dim() != 2 || x.size(1) != data_dim)
    throw std::invalid_argument("discriminator input shape " + shape_str(x.shape()) + ", expected [B, " +
                                std::to_string(data_dim) + "]");
  const std::size_t batch = x.size(0);
  check_condition(cond_dim, condition, batch, "discriminator");
  Tensor h = x;
  if (!convs.empty()) {
    h = reshape(x, {batch, data_dim, 1});
    for (const auto& c : convs) h = leaky_relu(c(h), slope);
    h = reshape(h, {batch, h.size(1) * h.size(2)});
  }
  if (condition.defined()) h = concat({h, condition}, 1);
  for (const auto& layer : hidden) h = leaky_relu(layer(h), slope);
  if (minibatch_t.defined()) h = concat({h, minibatch_features(h, minibatch_t)}, 1);
  return reshape(out(h), {batch});
}

std::vector<std::pair<std::string, Tensor>> Discriminator::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out_params;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    out_params.emplace_back("conv" + std::to_string(i) + ".weight", convs[i].weight);
    out_params.emplace_back("conv" + std::to_string(i) + ".bias", convs[i].bias);
  }
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    out_params.emplace_back("hidden" + std::to_string(i) + ".weight", hidden[i].weight);
    out_params.emplace_back("hidden" + std::to_string(i) + ".bias", hidden[i].bias);
  }
  if (minibatch_t.defined()) out_params.emplace_back("minibatch", minibatch_t);
  out_params.emplace_back("out.weight", out.weight);
  out_params.emplace_back("out.bias", out.bias);
  return out_params;
}

std::vector<Tensor> values_of(const std::vector<std::pair<std::string, Tensor>>& named) {
  std::vector<Tensor> out;
  for (const auto& [n, t] : named) out.push_back(t);
  return out;
}

Tensor minibatch_features(const Tensor& f, const Tensor& t) {
  if (f.dim() != 2 || t.dim() != 3 || f.size(1) != t.size(0))
    throw std::invalid_argument("minibatch_features: f " + shape_str(f.shape()) + " vs T " + shape_str(t.shape()));
  const std::size_t n = f.size(0), b = t.size(1), c = t.size(2);
  if (n < 2) throw std::invalid_argument("minibatch features need a batch of at least 2");
  const Tensor m = matmul(f, reshape(t, {t.size(0), b * c}));
  const Tensor diff = sub(reshape(m, {n, 1, b, c}), reshape(m, {1, n, b, c}));
  const Tensor sim = exp(neg(sum(abs(diff), 3)));  // [n, n, b]
  return add_scalar(sum(sim, 1), -1.0);  // drop j == i, where exp(0) = 1
}

Losses loss_vanilla(const Tensor& real, const Tensor& fake) {
  Tensor d = sub(neg(mean(log(sigmoid(real)))), mean(log(rsub_scalar(1.0, sigmoid(fake)))));
  return {d, generator_loss(FMeasure::Vanilla, fake)};
}

Losses loss_lsgan(const Tensor& real, const Tensor& fake) {
  Tensor d = add(scale(mean(square(add_scalar(real, -1.0))), 0.5), scale(mean(square(fake)), 0.5));
  return {d, generator_loss(FMeasure::LSGAN, fake)};
}

Losses loss_wgan(const Tensor& real, const Tensor& fake) {
  return {sub(mean(fake), mean(real)), generator_loss(FMeasure::WGAN, fake)};
}

Losses gan_losses(FMeasure f, const Tensor& real, const Tensor& fake) {
  switch (f) {
    case FMeasure::Vanilla: return loss_vanilla(real, fake);
    case FMeasure::LSGAN: return loss_lsgan(real, fake);
    case FMeasure::WGAN:
    case FMeasure::WGAN_GP: return loss_wgan(real, fake);
  }
  throw std::logic_error("unreachable");
}

namespace {

Tensor interpolate(const Tensor& x_real, const Tensor& x_fake, std::mt19937_64& rng) {
  if (x_real.shape() != x_fake.shape())
    throw std::invalid_argument("gradient penalty: real " + shape_str(x_real.shape()) + " vs fake " +
                                shape_str(x_fake.shape()));
  const std::size_t n = x_real.size(0), w = x_real.numel() / n;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> v(x_real.numel());
  for (std::size_t i = 0; i < n; ++i) {
    const double e = unit(rng);
    for (std::size_t k = 0; k < w; ++k) v[i * w + k] = e * x_real[i * w + k] + (1.0 - e) * x_fake[i * w + k];
  }
  return Tensor(x_real.shape(), std::move(v), true);
}

}  // namespace

Penalty gradient_penalty(const Critic& critic, const Tensor& x_real, const Tensor& x_fake, double lambda,
                         std::mt19937_64& rng) {
  GradModeGuard on(true);
  const Tensor x_hat = interpolate(x_real, x_fake, rng);
  const Tensor scores = critic(x_hat);
  const Tensor g = grad(sum(scores), std::span<const Tensor>(&x_hat, 1), true)[0];
  const Tensor norms = row_l2_norm(reshape(g, {g.size(0), g.numel() / g.size(0)}));
  double mean_norm = 0;
  for (double v : norms.data()) mean_norm += v;
  mean_norm /= static_cast<double>(norms.numel());
  if (!std::isfinite(mean_norm)) throw std::runtime_error("gradient penalty: non-finite critic gradient");
  return {scale(mean(square(add_scalar(norms, -1.0))), lambda), mean_norm};
}

double interpolate_grad_norm(const Critic& critic, const Tensor& x_real, const Tensor& x_fake,
                             std::mt19937_64& rng) {
  GradModeGuard on(true);
  const Tensor x_hat = interpolate(x_real, x_fake, rng);
  const Tensor g = grad(sum(critic(x_hat)), std::span<const Tensor>(&x_hat, 1))[0];
  const Tensor norms = row_l2_norm(reshape(g, {g.size(0), g.numel() / g.size(0)}));
  double total = 0;
  for (double v : norms.data()) total += v;
  return total / static_cast<double>(norms.numel());
}

GanModel make_gan(const GanConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  GanModel m;
  m.config = config;

  m.g.noise_dim = config.noise_dim;
  m.g.cond_dim = config.cond_dim;
  m.g.slope = config.leaky_slope;
  m.g.output = config.g_output;
  std::size_t width = config.noise_dim + config.cond_dim;
  for (auto h : config.g_hidden) {
    m.g.layers.push_back(make_dense(width, h, rng));
    width = h;
  }
  m.g.layers.push_back(make_dense(width, config.data_dim, rng));

  m.d.data_dim = config.data_dim;
  m.d.cond_dim = config.cond_dim;
  m.d.slope = config.leaky_slope;
  width = config.data_dim;
  if (!config.d_conv_channels.empty()) {
    std::size_t len = config.data_dim, channels = 1;
    for (auto out_ch : config.d_conv_channels) {
      const std::size_t fan_in = config.d_conv_kernel * channels;
      m.d.convs.push_back({scaled_normal_param({fan_in, out_ch}, fan_in, rng), Tensor::zeros({out_ch}, true),
                           config.d_conv_kernel});
      len = len - config.d_conv_kernel + 1;
      channels = out_ch;
    }
    width = len * channels;
  }
  width += config.cond_dim;
  for (auto h : config.d_hidden) {
    m.d.hidden.push_back(make_dense(width, h, rng));
    width = h;
  }
  if (config.minibatch.enabled) {
    const auto& mb = config.minibatch;
    m.d.minibatch_t = normal_tensor({mb.a_in, mb.b, mb.c}, rng, kMinibatchInitStd).set_requires_grad(true);
    width += mb.b;
  }
  m.d.out = make_dense(width, 1, rng);
  return m;
}

GanResult gan_train(GanModel& model, const Rows& real, const Rows& conditions) {
  const GanConfig& cfg = model.config;
  cfg.validate();
  GanResult result;
  if (cfg.rounds == 0) return result;
  if (real.size() < 2 * cfg.batch_size)
    throw std::invalid_argument("gan_train needs at least " + std::to_string(2 * cfg.batch_size) +
                                " real rows, got " + std::to_string(real.size()));
  const bool conditional = cfg.cond_dim > 0;
  if (conditional != !conditions.empty() || (conditional && conditions.size() != real.size()))
    throw std::invalid_argument("conditional training needs one condition row per real row");

  const auto g_params = values_of(model.g.named_params());
  const auto d_params = values_of(model.d.named_params());
  std::vector<Tensor> all_params = g_params;
  all_params.insert(all_params.end(), d_params.begin(), d_params.end());
  const AdamOptions adam{.lr = cfg.lr, .beta1 = cfg.beta1, .beta2 = cfg.beta2};
  Adam opt_g(g_params, adam), opt_d(d_params, adam);
  std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  BatchSampler real_batches(real.size(), rng);
  const std::size_t bs = cfg.batch_size;

  auto cond_of = [&](std::span<const std::size_t> idx) {
    return conditional ? rows_tensor(conditions, idx, cfg.cond_dim) : Tensor();
  };
  auto fail = [&](const std::vector<std::vector<double>>& good, std::size_t round, const char* what) {
    restore(all_params, good);
    throw std::runtime_error(std::string("GAN training diverged (") + what + ") in round " + std::to_string(round));
  };

  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    const auto good = snapshot(all_params);
    HistoryRow row;
    row.round = round;

    for (std::size_t k = 0; k < cfg.d_updates; ++k) {
      const auto idx = real_batches.next(bs);
      const Tensor xr = rows_tensor(real, idx, cfg.data_dim);
      const Tensor cr = cond_of(idx);
      Tensor xf;
      {
        NoGradGuard no_grad;
        xf = model.g(normal_tensor({bs, cfg.noise_dim}, rng), cr);
      }
      Tensor d_loss = gan_losses(cfg.fmeasure, model.d(xr, cr), model.d(xf, cr)).d_loss;
      if (cfg.fmeasure == FMeasure::WGAN_GP) {
        Penalty p;
        try {
          p = gradient_penalty([&](const Tensor& x) { return model.d(x, cr); }, xr, xf, cfg.gp_lambda, rng);
        } catch (const std::runtime_error&) {
          fail(good, round, "critic gradient");
        }
        d_loss = add(d_loss, p.value);
        row.grad_norm = p.mean_grad_norm;
      }
      if (!std::isfinite(d_loss.item())) fail(good, round, "discriminator loss");
      backward(d_loss);
      if (cfg.clip_norm > 0) clip_global_norm(d_params, cfg.clip_norm);
      opt_d.step();
      if (cfg.fmeasure == FMeasure::WGAN) clamp_values(d_params, cfg.clip_value);
      ++model.d_steps;
      row.d_loss = d_loss.item();
    }

    for (std::size_t k = 0; k < cfg.g_updates; ++k) {
      const Tensor c = conditional ? cond_of(real_batches.next(bs)) : Tensor();
      const Tensor fake = model.d(model.g(normal_tensor({bs, cfg.noise_dim}, rng), c), c);
      const Tensor g_loss = generator_loss(cfg.fmeasure, fake);
      if (!std::isfinite(g_loss.item())) fail(good, round, "generator loss");
      backward(g_loss);
      if (cfg.clip_norm > 0) clip_global_norm(g_params, cfg.clip_norm);
      opt_g.step();
      ++model.g_steps;
      row.g_loss = g_loss.item();
    }

    result.history.push_back(row);
    if (cfg.snapshot_every > 0 && round % cfg.snapshot_every == 0)
      result.snapshots.push_back({round, generate(model, cfg.snapshot_size, cfg.seed + round, conditions)});
    if (round % 100 == 0 || round == cfg.rounds)
      spdlog::debug("gan round {}/{} d_loss {:.4f} g_loss {:.4f}", round, cfg.rounds, row.d_loss, row.g_loss);
  }
  return result;
}

Rows generate(const GanModel& model, std::size_t n, std::uint64_t seed, const Rows& conditions) {
  if (n == 0) return {};
  const auto& cfg = model.config;
  if (cfg.cond_dim > 0 && conditions.empty()) throw std::invalid_argument("conditional generator needs conditions");
  NoGradGuard no_grad;
  std::mt19937_64 rng(seed);
  const Tensor z = normal_tensor({n, cfg.noise_dim}, rng);
  Tensor c;
  if (cfg.cond_dim > 0) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i % conditions.size();
    c = rows_tensor(conditions, idx, cfg.cond_dim);
  }
  return tensor_rows(model.g(z, c));
}

Rows ring_centers(std::size_t k, double radius) {
  Rows out;
  for (std::size_t i = 0; i < k; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k);
    out.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return out;
}

Rows sample_mixture(const Rows& centers, double sigma, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
  std::normal_distribution<double> noise(0.0, sigma);
  Rows out(n);
  for (auto& row : out) {
    const auto& c = centers[pick(rng)];
    for (double v : c) row.push_back(v + noise(rng));
  }
  return out;
}

std::size_t mode_coverage(const Rows& samples, const Rows& centers, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("mode_coverage radius must be positive");
  std::size_t covered = 0;
  for (const auto& c : centers) {
    const bool hit = std::any_of(samples.begin(), samples.end(), [&](const std::vector<double>& s) {
      double d = 0;
      for (std::size_t k = 0; k < c.size(); ++k) d += (s[k] - c[k]) * (s[k] - c[k]);
      return d <= radius * radius;
    });
    covered += hit;
  }
  return covered;
}

double distinct_ratio(const std::vector<std::string>& items) {
  if (items.empty()) return 0.0;
  return static_cast<double>(std::set<std::string>(items.begin(), items.end()).size()) /
         static_cast<double>(items.size());
}

std::vector<st::DecodeResult> sample_and_decode(const GanModel& model, std::size_t n, const st::Decoder& decoder,
                                                const DecodeOptions& options, std::uint64_t seed,
                                                const Rows& conditions) {
  std::vector<st::DecodeResult> out;
  const Rows vectors = generate(model, n, seed, conditions);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (options.mode == DecodeMode::Greedy)
      out.push_back(st::greedy_decode(vectors[i], decoder, options.max_len));
    else
      out.push_back(st::sample_decode(vectors[i], decoder, options.beam_width, options.temperature, seed + 1 + i,
                                      options.max_len));
  }
  return out;
}

}  // namespace stgan::gan
