#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "model_cases.hpp"
#include "stgan/autograd.hpp"
#include "stgan/gan.hpp"
#include "stgan/optim.hpp"

using namespace stgan;
using namespace stgan::gan;
using nd::Tensor;

namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

GanConfig toy_config(std::uint64_t seed) {
  GanConfig c;
  c.noise_dim = 2;
  c.data_dim = 2;
  c.g_hidden = {16};
  c.d_hidden = {16, 8};
  c.minibatch.a_in = 8;
  c.batch_size = 8;
  c.rounds = 5;
  c.seed = seed;
  return c;
}

Rows toy_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_mixture(ring_centers(), 0.05, n, rng);
}

std::vector<std::vector<double>> values(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

std::vector<Tensor> all_params(const GanModel& m) {
  auto p = values_of(m.g.named_params());
  auto d = values_of(m.d.named_params());
  p.insert(p.end(), d.begin(), d.end());
  return p;
}

}  // namespace

TEST_CASE("f-measure names round trip") {
  for (auto f : {FMeasure::Vanilla, FMeasure::LSGAN, FMeasure::WGAN, FMeasure::WGAN_GP})
    CHECK(parse_fmeasure(fmeasure_name(f)) == f);
  CHECK_THROWS_AS(parse_fmeasure("gan"), std::invalid_argument);
}

TEST_CASE("vanilla loss") {
  auto l = loss_vanilla(vec({0, 0}), vec({0, 0, 0}));
  CHECK(l.d_loss.item() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  CHECK(loss_vanilla(vec({40}), vec({-40})).d_loss.item() < 1e-12);

  auto fake = Tensor({2}, {0.3, -0.4}, true);
  nd::backward(loss_vanilla(vec({0}), fake).g_loss);
  for (double g : fake.grad()) CHECK(g < 0);  // descent raises the fake scores
}

TEST_CASE("least-squares loss") {
  CHECK(loss_lsgan(vec({1, 1}), vec({0, 0})).d_loss.item() == 0.0);
  CHECK(loss_lsgan(vec({0}), vec({1})).g_loss.item() == 0.0);
  CHECK(loss_lsgan(vec({0}), vec({0})).d_loss.item() == doctest::Approx(0.5));
}

TEST_CASE("wasserstein loss") {
  CHECK(loss_wgan(vec({1, 3}), vec({0, 0})).d_loss.item() == doctest::Approx(-2.0));
  CHECK(loss_wgan(vec({0.7, -1}), vec({0.7, -1})).d_loss.item() == doctest::Approx(0.0));
  CHECK(loss_wgan(vec({0}), vec({2, 4})).g_loss.item() == doctest::Approx(-3.0));
}

TEST_CASE("gradient penalty on analytic critics") {
  std::mt19937_64 rng(3);
  auto xr = Tensor({4, 1}, {1, 2, -1, 0.5});
  auto xf = Tensor({4, 1}, {0, -3, 2, 7});
  auto identity = [](const Tensor& x) { return nd::reshape(x, {x.size(0)}); };
  auto twice = [](const Tensor& x) { return nd::scale(nd::reshape(x, {x.size(0)}), 2.0); };
  auto constant = [](const Tensor& x) { return nd::add_scalar(nd::scale(nd::reshape(x, {x.size(0)}), 0.0), 1.5); };

  auto p = gradient_penalty(identity, xr, xf, 10.0, rng);
  CHECK(p.value.item() == doctest::Approx(0.0));
  CHECK(p.mean_grad_norm == doctest::Approx(1.0));
  CHECK(gradient_penalty(twice, xr, xf, 10.0, rng).value.item() == doctest::Approx(10.0));
  CHECK(gradient_penalty(constant, xr, xf, 7.0, rng).value.item() == doctest::Approx(7.0));
  CHECK_THROWS_AS(gradient_penalty(identity, xr, Tensor({3, 1}, {0, 0, 0}), 10.0, rng), std::invalid_argument);
}

TEST_CASE("minibatch features") {
  // T = identity on one kernel of width 1, so M rows equal f rows.
  auto t = Tensor({1, 1, 1}, {1.0});
  auto f = Tensor({3, 1}, {0.0, 1.0, 2.0});
  auto out = minibatch_features(f, t);
  REQUIRE(out.shape() == nd::Shape{3, 1});
  CHECK(out[0] == doctest::Approx(std::exp(-1.0) + std::exp(-2.0)));
  CHECK(out[0] == doctest::Approx(0.5032).epsilon(1e-4));

  auto same = minibatch_features(Tensor({2, 2}, {0.3, -1, 0.3, -1}), Tensor({2, 3, 2}, std::vector<double>(12, 0.7)));
  for (double v : same.data()) CHECK(v == doctest::Approx(1.0));

  auto pair = minibatch_features(Tensor({2, 1}, {0.0, 2.5}), t);
  CHECK(pair[0] == doctest::Approx(std::exp(-2.5)));
  CHECK(pair[1] == doctest::Approx(std::exp(-2.5)));

  CHECK_THROWS_AS(minibatch_features(Tensor({1, 1}, {0.0}), t), std::invalid_argument);
}

TEST_CASE("minibatch features are permutation equivariant") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + trial % 5;
    auto f = nd::normal_tensor({n, 4}, rng);
    auto t = nd::normal_tensor({4, 3, 2}, rng, 0.5);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> permuted;
    for (auto i : perm) permuted.insert(permuted.end(), f.data().begin() + i * 4, f.data().begin() + (i + 1) * 4);
    const auto base = minibatch_features(f, t);
    const auto moved = minibatch_features(Tensor({n, 4}, permuted), t);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t b = 0; b < 3; ++b) CHECK(moved.at(i, b) == doctest::Approx(base.at(perm[i], b)).epsilon(1e-12));
  }
}

TEST_CASE("zero-weight networks") {
  auto cfg = toy_config(0);
  cfg.minibatch.enabled = true;
  auto m = make_gan(cfg);
  stgan::st::zero_fill(all_params(m));
  std::mt19937_64 rng(1);
  auto z = nd::normal_tensor({4, 2}, rng);
  auto x = m.g(z);
  CHECK(x.shape() == nd::Shape{4, 2});
  for (double v : x.data()) CHECK(v == 0.0);
  const auto s = m.d(nd::normal_tensor({4, 2}, rng));
  CHECK(s.shape() == nd::Shape{4});
  for (double v : s.data()) CHECK(v == 0.0);
  CHECK(nd::sigmoid(s)[0] == 0.5);
}

TEST_CASE("network shapes and errors") {
  auto cfg = toy_config(0);
  cfg.cond_dim = 3;
  auto m = make_gan(cfg);
  CHECK(m.g.layers.front().weight.size(0) == cfg.noise_dim + 3);
  std::mt19937_64 rng(2);
  auto z = nd::normal_tensor({5, 2}, rng), c = nd::normal_tensor({5, 3}, rng);
  CHECK(m.g(z, c).shape() == nd::Shape{5, 2});
  CHECK(m.d(m.g(z, c), c).shape() == nd::Shape{5});
  CHECK_THROWS_AS(m.g(z), std::invalid_argument);
  CHECK_THROWS_AS(m.g(nd::normal_tensor({5, 3}, rng), c), std::invalid_argument);
  CHECK_THROWS_AS(m.d(nd::normal_tensor({5, 4}, rng), c), std::invalid_argument);

  auto mb = toy_config(0);
  mb.minibatch.enabled = true;
  auto mm = make_gan(mb);
  CHECK_THROWS_AS(mm.d(nd::normal_tensor({1, 2}, rng)), std::invalid_argument);
  mb.minibatch.a_in = 5;
  CHECK_THROWS_AS(make_gan(mb), std::invalid_argument);
}

TEST_CASE("conditional generator") {
  auto cfg = toy_config(4);
  cfg.cond_dim = 2;
  auto m = make_gan(cfg);
  std::mt19937_64 rng(5);
  auto z = nd::normal_tensor({3, 2}, rng);
  auto c1 = Tensor({3, 2}, {1, 0, 1, 0, 1, 0});
  auto c2 = Tensor({3, 2}, {0, 1, 0, 1, 0, 1});
  const auto a = m.g(z, c1), b = m.g(z, c1), d = m.g(z, c2);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), d.data().begin()));
}

TEST_CASE("convolutional discriminator") {
  auto cfg = toy_config(0);
  cfg.data_dim = 12;
  cfg.d_conv_channels = {3, 2};
  cfg.d_conv_kernel = 4;
  auto m = make_gan(cfg);
  CHECK(m.d.convs.size() == 2);
  CHECK(m.d.hidden.front().weight.size(0) == (12 - 3 - 3) * 2);
  std::mt19937_64 rng(1);
  CHECK(m.d(nd::normal_tensor({3, 12}, rng)).shape() == nd::Shape{3});

  cfg.d_conv_kernel = 7;
  CHECK_THROWS_AS(make_gan(cfg), std::invalid_argument);
}

TEST_CASE("discriminator is per-sample without minibatch features") {
  auto m = make_gan(toy_config(2));
  std::mt19937_64 rng(9);
  auto x = nd::normal_tensor({5, 2}, rng);
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<double> px;
  for (auto i : perm) px.insert(px.end(), x.data().begin() + i * 2, x.data().begin() + i * 2 + 2);
  const auto s = m.d(x), ps = m.d(Tensor({5, 2}, px));
  for (std::size_t i = 0; i < 5; ++i) CHECK(ps[i] == doctest::Approx(s[perm[i]]).epsilon(1e-12));
}

TEST_CASE("GAN loss gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (auto& c : testing::gan_cases(seed)) {
      auto report = nd::finite_difference_check(c.params, c.loss);
      INFO(c.name << " seed " << seed);
      CHECK(report.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("training schedule") {
  for (auto f : {FMeasure::Vanilla, FMeasure::LSGAN, FMeasure::WGAN, FMeasure::WGAN_GP}) {
    auto cfg = toy_config(1);
    cfg.fmeasure = f;
    cfg.minibatch.enabled = f == FMeasure::Vanilla;
    auto m = make_gan(cfg);
    auto result = gan_train(m, toy_data(64, 1));
    CHECK(m.d_steps == 5);
    CHECK(m.g_steps == 10);
    REQUIRE(result.history.size() == 5);
    CHECK(result.history.back().round == 5);
    CHECK(std::isnan(result.history.back().grad_norm) == (f != FMeasure::WGAN_GP));
    for (const auto& row : result.history) {
      CHECK(std::isfinite(row.d_loss));
      CHECK(std::isfinite(row.g_loss));
    }
  }
}

TEST_CASE("zero rounds leave parameters unchanged") {
  auto cfg = toy_config(3);
  cfg.rounds = 0;
  auto m = make_gan(cfg);
  const auto before = values(all_params(m));
  auto result = gan_train(m, toy_data(4, 1));
  CHECK(result.history.empty());
  CHECK(values(all_params(m)) == before);
  CHECK(m.d_steps == 0);
}

TEST_CASE("weight clipping for plain wgan") {
  auto cfg = toy_config(5);
  cfg.fmeasure = FMeasure::WGAN;
  cfg.lr = 0.05;
  auto m = make_gan(cfg);
  gan_train(m, toy_data(64, 2));
  for (const auto& p : values_of(m.d.named_params()))
    for (double v : p.data()) CHECK(std::abs(v) <= cfg.clip_value);
}

TEST_CASE("training input checks and determinism") {
  auto cfg = toy_config(6);
  auto m = make_gan(cfg);
  CHECK_THROWS_AS(gan_train(m, toy_data(15, 1)), std::invalid_argument);

  auto a = make_gan(cfg), b = make_gan(cfg);
  const auto data = toy_data(64, 4);
  gan_train(a, data);
  gan_train(b, data);
  CHECK(generate(a, 8, 3) == generate(b, 8, 3));
  CHECK(generate(a, 0, 3).empty());

  cfg.snapshot_every = 2;
  cfg.snapshot_size = 4;
  auto s = make_gan(cfg);
  auto result = gan_train(s, data);
  REQUIRE(result.snapshots.size() == 2);
  CHECK(result.snapshots[1].round == 4);
  CHECK(result.snapshots[1].samples.size() == 4);
}

TEST_CASE("mode coverage") {
  const auto centers = ring_centers(8, 2.0);
  CHECK(mode_coverage(centers, centers, 0.1) == 8);
  CHECK(mode_coverage(Rows(10, centers[2]), centers, 0.1) == 1);
  const Rows near{{centers[0][0] + 0.3, centers[0][1]},
                  {centers[3][0], centers[3][1] - 0.4},
                  {centers[6][0] + 0.2, centers[6][1] + 0.2},
                  {0.0, 0.0}};
  CHECK(mode_coverage(near, centers, 0.5) == 3);
  CHECK(mode_coverage({}, centers, 0.5) == 0);
  CHECK_THROWS_AS(mode_coverage(near, centers, 0.0), std::invalid_argument);
}

TEST_CASE("distinct ratio") {
  CHECK(distinct_ratio({}) == 0.0);
  CHECK(distinct_ratio({"a b", "a b", "c", "d"}) == doctest::Approx(0.75));
}

TEST_CASE("sample_and_decode") {
  std::mt19937_64 rng(8);
  auto cfg = toy_config(8);
  cfg.data_dim = 4;
  auto m = make_gan(cfg);
  auto decoder = st::make_decoder(st::word_embedding_param(9, 3, rng), 5, 4, rng);
  DecodeOptions greedy;
  greedy.max_len = 6;
  CHECK(sample_and_decode(m, 0, decoder, greedy, 1).empty());
  const auto a = sample_and_decode(m, 5, decoder, greedy, 1);
  const auto b = sample_and_decode(m, 5, decoder, greedy, 1);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a[i].sentence.ids == b[i].sentence.ids);

  DecodeOptions sampled = greedy;
  sampled.mode = DecodeMode::Sample;
  const auto c = sample_and_decode(m, 5, decoder, sampled, 2);
  const auto d = sample_and_decode(m, 5, decoder, sampled, 2);
  for (std::size_t i = 0; i < 5; ++i) CHECK(c[i].sentence.ids == d[i].sentence.ids);
}
