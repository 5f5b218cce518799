#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "model_cases.hpp"
#include "stgan/autograd.hpp"
#include "stgan/optim.hpp"

using namespace stgan;
using namespace stgan::st;
using nd::Tensor;

namespace {

GruParams scalar_gru(double value, std::size_t cond_dim = 0) {
  std::mt19937_64 rng(0);
  auto p = make_gru(1, 1, cond_dim, rng);
  for (auto& [n, t] : p.named()) std::fill(Tensor(t).mutable_data().begin(), Tensor(t).mutable_data().end(), value);
  return p;
}

corpus::TokenizedSentence sentence(std::initializer_list<TokenId> body) {
  corpus::TokenizedSentence s;
  s.ids.push_back(corpus::kStart);
  s.ids.insert(s.ids.end(), body);
  s.ids.push_back(corpus::kEnd);
  return s;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("gru_cell examples") {
  auto zero = scalar_gru(0.0);
  CHECK(gru_cell(Tensor::vector({0.3}), Tensor::vector({1.0}), zero).item() == doctest::Approx(0.5));
  CHECK(gru_cell(Tensor::vector({0.3}), Tensor::vector({0.0}), zero).item() == 0.0);

  auto ones = scalar_gru(1.0);
  GruGates g;
  auto h = gru_cell(Tensor::vector({1.0}), Tensor::vector({0.0}), ones, {}, &g);
  CHECK(g.reset.item() == doctest::Approx(0.7310585786).epsilon(1e-9));
  CHECK(g.update.item() == doctest::Approx(0.7310585786).epsilon(1e-9));
  CHECK(h.item() == doctest::Approx(0.7310585786 * 0.7615941559).epsilon(1e-9));
  CHECK(h.item() == doctest::Approx(0.55677).epsilon(1e-4));

  CHECK_THROWS(gru_cell(Tensor::vector({1.0, 2.0}), Tensor::vector({0.0}), ones));
  CHECK_THROWS(gru_cell(Tensor::vector({1.0}), Tensor::vector({0.0}), ones, Tensor::vector({1.0})));
  CHECK_THROWS(gru_cell(Tensor::vector({1.0}), Tensor::vector({0.0}), scalar_gru(1.0, 1)));
}

TEST_CASE("gru gates stay in (0,1) and the state stays bounded") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = make_gru(5, 6, 4, rng);
    std::vector<Tensor> ps;
    for (auto& [n, t] : p.named()) ps.push_back(t);
    testing::randomize(ps, rng, 1.0);
    auto h = nd::normal_tensor({3, 6}, rng, 2.0);
    auto c = nd::normal_tensor({3, 4}, rng);
    for (int t = 0; t < 8; ++t) {
      GruGates g;
      auto next = gru_cell(nd::normal_tensor({3, 5}, rng, 2.0), h, p, c, &g);
      for (double v : g.reset.data()) CHECK((v > 0.0 && v < 1.0));
      for (double v : g.update.data()) CHECK((v > 0.0 && v < 1.0));
      double prev_inf = 0, next_inf = 0;
      for (double v : h.data()) prev_inf = std::max(prev_inf, std::abs(v));
      for (double v : next.data()) next_inf = std::max(next_inf, std::abs(v));
      CHECK(next_inf <= std::max(prev_inf, 1.0) + 1e-12);
      h = next;
    }
  }
}

TEST_CASE("zero conditioning reduces to the unconditioned cell") {
  std::mt19937_64 rng(8);
  auto cond = make_gru(4, 3, 5, rng);
  GruParams plain = cond;
  plain.cond_reset = plain.cond_update = plain.cond_candidate = Tensor();
  auto x = nd::normal_tensor({2, 4}, rng), h = nd::normal_tensor({2, 3}, rng);
  CHECK(values(gru_cell(x, h, cond, Tensor::zeros({2, 5}))) == values(gru_cell(x, h, plain)));
}

TEST_CASE("gru_cell and st_loss gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (auto& c : testing::model_cases(seed)) {
      auto report = nd::finite_difference_check(c.params, c.loss);
      INFO(c.name << " seed " << seed);
      CHECK(report.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("st_encode") {
  auto cfg = testing::tiny_st_config(1);
  auto model = make_model(cfg, 10);
  auto s = sentence({4, 5, 6});

  CHECK(st_encode(model, s.ids, CombineMode::CombineSkip).numel() == 2 * cfg.h_enc);
  CHECK(st_encode(model, s.ids, CombineMode::Uni).numel() == cfg.h_enc);
  CHECK(st_encode(model, s.ids, CombineMode::Bi).numel() == cfg.h_enc);

  // Combine-skip is [uni || bi].
  auto both = values(st_encode(model, s.ids, CombineMode::CombineSkip));
  auto uni = values(st_encode(model, s.ids, CombineMode::Uni));
  auto bi = values(st_encode(model, s.ids, CombineMode::Bi));
  CHECK(std::vector<double>(both.begin(), both.begin() + cfg.h_enc) == uni);
  CHECK(std::vector<double>(both.begin() + cfg.h_enc, both.end()) == bi);

  CHECK(values(st_encode(model, sentence({4}).ids, CombineMode::CombineSkip)) !=
        values(st_encode(model, sentence({4, 4}).ids, CombineMode::CombineSkip)));

  Ids empty;
  CHECK_THROWS(st_encode(model, empty, CombineMode::Uni));

  auto zero = make_model(cfg, 10);
  zero_fill(zero.params());
  const auto encoded = st_encode(zero, s.ids, CombineMode::CombineSkip);
  for (double v : encoded.data()) CHECK(v == 0.0);
}

TEST_CASE("encode_all matches one-at-a-time encoding") {
  auto model = make_model(testing::tiny_st_config(2), 12);
  std::mt19937_64 rng(5);
  std::vector<corpus::TokenizedSentence> ss;
  for (int i = 0; i < 9; ++i) ss.push_back(testing::random_sentence(1 + i % 3, 12, rng));
  auto all = encode_all(model, ss, CombineMode::CombineSkip);
  for (std::size_t i = 0; i < ss.size(); ++i) {
    auto one = values(st_encode(model, ss[i].ids, CombineMode::CombineSkip));
    for (std::size_t k = 0; k < one.size(); ++k) CHECK(all[i][k] == doctest::Approx(one[k]).epsilon(1e-14));
  }
}

TEST_CASE("decoder_step") {
  auto cfg = testing::tiny_st_config(3);
  auto model = make_model(cfg, 11);
  const std::size_t d = cfg.embedding_dim();
  auto zero = make_model(cfg, 11);
  zero_fill(zero.params());
  auto out = decoder_step(corpus::kStart, Tensor::zeros({cfg.h_dec}), Tensor::full({d}, 0.7), zero.next);
  auto p = nd::softmax(out.logits);
  for (double v : p.data()) CHECK(v == doctest::Approx(1.0 / 11));

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto o = decoder_step(5, nd::normal_tensor({cfg.h_dec}, rng), nd::normal_tensor({d}, rng), model.next);
    double total = 0;
    const auto p = nd::softmax(o.logits);
    for (double v : p.data()) total += v;
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(o.hidden.numel() == cfg.h_dec);
  }
  CHECK_THROWS(decoder_step(11, Tensor::zeros({cfg.h_dec}), Tensor::zeros({d}), model.next));
}

TEST_CASE("st_loss of a zero model is uniform") {
  constexpr std::size_t vocab = 13;
  auto model = make_model(testing::tiny_st_config(4), vocab);
  zero_fill(model.params());
  corpus::SentenceTriple t{sentence({4, 5}), sentence({6, 7, 8}), sentence({9, 10, 11, 12})};
  // Predictions after <s>: 3 for prev (2 words + </s>), 5 for next.
  CHECK(st_loss(model, t).item() == doctest::Approx((3 + 5) * std::log(double(vocab))).epsilon(1e-12));
}

TEST_CASE("teacher-forced loss is non-negative") {
  std::mt19937_64 rng(12);
  auto model = make_model(testing::tiny_st_config(5), 10);
  for (int i = 0; i < 10; ++i) {
    corpus::SentenceTriple t{testing::random_sentence(2, 10, rng), testing::random_sentence(3, 10, rng),
                             testing::random_sentence(1, 10, rng)};
    CHECK(st_loss(model, t).item() >= 0.0);
  }
}

TEST_CASE("training on one triple overfits and greedy decode reproduces the next sentence") {
  constexpr std::size_t vocab = 20;
  auto cfg = testing::tiny_st_config(6);
  cfg.d_w = 16;
  cfg.h_enc = 16;
  cfg.h_dec = 24;
  cfg.lr = 0.02;
  auto model = make_model(cfg, vocab);
  std::vector<corpus::SentenceTriple> one{{sentence({4, 5, 6}), sentence({7, 8}), sentence({9, 10, 11, 12})}};

  cfg.epochs = 20;
  model.config.epochs = 20;
  auto first = train_skipthought(model, one);
  REQUIRE(first.epoch_loss.size() == 20);
  // Downward trend: never more than 3 steps without a new minimum.
  double best = first.epoch_loss[0];
  std::size_t since = 0;
  for (double l : first.epoch_loss) {
    if (l < best) best = l, since = 0;
    else CHECK(++since <= 3);
  }
  CHECK(first.epoch_loss.back() < first.epoch_loss.front());

  model.config.epochs = 30;
  train_skipthought(model, one);
  CHECK(st_loss(model, one[0]).item() < 0.1 * std::log(double(vocab)));

  auto center = values(st_encode(model, one[0].current.ids, cfg.mode));
  auto decoded = greedy_decode(center, model.next, 10);
  CHECK_FALSE(decoded.truncated);
  CHECK(decoded.sentence.ids == one[0].next.ids);
}

TEST_CASE("zero epochs leaves parameters unchanged") {
  auto model = make_model(testing::tiny_st_config(7), 10);
  model.config.epochs = 0;
  std::vector<std::vector<double>> before;
  for (auto& p : model.params()) before.push_back(values(p));
  std::vector<corpus::SentenceTriple> one{{sentence({4}), sentence({5}), sentence({6})}};
  auto r = train_skipthought(model, one);
  CHECK(r.epoch_loss.empty());
  auto ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(values(ps[i]) == before[i]);
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 rng(2);
  std::vector<corpus::SentenceTriple> triples;
  for (int i = 0; i < 12; ++i)
    triples.push_back({testing::random_sentence(2, 15, rng), testing::random_sentence(1 + i % 3, 15, rng),
                       testing::random_sentence(3, 15, rng)});
  auto cfg = testing::tiny_st_config(9);
  cfg.epochs = 3;
  cfg.batch_size = 4;
  auto a = make_model(cfg, 15), b = make_model(cfg, 15);
  auto ra = train_skipthought(a, triples), rb = train_skipthought(b, triples);
  CHECK(ra.epoch_loss == rb.epoch_loss);
  CHECK(ra.steps == rb.steps);
  auto pa = a.params(), pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(values(pa[i]) == values(pb[i]));
}

TEST_CASE("greedy_decode stopping rules") {
  auto cfg = testing::tiny_st_config(10);
  auto model = make_model(cfg, 8);
  zero_fill(model.params());
  // A positive conditioning candidate makes h positive, so the projection row decides.
  auto cand = Tensor(model.next.gru.cond_candidate).mutable_data();
  std::fill(cand.begin(), cand.end(), 1.0);
  std::vector<double> cond(cfg.embedding_dim(), 1.0);
  auto proj = Tensor(model.next.projection).mutable_data();

  for (std::size_t j = 0; j < cfg.h_dec; ++j) proj[corpus::kEnd * cfg.h_dec + j] = 1.0;
  auto stop = greedy_decode(cond, model.next, 5);
  CHECK(stop.sentence.ids == Ids{corpus::kStart, corpus::kEnd});
  CHECK_FALSE(stop.truncated);

  std::fill(proj.begin(), proj.end(), 0.0);
  for (std::size_t j = 0; j < cfg.h_dec; ++j) proj[5 * cfg.h_dec + j] = 1.0;
  auto capped = greedy_decode(cond, model.next, 1);
  CHECK(capped.sentence.ids == Ids{corpus::kStart, 5});
  CHECK(capped.truncated);
  CHECK_THROWS(greedy_decode(cond, model.next, 0));
  CHECK_THROWS(greedy_decode(std::vector<double>(3, 0.0), model.next, 4));
}

TEST_CASE("sample_decode") {
  auto cfg = testing::tiny_st_config(11);
  constexpr std::size_t vocab = 12;
  auto model = make_model(cfg, vocab);
  std::mt19937_64 rng(1);
  testing::randomize(model.params(), rng, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> cond(cfg.embedding_dim());
    for (auto& v : cond) v = std::normal_distribution<double>()(rng);
    auto greedy = greedy_decode(cond, model.next, 8);
    CHECK(sample_decode(cond, model.next, 1, 1.0, trial, 8).sentence == greedy.sentence);
    CHECK(sample_decode(cond, model.next, vocab, 0.0, trial, 8).sentence == greedy.sentence);
    CHECK(sample_decode(cond, model.next, vocab, 1e-9, trial, 8).sentence == greedy.sentence);
    auto a = sample_decode(cond, model.next, 4, 1.0, 77, 8);
    auto b = sample_decode(cond, model.next, 4, 1.0, 77, 8);
    CHECK(a.sentence == b.sentence);
  }
  CHECK_THROWS(sample_decode(std::vector<double>(cfg.embedding_dim()), model.next, 0, 1.0, 0, 4));
}

TEST_CASE("conditional decoder learns to reproduce sentences from their vectors") {
  constexpr std::size_t vocab = 16;
  std::mt19937_64 rng(4);
  auto emb = nd::uniform_param({vocab, 8}, 0.08, rng);
  auto dec = make_decoder(emb, 24, 6, rng);
  std::vector<Ids> targets;
  std::vector<std::vector<double>> conds;
  for (int i = 0; i < 6; ++i) {
    targets.push_back(testing::random_sentence(3, vocab, rng).ids);
    std::vector<double> c(6);
    for (auto& v : c) v = std::normal_distribution<double>()(rng);
    conds.push_back(c);
  }
  DecoderTrainOptions opts;
  opts.epochs = 150;
  opts.lr = 0.02;
  opts.batch_size = 6;
  auto r = train_decoder(dec, conds, targets, opts);
  CHECK(r.epoch_loss.back() < 0.1 * r.epoch_loss.front());
  std::size_t exact = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) exact += greedy_decode(conds[i], dec, 10).sentence.ids == targets[i];
  CHECK(exact == targets.size());
}

TEST_CASE("paper-scale preset is constructible") {
  auto c = SkipThoughtConfig::paper_scale();
  CHECK(c.d_w == 620);
  CHECK(c.h_enc == 2400);
  CHECK(c.embedding_dim() == 4800);
}
