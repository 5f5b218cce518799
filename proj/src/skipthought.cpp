#include "stgan/skipthought.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "stgan/autograd.hpp"
#include "stgan/optim.hpp"

namespace stgan::st {

using namespace nd;

SkipThoughtConfig SkipThoughtConfig::paper_scale() {
  SkipThoughtConfig c;
  c.d_w = 620;
  c.h_enc = 2400;
  c.h_dec = 1600;
  return c;
}

std::vector<std::pair<std::string, Tensor>> GruParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out{
      {"input_reset", input_reset},         {"hidden_reset", hidden_reset},
      {"input_update", input_update},       {"hidden_update", hidden_update},
      {"input_candidate", input_candidate}, {"hidden_candidate", hidden_candidate}};
  if (conditional()) {
    out.emplace_back("cond_reset", cond_reset);
    out.emplace_back("cond_update", cond_update);
    out.emplace_back("cond_candidate", cond_candidate);
  }
  return out;
}

GruParams make_gru(std::size_t input, std::size_t hidden, std::size_t cond_dim, std::mt19937_64& rng) {
  auto u = [&](std::size_t cols) { return uniform_param({hidden, cols}, kRecurrentInitRange, rng); };
  GruParams p;
  p.input_reset = u(input);
  p.hidden_reset = u(hidden);
  p.input_update = u(input);
  p.hidden_update = u(hidden);
  p.input_candidate = u(input);
  p.hidden_candidate = u(hidden);
  if (cond_dim > 0) {
    p.cond_reset = u(cond_dim);
    p.cond_update = u(cond_dim);
    p.cond_candidate = u(cond_dim);
  }
  return p;
}

namespace {

// Transposed weights and the per-sequence conditioning terms, computed once
// per sequence instead of once per step.
struct PreparedGru {
  Tensor wr, ur, wz, uz, w, u;
  Tensor cr, cz, c;
};

PreparedGru prepare(const GruParams& p, const Tensor& condition) {
  PreparedGru q{transpose(p.input_reset),  transpose(p.hidden_reset),    transpose(p.input_update),
                transpose(p.hidden_update), transpose(p.input_candidate), transpose(p.hidden_candidate),
                {},
                {},
                {}};
  if (p.conditional() != condition.defined())
    throw std::invalid_argument(p.conditional() ? "conditional GRU called without a condition"
                                                : "unconditioned GRU called with a condition");
  if (condition.defined()) {
    q.cr = matmul(condition, transpose(p.cond_reset));
    q.cz = matmul(condition, transpose(p.cond_update));
    q.c = matmul(condition, transpose(p.cond_candidate));
  }
  return q;
}

Tensor with_cond(Tensor pre, const Tensor& cond) { return cond.defined() ? add(pre, cond) : pre; }

// A saturated sigmoid rounds to exactly 0 or 1 in double, so the debug check
// uses the closed interval.
void check_gate_range([[maybe_unused]] const Tensor& g) {
#ifndef NDEBUG
  for (double v : g.data())
    if (!(v >= 0.0 && v <= 1.0)) throw std::logic_error("GRU gate left [0,1]");
#endif
}

Tensor step(const PreparedGru& q, const Tensor& x, const Tensor& h, GruGates* gates) {
  Tensor r = sigmoid(with_cond(add(matmul(x, q.wr), matmul(h, q.ur)), q.cr));
  Tensor z = sigmoid(with_cond(add(matmul(x, q.wz), matmul(h, q.uz)), q.cz));
  Tensor hbar = tanh(with_cond(add(matmul(x, q.w), matmul(mul(r, h), q.u)), q.c));
  check_gate_range(r);
  check_gate_range(z);
  if (gates) *gates = {r, z};
  return add(mul(rsub_scalar(1.0, z), h), mul(z, hbar));
}

Tensor as_row(const Tensor& v) { return v.dim() == 1 ? reshape(v, {1, v.size(0)}) : v; }

// Time-major flattening: row t * B + b holds token t of sequence b, PAD past its end.
std::vector<TokenId> time_major(std::span<const Ids* const> seqs, std::size_t steps) {
  std::vector<TokenId> flat(steps * seqs.size(), corpus::kPad);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t b = 0; b < seqs.size(); ++b)
      if (t < seqs[b]->size()) flat[t * seqs.size() + b] = (*seqs[b])[t];
  return flat;
}

Tensor run_encoder(const GruParams& p, const Tensor& embedded, std::size_t steps, std::size_t batch,
                   bool reverse) {
  const PreparedGru q = prepare(p, {});
  Tensor h = Tensor::zeros({batch, p.hidden()});
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t at = reverse ? steps - 1 - t : t;
    h = step(q, slice(embedded, 0, at * batch, batch), h, nullptr);
  }
  return h;
}

void append_named(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                  const GruParams& p) {
  for (auto& [name, t] : p.named()) out.emplace_back(prefix + name, t);
}

std::vector<Tensor> values_of(const std::vector<std::pair<std::string, Tensor>>& named) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

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

// One optimizer step on `loss`; false if the loss or its gradient is not finite.
bool apply_step(const Tensor& loss, std::span<const Tensor> params, Adam& opt, double clip_norm) {
  if (!std::isfinite(loss.item())) return false;
  backward(loss);
  try {
    clip_global_norm(params, clip_norm);
  } catch (const std::runtime_error&) {
    return false;
  }
  opt.step();
  return true;
}

}  // namespace

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruParams& params, const Tensor& condition,
                GruGates* gates) {
  const bool vector_in = h_prev.dim() == 1;
  const Tensor xb = as_row(x), hb = as_row(h_prev);
  const Tensor cb = condition.defined() ? as_row(condition) : condition;
  if (xb.size(0) != hb.size(0))
    throw std::invalid_argument("gru_cell batch mismatch: x " + shape_str(x.shape()) + " vs h " +
                                shape_str(h_prev.shape()));
  Tensor h = step(prepare(params, cb), xb, hb, gates);
  return vector_in ? reshape(h, {params.hidden()}) : h;
}

Tensor word_embedding_param(std::size_t vocab_size, std::size_t dim, std::mt19937_64& rng) {
  return normal_tensor({vocab_size, dim}, rng, 1.0).set_requires_grad(true);
}

Decoder make_decoder(Tensor embedding, std::size_t hidden, std::size_t cond_dim, std::mt19937_64& rng) {
  Decoder d;
  d.gru = make_gru(embedding.size(1), hidden, cond_dim, rng);
  d.projection = scaled_normal_param({embedding.size(0), hidden}, hidden, rng);
  d.embedding = std::move(embedding);
  return d;
}

SkipThoughtModel make_model(const SkipThoughtConfig& config, std::size_t vocab_size) {
  if (config.h_enc % 2 != 0) throw std::invalid_argument("h_enc must be even for the bi-skip halves");
  std::mt19937_64 rng(config.seed);
  SkipThoughtModel m;
  m.config = config;
  m.embedding = word_embedding_param(vocab_size, config.d_w, rng);
  m.uni = make_gru(config.d_w, config.h_enc, 0, rng);
  m.bi_forward = make_gru(config.d_w, config.h_enc / 2, 0, rng);
  m.bi_backward = make_gru(config.d_w, config.h_enc / 2, 0, rng);
  m.next = make_decoder(m.embedding, config.h_dec, config.embedding_dim(), rng);
  m.prev = make_decoder(m.embedding, config.h_dec, config.embedding_dim(), rng);
  return m;
}

std::vector<std::pair<std::string, Tensor>> SkipThoughtModel::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out{{"embedding", embedding}};
  if (config.mode != CombineMode::Bi) append_named(out, "uni.", uni);
  if (config.mode != CombineMode::Uni) {
    append_named(out, "bi_forward.", bi_forward);
    append_named(out, "bi_backward.", bi_backward);
  }
  append_named(out, "next.", next.gru);
  out.emplace_back("next.projection", next.projection);
  append_named(out, "prev.", prev.gru);
  out.emplace_back("prev.projection", prev.projection);
  return out;
}

std::vector<Tensor> SkipThoughtModel::params() const { return values_of(named_params()); }

std::vector<std::pair<std::string, Tensor>> named_params(const Decoder& decoder) {
  std::vector<std::pair<std::string, Tensor>> out{{"embedding", decoder.embedding}};
  append_named(out, "", decoder.gru);
  out.emplace_back("projection", decoder.projection);
  return out;
}

std::vector<Tensor> params_of(const Decoder& decoder) { return values_of(named_params(decoder)); }

void zero_fill(std::span<const Tensor> params) {
  for (const auto& p : params) {
    auto d = Tensor(p).mutable_data();
    std::fill(d.begin(), d.end(), 0.0);
  }
}

Tensor encode_batch(const SkipThoughtModel& model, std::span<const Ids* const> batch, CombineMode mode) {
  if (batch.empty()) throw std::invalid_argument("encode_batch: empty batch");
  const std::size_t steps = batch.front()->size();
  if (steps == 0) throw std::invalid_argument("cannot encode an empty sentence");
  for (const Ids* s : batch)
    if (s->size() != steps) throw std::invalid_argument("encode_batch: sentences differ in length");
  const std::size_t n = batch.size();
  const Tensor embedded = embedding(model.embedding, time_major(batch, steps));
  auto bi = [&] {
    return concat({run_encoder(model.bi_forward, embedded, steps, n, false),
                   run_encoder(model.bi_backward, embedded, steps, n, true)},
                  1);
  };
  switch (mode) {
    case CombineMode::Uni: return run_encoder(model.uni, embedded, steps, n, false);
    case CombineMode::Bi: return bi();
    case CombineMode::CombineSkip:
      return concat({run_encoder(model.uni, embedded, steps, n, false), bi()}, 1);
  }
  throw std::logic_error("unreachable");
}

Tensor st_encode(const SkipThoughtModel& model, const Ids& sentence, CombineMode mode) {
  const Ids* one[] = {&sentence};
  const Tensor e = encode_batch(model, one, mode);
  return reshape(e, {e.size(1)});
}

std::vector<std::vector<double>> encode_all(const SkipThoughtModel& model,
                                            std::span<const corpus::TokenizedSentence> sentences,
                                            CombineMode mode) {
  NoGradGuard no_grad;
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < sentences.size(); ++i) by_length[sentences[i].length()].push_back(i);
  std::vector<std::vector<double>> out(sentences.size());
  constexpr std::size_t kChunk = 64;
  for (const auto& [len, idx] : by_length) {
    for (std::size_t start = 0; start < idx.size(); start += kChunk) {
      std::vector<const Ids*> batch;
      for (std::size_t k = start; k < std::min(idx.size(), start + kChunk); ++k)
        batch.push_back(&sentences[idx[k]].ids);
      const Tensor e = encode_batch(model, batch, mode);
      const std::size_t d = e.size(1);
      for (std::size_t b = 0; b < batch.size(); ++b)
        out[idx[start + b]].assign(e.data().begin() + b * d, e.data().begin() + (b + 1) * d);
    }
  }
  return out;
}

DecoderStep decoder_step(TokenId prev_word, const Tensor& h_prev, const Tensor& condition,
                         const Decoder& decoder) {
  if (prev_word >= decoder.vocab_size())
    throw std::invalid_argument("word id " + std::to_string(prev_word) + " outside vocabulary of " +
                                std::to_string(decoder.vocab_size()));
  const Tensor x = embedding(decoder.embedding, {prev_word});
  const Tensor h = gru_cell(x, as_row(h_prev), decoder.gru, as_row(condition));
  const Tensor logits = matmul(h, transpose(decoder.projection));
  return {reshape(logits, {decoder.vocab_size()}), reshape(h, {decoder.gru.hidden()})};
}

Tensor decoder_nll(const Decoder& decoder, const Tensor& condition, std::span<const Ids* const> targets) {
  const std::size_t n = targets.size();
  if (n == 0 || condition.dim() != 2 || condition.size(0) != n)
    throw std::invalid_argument("decoder_nll: condition " + shape_str(condition.shape()) +
                                " does not match " + std::to_string(n) + " targets");
  std::size_t steps = 0;
  for (const Ids* t : targets) {
    if (t->size() < 2) throw std::invalid_argument("decoder target needs <s> and </s>");
    steps = std::max(steps, t->size() - 1);
  }
  const std::size_t vocab = decoder.vocab_size();
  const PreparedGru q = prepare(decoder.gru, condition);
  const Tensor inputs = embedding(decoder.embedding, time_major(targets, steps));
  std::vector<Tensor> hidden;
  Tensor h = Tensor::zeros({n, decoder.gru.hidden()});
  for (std::size_t t = 0; t < steps; ++t) {
    h = step(q, slice(inputs, 0, t * n, n), h, nullptr);
    hidden.push_back(h);
  }
  const Tensor logp = log_softmax(matmul(concat(hidden, 0), transpose(decoder.projection)));
  std::vector<double> pick(steps * n * vocab, 0.0);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t b = 0; b < n; ++b)
      if (t + 1 < targets[b]->size()) {
        const TokenId w = (*targets[b])[t + 1];
        if (w >= vocab) throw std::invalid_argument("target id outside vocabulary");
        pick[(t * n + b) * vocab + w] = 1.0;
      }
  const Tensor picked = sum(mul(logp, Tensor({steps * n, vocab}, std::move(pick))), 1);
  return neg(sum(reshape(picked, {steps, n}), 0));
}

Tensor st_loss(const SkipThoughtModel& model, std::span<const corpus::SentenceTriple* const> batch) {
  std::vector<const Ids*> centers, nexts, prevs;
  for (const auto* tr : batch) {
    centers.push_back(&tr->current.ids);
    nexts.push_back(&tr->next.ids);
    prevs.push_back(&tr->prev.ids);
  }
  const Tensor h = encode_batch(model, centers, model.config.mode);
  return mean(add(decoder_nll(model.next, h, nexts), decoder_nll(model.prev, h, prevs)));
}

Tensor st_loss(const SkipThoughtModel& model, const corpus::SentenceTriple& triple) {
  const corpus::SentenceTriple* one[] = {&triple};
  return st_loss(model, one);
}

TrainResult train_skipthought(SkipThoughtModel& model, std::span<const corpus::SentenceTriple> triples,
                              const EpochCallback& on_epoch) {
  const auto& cfg = model.config;
  TrainResult result;
  if (cfg.epochs == 0) return result;
  if (triples.empty()) throw std::invalid_argument("train_skipthought: no triples");
  const auto params = model.params();
  Adam opt(params, {.lr = cfg.lr});
  std::vector<std::size_t> lengths;
  for (const auto& t : triples) lengths.push_back(t.current.length());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto good = snapshot(params);
    double total = 0;
    for (const auto& idx : corpus::batch_by_length(lengths, cfg.batch_size, cfg.seed * 7919 + epoch)) {
      std::vector<const corpus::SentenceTriple*> batch;
      for (auto i : idx) batch.push_back(&triples[i]);
      const Tensor loss = st_loss(model, batch);
      if (!apply_step(loss, params, opt, cfg.clip_norm)) {
        restore(params, good);
        throw std::runtime_error("skip-thought training diverged in epoch " + std::to_string(epoch + 1));
      }
      total += loss.item() * static_cast<double>(batch.size());
      ++result.steps;
    }
    const double mean_loss = total / static_cast<double>(triples.size());
    result.epoch_loss.push_back(mean_loss);
    spdlog::info("skip-thought epoch {}/{} loss {:.4f}", epoch + 1, cfg.epochs, mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  return result;
}

TrainResult train_decoder(Decoder& decoder, std::span<const std::vector<double>> conditions,
                          std::span<const Ids> targets, const DecoderTrainOptions& options) {
  TrainResult result;
  if (options.epochs == 0) return result;
  if (targets.empty() || conditions.size() != targets.size())
    throw std::invalid_argument("train_decoder: need one condition per target");
  const std::size_t dim = conditions.front().size();
  const auto params = params_of(decoder);
  Adam opt(params, {.lr = options.lr});
  std::vector<std::size_t> lengths;
  for (const auto& t : targets) lengths.push_back(t.size());

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const auto good = snapshot(params);
    double total = 0;
    for (const auto& idx : corpus::batch_by_length(lengths, options.batch_size, options.seed * 7919 + epoch)) {
      std::vector<double> cond;
      std::vector<const Ids*> batch;
      for (auto i : idx) {
        cond.insert(cond.end(), conditions[i].begin(), conditions[i].end());
        batch.push_back(&targets[i]);
      }
      const Tensor loss = mean(decoder_nll(decoder, Tensor({idx.size(), dim}, std::move(cond)), batch));
      if (!apply_step(loss, params, opt, options.clip_norm)) {
        restore(params, good);
        throw std::runtime_error("decoder training diverged in epoch " + std::to_string(epoch + 1));
      }
      total += loss.item() * static_cast<double>(idx.size());
      ++result.steps;
    }
    const double mean_loss = total / static_cast<double>(targets.size());
    result.epoch_loss.push_back(mean_loss);
    spdlog::info("decoder epoch {}/{} loss {:.4f}", epoch + 1, options.epochs, mean_loss);
  }
  return result;
}

namespace {

template <typename Choose>
DecodeResult run_decode(const std::vector<double>& condition, const Decoder& decoder, std::size_t max_len,
                        Choose&& choose) {
  if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");
  if (condition.size() != decoder.gru.cond_reset.size(1))
    throw std::invalid_argument("decoder expects a " + std::to_string(decoder.gru.cond_reset.size(1)) +
                                "-d condition, got " + std::to_string(condition.size()));
  NoGradGuard no_grad;
  const PreparedGru q = prepare(decoder.gru, Tensor({1, condition.size()}, condition));
  const Tensor proj = transpose(decoder.projection);
  Tensor h = Tensor::zeros({1, decoder.gru.hidden()});
  DecodeResult out;
  out.sentence.ids.push_back(corpus::kStart);
  TokenId prev = corpus::kStart;
  for (std::size_t t = 0; t < max_len; ++t) {
    h = step(q, embedding(decoder.embedding, {prev}), h, nullptr);
    prev = choose(matmul(h, proj).data());
    out.sentence.ids.push_back(prev);
    if (prev == corpus::kEnd) return out;
  }
  out.truncated = true;
  return out;
}

// Indices of the k largest logits, best first; ties go to the lower id.
std::vector<TokenId> top_k(std::span<const double> logits, std::size_t k) {
  std::vector<TokenId> ids(logits.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TokenId a, TokenId b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
  ids.resize(k);
  return ids;
}

}  // namespace

DecodeResult greedy_decode(const std::vector<double>& condition, const Decoder& decoder, std::size_t max_len) {
  return run_decode(condition, decoder, max_len, [](std::span<const double> logits) { return top_k(logits, 1)[0]; });
}

DecodeResult sample_decode(const std::vector<double>& condition, const Decoder& decoder,
                           std::size_t beam_width, double temperature, std::uint64_t seed,
                           std::size_t max_len) {
  if (beam_width == 0) throw std::invalid_argument("beam_width must be at least 1");
  if (temperature < 0) throw std::invalid_argument("temperature must be non-negative");
  std::mt19937_64 rng(seed);
  return run_decode(condition, decoder, max_len, [&](std::span<const double> logits) {
    const auto best = top_k(logits, beam_width);
    if (best.size() == 1 || temperature == 0.0) return best[0];
    std::vector<double> weights;
    double total = 0;
    for (TokenId id : best) {
      weights.push_back(std::exp((logits[id] - logits[best[0]]) / temperature));
      total += weights.back();
    }
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    for (std::size_t i = 0; i < best.size(); ++i) {
      if (u < weights[i]) return best[i];
      u -= weights[i];
    }
    return best.back();
  });
}

}  // namespace stgan::st
