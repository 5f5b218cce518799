#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stgan/corpus.hpp"
#include "stgan/tensor.hpp"

namespace stgan::st {

using nd::Tensor;
using corpus::TokenId;
using Ids = std::vector<TokenId>;

enum class CombineMode { Uni, Bi, CombineSkip };

struct SkipThoughtConfig {
  std::size_t d_w = 64;
  std::size_t h_enc = 64;
  std::size_t h_dec = 96;
  CombineMode mode = CombineMode::CombineSkip;
  std::size_t max_decode_len = 30;
  std::size_t beam_width = 5;
  std::size_t epochs = 20;
  std::size_t batch_size = corpus::kDefaultBatchSize;
  double lr = 1e-2;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;

  /// Output size of the sentence vector for the configured mode.
  std::size_t embedding_dim() const { return mode == CombineMode::CombineSkip ? 2 * h_enc : h_enc; }

  static SkipThoughtConfig desk() { return {}; }
  /// 620-d words, 2400 units per encoder, 1600-unit decoders. Constructible, not trained in tests.
  static SkipThoughtConfig paper_scale();
};

/// Weights of one GRU, stored as H x in and H x H. The cond_* matrices
/// (H x D) exist only for decoders and add C h_i to each pre-activation.
struct GruParams {
  Tensor input_reset, hidden_reset;
  Tensor input_update, hidden_update;
  Tensor input_candidate, hidden_candidate;
  Tensor cond_reset, cond_update, cond_candidate;

  std::size_t hidden() const { return hidden_reset.size(0); }
  std::size_t input() const { return input_reset.size(1); }
  bool conditional() const { return cond_reset.defined(); }
  std::vector<std::pair<std::string, Tensor>> named() const;
};

GruParams make_gru(std::size_t input, std::size_t hidden, std::size_t cond_dim, std::mt19937_64& rng);

struct GruGates {
  Tensor reset, update;
};

/// One step on a batch: x [B, in], h_prev [B, H], condition [B, D] or undefined.
/// r = s(W_r x + U_r h + C_r c), z = s(W_z x + U_z h + C_z c),
/// hbar = tanh(W x + U (r . h) + C c), h = (1 - z) . h + z . hbar.
/// 1-D x and h are treated as a batch of one and a 1-D result is returned.
Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruParams& params,
                const Tensor& condition = {}, GruGates* gates = nullptr);

struct Decoder {
  Tensor embedding;   // V x d_w, shared with the encoders in a skip-thought model
  GruParams gru;      // conditional
  Tensor projection;  // V x H_dec, no bias

  std::size_t vocab_size() const { return projection.size(0); }
};

/// Word vectors start as N(0, 1), like a standard embedding table.
Tensor word_embedding_param(std::size_t vocab_size, std::size_t dim, std::mt19937_64& rng);
Decoder make_decoder(Tensor embedding, std::size_t hidden, std::size_t cond_dim, std::mt19937_64& rng);

struct SkipThoughtModel {
  SkipThoughtConfig config;
  Tensor embedding;  // V x d_w
  GruParams uni;     // H_enc units over the sentence
  GruParams bi_forward, bi_backward;  // H_enc / 2 units each, the second on the reversed sentence
  Decoder next, prev;

  std::size_t vocab_size() const { return embedding.size(0); }
  std::size_t embedding_dim() const { return config.embedding_dim(); }
  /// Every learnable tensor once, with a stable name.
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> params() const;
};

SkipThoughtModel make_model(const SkipThoughtConfig& config, std::size_t vocab_size);
std::vector<std::pair<std::string, Tensor>> named_params(const Decoder& decoder);
std::vector<Tensor> params_of(const Decoder& decoder);

/// Sets every value of the tensors to zero (test fixtures).
void zero_fill(std::span<const Tensor> params);

/// Encodes a batch of equal-length id sequences (<s> ... </s> included) to [B, D].
Tensor encode_batch(const SkipThoughtModel& model, std::span<const Ids* const> batch, CombineMode mode);
Tensor st_encode(const SkipThoughtModel& model, const Ids& sentence, CombineMode mode);
std::vector<std::vector<double>> encode_all(const SkipThoughtModel& model,
                                            std::span<const corpus::TokenizedSentence> sentences,
                                            CombineMode mode);

struct DecoderStep {
  Tensor logits;  // [V]
  Tensor hidden;  // [H_dec]
};

DecoderStep decoder_step(TokenId prev_word, const Tensor& h_prev, const Tensor& condition,
                         const Decoder& decoder);

/// Teacher-forced negative log-likelihood of each target given its row of
/// `condition` [B, D]. Targets may differ in length; returns [B].
Tensor decoder_nll(const Decoder& decoder, const Tensor& condition, std::span<const Ids* const> targets);

/// Mean over the batch of NLL(next | center) + NLL(prev | center).
Tensor st_loss(const SkipThoughtModel& model, std::span<const corpus::SentenceTriple* const> batch);
Tensor st_loss(const SkipThoughtModel& model, const corpus::SentenceTriple& triple);

struct TrainResult {
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Shuffled same-center-length batches, Adam with global-norm clipping. A
/// non-finite loss restores the parameters from the start of the epoch and throws.
TrainResult train_skipthought(SkipThoughtModel& model, std::span<const corpus::SentenceTriple> triples,
                              const EpochCallback& on_epoch = {});

struct DecoderTrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = corpus::kDefaultBatchSize;
  double lr = 1e-2;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
};

/// Trains a conditional decoder to reproduce each target from its conditioning vector.
TrainResult train_decoder(Decoder& decoder, std::span<const std::vector<double>> conditions,
                          std::span<const Ids> targets, const DecoderTrainOptions& options);

struct DecodeResult {
  corpus::TokenizedSentence sentence;
  bool truncated = false;  // max_len tokens produced without </s>
};

DecodeResult greedy_decode(const std::vector<double>& condition, const Decoder& decoder,
                           std::size_t max_len);
/// Samples from the temperature-scaled softmax over the beam_width best tokens.
/// Temperature 0 picks the argmax.
DecodeResult sample_decode(const std::vector<double>& condition, const Decoder& decoder,
                           std::size_t beam_width, double temperature, std::uint64_t seed,
                           std::size_t max_len);

}  // namespace stgan::st
