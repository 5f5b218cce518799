#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "stgan/gan.hpp"
#include "stgan/metrics.hpp"
#include "stgan/sent_embed.hpp"
#include "stgan/skipthought.hpp"

namespace stgan::pipeline {

namespace fs = std::filesystem;

/// Bad user input (paths, flags, values). The CLI maps it to exit code 1.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A pipeline stage failed at run time; carries the stage name.
struct StageError : std::runtime_error {
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage(std::move(stage)) {}
  std::string stage;
};

struct ExperimentConfig {
  fs::path corpus;
  fs::path word_vectors;  // empty: seeded random table
  fs::path out;
  std::string preset = "desk";
  std::uint64_t seed = 0;
  st::SkipThoughtConfig st;
  gan::GanConfig gan;  // data_dim is set from the embedding at train time
  embed::EmbeddingKind embedding = embed::EmbeddingKind::CombineSkip;
  std::size_t random_word_dim = 50;
  std::size_t decoder_epochs = 20;  // reconstruction decoder for the word-vector embeddings
  std::size_t samples = 64;
  gan::DecodeOptions decode;
  std::vector<std::string> metrics{"bleu1", "bleu2", "bleu3", "bleu4", "rougeL", "meteor"};

  /// Copies the seed into the model configs.
  void apply_seed(std::uint64_t s);
  /// Model label used in reports, e.g. "wgan-gp" or "vanilla+mbd".
  std::string model_name() const;
};

ExperimentConfig preset_config(const std::string& preset);

// Files under ExperimentConfig::out.
namespace files {
inline constexpr const char* kVocab = "vocab.txt";
inline constexpr const char* kTrain = "train.txt";
inline constexpr const char* kValid = "valid.txt";
inline constexpr const char* kTest = "test.txt";
inline constexpr const char* kSkipThought = "st.ckpt";
inline constexpr const char* kSkipThoughtEpoch = "st_epoch.ckpt";
inline constexpr const char* kStLoss = "st_loss.csv";
inline constexpr const char* kEmbeddings = "embeddings.ckpt";
inline constexpr const char* kDecoder = "decoder.ckpt";
inline constexpr const char* kGan = "gan.ckpt";
inline constexpr const char* kGanHistory = "gan_history.csv";
inline constexpr const char* kSamples = "samples.txt";
inline constexpr const char* kSnapshots = "snapshots";
inline constexpr const char* kReport = "report.csv";
inline constexpr const char* kReportSvg = "report.svg";
inline constexpr const char* kStLossSvg = "st_loss.svg";
inline constexpr const char* kGanHistorySvg = "gan_history.svg";
}  // namespace files

/// Tokenizes and splits the corpus, writes vocabulary and splits.
void prepare(const ExperimentConfig& cfg);
/// Trains the skip-thought model on the train split; writes the checkpoint and loss curve.
void train_st(const ExperimentConfig& cfg);
/// Embeds the train split with the configured embedding. For word-vector
/// embeddings also trains a reconstruction decoder on those vectors.
void encode(const ExperimentConfig& cfg);
void train_gan(const ExperimentConfig& cfg);
/// Decodes `cfg.samples` generated vectors and every training snapshot.
void sample(const ExperimentConfig& cfg);
/// Scores the samples against the test split (every test sentence is a reference).
metrics::MetricReport evaluate(const ExperimentConfig& cfg);
/// CSV already written by evaluate; adds the SVG charts.
void report(const ExperimentConfig& cfg);

/// Runs every stage. A stage is skipped when its outputs exist, match the
/// config, and no earlier stage ran in this invocation.
metrics::MetricReport run_pipeline(const ExperimentConfig& cfg);

/// Line-aligned pairs from two sentence files, one sentence per line.
std::vector<metrics::EvalPair> aligned_pairs(const fs::path& hyp, const fs::path& ref);
metrics::MetricReport score(std::span<const metrics::EvalPair> pairs, const std::vector<std::string>& metric_names,
                            const std::string& model, const std::string& embedding);

/// Bar chart of report values, one group per metric.
std::string report_svg(const metrics::MetricReport& report);
/// One polyline per series, sharing the x axis (1..n).
std::string line_chart_svg(const std::string& title, const std::vector<std::pair<std::string, std::vector<double>>>& series);

}  // namespace stgan::pipeline
