// stgan: corpus preparation, skip-thought training, GAN training, sampling and evaluation.

#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "stgan/corpus.hpp"
#include "stgan/log.hpp"
#include "stgan/metrics.hpp"
#include "stgan/pipeline.hpp"
#include "stgan/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using stgan::pipeline::ExperimentConfig;
using stgan::pipeline::ValidationError;

namespace {

struct Flags {
  std::string config, preset, corpus, word_vectors, out, fmeasure, embedding, metrics, decode;
  std::optional<std::uint64_t> seed;
  std::optional<bool> minibatch;
  std::optional<std::size_t> epochs, rounds, batch_size, samples, beam_width;
  std::optional<double> temperature;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file; flags override its values");
  cmd->add_option("--seed", f.seed, "seed for every random choice");
  cmd->add_option("--preset", f.preset, "desk or paper-scale")->check(CLI::IsMember({"desk", "paper-scale"}));
  cmd->add_option("--out", f.out, "output directory");
}

void add_model_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--corpus", f.corpus, "corpus file, one sentence per line");
  cmd->add_option("--word-vectors", f.word_vectors, "text word-vector table (token then floats)");
  cmd->add_option("--fmeasure", f.fmeasure, "vanilla, lsgan, wgan or wgan-gp")
      ->check(CLI::IsMember({"vanilla", "lsgan", "wgan", "wgan-gp"}));
  cmd->add_option("--embedding", f.embedding, "st, glove-avg or glove-ext")
      ->check(CLI::IsMember({"st", "glove-avg", "glove-ext"}));
  cmd->add_option("--minibatch-disc", f.minibatch, "minibatch discrimination (true/false)");
  cmd->add_option("--epochs", f.epochs, "skip-thought epochs");
  cmd->add_option("--rounds", f.rounds, "GAN rounds");
  cmd->add_option("--batch-size", f.batch_size, "batch size (default 16)")->check(CLI::PositiveNumber);
  cmd->add_option("--metrics", f.metrics, "comma-separated metric list");
  cmd->add_option("--samples", f.samples, "sentences to generate");
  cmd->add_option("--decode", f.decode, "greedy or sample")->check(CLI::IsMember({"greedy", "sample"}));
  cmd->add_option("--beam-width", f.beam_width, "top-k width for sampled decoding")->check(CLI::PositiveNumber);
  cmd->add_option("--temperature", f.temperature, "sampling temperature");
}

template <typename T>
T json_get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

json read_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read config " + path);
  try {
    json j = json::parse(is);
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    static const std::set<std::string> known{"preset", "seed", "corpus", "word_vectors", "out", "fmeasure",
                                             "embedding", "minibatch_disc", "epochs", "rounds", "batch_size",
                                             "metrics", "samples", "decode", "beam_width", "temperature"};
    for (const auto& [k, v] : j.items())
      if (!known.contains(k)) throw ValidationError("unknown config key '" + k + "'");
    return j;
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
}

// Fills unset flags from the config file so flags take precedence.
void merge_config(Flags& f) {
  if (f.config.empty()) return;
  const json j = read_config(f.config);
  auto str = [&](std::string& dst, const char* key) {
    if (dst.empty() && j.contains(key)) dst = json_get<std::string>(j, key);
  };
  auto opt = [&]<typename T>(std::optional<T>& dst, const char* key) {
    if (!dst && j.contains(key)) dst = json_get<T>(j, key);
  };
  str(f.preset, "preset");
  str(f.corpus, "corpus");
  str(f.word_vectors, "word_vectors");
  str(f.out, "out");
  str(f.fmeasure, "fmeasure");
  str(f.embedding, "embedding");
  str(f.decode, "decode");
  if (f.metrics.empty() && j.contains("metrics")) {
    if (j["metrics"].is_array()) {
      for (const auto& m : j["metrics"]) f.metrics += (f.metrics.empty() ? "" : ",") + m.get<std::string>();
    } else {
      f.metrics = json_get<std::string>(j, "metrics");
    }
  }
  opt(f.seed, "seed");
  opt(f.minibatch, "minibatch_disc");
  opt(f.epochs, "epochs");
  opt(f.rounds, "rounds");
  opt(f.batch_size, "batch_size");
  opt(f.samples, "samples");
  opt(f.beam_width, "beam_width");
  opt(f.temperature, "temperature");
}

ExperimentConfig build_config(Flags f) {
  merge_config(f);
  ExperimentConfig cfg = stgan::pipeline::preset_config(f.preset.empty() ? "desk" : f.preset);
  cfg.apply_seed(f.seed.value_or(0));
  cfg.corpus = f.corpus;
  cfg.word_vectors = f.word_vectors;
  cfg.out = f.out;
  try {
    if (!f.fmeasure.empty()) cfg.gan.fmeasure = stgan::gan::parse_fmeasure(f.fmeasure);
    if (!f.embedding.empty()) cfg.embedding = stgan::embed::parse_kind(f.embedding);
    if (!f.metrics.empty()) cfg.metrics = stgan::metrics::parse_metric_list(f.metrics);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  if (f.minibatch) cfg.gan.minibatch.enabled = *f.minibatch;
  if (f.epochs) cfg.st.epochs = cfg.decoder_epochs = *f.epochs;
  if (f.rounds) cfg.gan.rounds = *f.rounds;
  if (f.batch_size) {
    if (*f.batch_size == 0) throw ValidationError("batch size must be positive");
    cfg.st.batch_size = cfg.gan.batch_size = *f.batch_size;
  }
  if (f.samples) cfg.samples = *f.samples;
  if (f.decode == "sample") cfg.decode.mode = stgan::gan::DecodeMode::Sample;
  if (f.beam_width) cfg.decode.beam_width = *f.beam_width;
  if (f.temperature) {
    if (*f.temperature < 0) throw ValidationError("temperature must be >= 0");
    cfg.decode.temperature = *f.temperature;
  }
  cfg.decode.max_len = cfg.st.max_decode_len;
  return cfg;
}

void print_report(const stgan::metrics::MetricReport& report) { stgan::metrics::write_report_csv(report, std::cout); }

}  // namespace

int main(int argc, char** argv) {
  stgan::log::init_from_env();
  CLI::App app{"Skip-thought GAN text generation laboratory"};
  app.require_subcommand(1);
  Flags f;

  auto* prepare = app.add_subcommand("prepare", "tokenize and split a corpus, build the vocabulary");
  auto* train_st = app.add_subcommand("train-st", "train the skip-thought encoder/decoders");
  auto* encode = app.add_subcommand("encode", "embed the training sentences");
  auto* train_gan = app.add_subcommand("train-gan", "train a GAN on the sentence embeddings");
  auto* sample = app.add_subcommand("sample", "generate and decode sentences");
  auto* evaluate = app.add_subcommand("evaluate", "score samples, or a hypothesis file against references");
  auto* report = app.add_subcommand("report", "write SVG charts for the report and loss curves");
  auto* run = app.add_subcommand("run", "run every stage, resuming from existing outputs");
  auto* synth = app.add_subcommand("synth", "write the seeded synthetic corpus");
  for (auto* cmd : {prepare, train_st, encode, train_gan, sample, evaluate, report, run}) {
    add_common(cmd, f);
    add_model_flags(cmd, f);
  }

  std::string hyp, ref, report_path;
  evaluate->add_option("--hyp", hyp, "hypothesis sentences, one per line");
  evaluate->add_option("--ref", ref, "reference sentences, line-aligned with --hyp");
  evaluate->add_option("--report", report_path, "write the report CSV here instead of stdout");

  std::size_t synth_count = 200;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--sentences", synth_count, "number of sentences")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "grammar seed");
  synth->add_option("--out", synth_out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return 0;
    }
    std::cerr << "error: " << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 1;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    if (cmd == synth) {
      const auto lines = stgan::corpus::synthetic_corpus(synth_count, synth_seed);
      if (fs::path(synth_out).has_parent_path()) fs::create_directories(fs::path(synth_out).parent_path());
      std::ofstream os(synth_out);
      if (!os) throw std::runtime_error("cannot write " + synth_out);
      for (const auto& l : lines) os << l << '\n';
      return 0;
    }
    const ExperimentConfig cfg = build_config(f);
    if (cmd == prepare) {
      if (cfg.corpus.empty()) throw ValidationError("prepare needs --corpus");
      stgan::pipeline::prepare(cfg);
    } else if (cmd == train_st) {
      stgan::pipeline::train_st(cfg);
    } else if (cmd == encode) {
      stgan::pipeline::encode(cfg);
    } else if (cmd == train_gan) {
      stgan::pipeline::train_gan(cfg);
    } else if (cmd == sample) {
      stgan::pipeline::sample(cfg);
    } else if (cmd == evaluate) {
      if (hyp.empty() != ref.empty()) throw ValidationError("--hyp and --ref go together");
      if (!hyp.empty()) {
        const auto pairs = stgan::pipeline::aligned_pairs(hyp, ref);
        const auto rep = stgan::pipeline::score(pairs, cfg.metrics, "hypothesis", "-");
        if (report_path.empty()) {
          print_report(rep);
        } else {
          std::ofstream os(report_path);
          if (!os) throw std::runtime_error("cannot write " + report_path);
          stgan::metrics::write_report_csv(rep, os);
        }
      } else {
        print_report(stgan::pipeline::evaluate(cfg));
      }
    } else if (cmd == report) {
      stgan::pipeline::report(cfg);
    } else if (cmd == run) {
      if (cfg.corpus.empty()) throw ValidationError("run needs --corpus");
      print_report(stgan::pipeline::run_pipeline(cfg));
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << cmd->help();
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
