#include "stgan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "stgan/checkpoint.hpp"
#include "stgan/corpus.hpp"

namespace stgan::pipeline {

namespace {

using corpus::TokenDocument;

fs::path at(const ExperimentConfig& cfg, const char* name) { return cfg.out / name; }

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ValidationError(what + " not found: " + p.string());
}

void require_out(const ExperimentConfig& cfg) {
  if (cfg.out.empty()) throw ValidationError("an output directory (--out) is required");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

std::string fmt_value(double v) { return std::isnan(v) ? "nan" : fmt::format("{:.6f}", v); }

// Runs `body` and rethrows runtime failures tagged with the stage name.
template <typename F>
auto stage(const char* name, F&& body) {
  spdlog::info("stage {}", name);
  try {
    return body();
  } catch (const ValidationError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct Splits {
  corpus::Vocabulary vocab;
  std::vector<corpus::Document> train, valid, test;
};

Splits load_splits(const ExperimentConfig& cfg) {
  for (auto f : {files::kVocab, files::kTrain, files::kValid, files::kTest})
    require_file(at(cfg, f), "prepared corpus file (run prepare first)");
  Splits s{corpus::Vocabulary::load(at(cfg, files::kVocab)), {}, {}, {}};
  s.train = corpus::encode_documents(corpus::read_token_documents(at(cfg, files::kTrain)), s.vocab);
  s.valid = corpus::encode_documents(corpus::read_token_documents(at(cfg, files::kValid)), s.vocab);
  s.test = corpus::encode_documents(corpus::read_token_documents(at(cfg, files::kTest)), s.vocab);
  return s;
}

std::vector<corpus::TokenizedSentence> flatten(const std::vector<corpus::Document>& docs) {
  std::vector<corpus::TokenizedSentence> out;
  for (const auto& d : docs) out.insert(out.end(), d.begin(), d.end());
  return out;
}

double mean_loss(const st::SkipThoughtModel& model, std::span<const corpus::SentenceTriple> triples) {
  if (triples.empty()) return std::nan("");
  nd::NoGradGuard no_grad;
  double total = 0;
  for (const auto& t : triples) total += st::st_loss(model, t).item();
  return total / static_cast<double>(triples.size());
}

// Skip-thought vectors are GRU states, bounded in (-1, 1); the generator's
// output range follows.
gan::GanConfig gan_config_for(const ExperimentConfig& cfg, std::size_t data_dim) {
  gan::GanConfig g = cfg.gan;
  g.data_dim = data_dim;
  if (cfg.embedding == embed::EmbeddingKind::CombineSkip) g.g_output = gan::OutputActivation::Tanh;
  return g;
}

embed::WordVectorTable word_table(const ExperimentConfig& cfg, const corpus::Vocabulary& vocab) {
  if (!cfg.word_vectors.empty()) return embed::load_word_vectors(cfg.word_vectors);
  std::vector<std::string> tokens;
  for (std::size_t i = corpus::kReservedCount; i < vocab.size(); ++i) tokens.push_back(vocab.token(i));
  return embed::random_word_vectors(tokens, cfg.random_word_dim, cfg.seed);
}

st::Decoder load_sampling_decoder(const ExperimentConfig& cfg) {
  if (cfg.embedding == embed::EmbeddingKind::CombineSkip) return ckpt::load_model(at(cfg, files::kSkipThought)).next;
  return ckpt::load_decoder(at(cfg, files::kDecoder));
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw ValidationError("cannot read " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

void write_sentences(const fs::path& p, const std::vector<st::DecodeResult>& decoded, const corpus::Vocabulary& vocab) {
  auto os = open_out(p);
  for (const auto& d : decoded) os << corpus::join_tokens(corpus::decode_ids(d.sentence.ids, vocab)) << '\n';
}

bool config_matches(const fs::path& p, const std::string& kind, const ckpt::KeyValues& expected) {
  if (!fs::exists(p)) return false;
  try {
    auto stored = ckpt::load(p, kind).config;
    for (const auto& [k, v] : expected)
      if (stored[k] != v) return false;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void validate_metrics(const std::vector<std::string>& names) {
  if (names.empty()) throw ValidationError("no metrics requested");
  for (const auto& m : names) {
    try {
      metrics::parse_metric_list(m);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  }
}

ckpt::KeyValues st_stamp(const ExperimentConfig& cfg) { return ckpt::to_kv(cfg.st); }

ckpt::KeyValues embedding_stamp(const ExperimentConfig& cfg) {
  return {{"embedding", std::string(embed::kind_name(cfg.embedding))},
          {"word_vectors", cfg.word_vectors.string()},
          {"random_word_dim", std::to_string(cfg.random_word_dim)},
          {"decoder_epochs", std::to_string(cfg.decoder_epochs)},
          {"seed", std::to_string(cfg.seed)}};
}

ckpt::KeyValues gan_stamp(const ExperimentConfig& cfg, std::size_t data_dim) {
  // An embedding change reruns encode, which already forces the GAN to retrain.
  return ckpt::to_kv(gan_config_for(cfg, data_dim));
}

}  // namespace

void ExperimentConfig::apply_seed(std::uint64_t s) {
  seed = s;
  st.seed = s;
  gan.seed = s;
}

std::string ExperimentConfig::model_name() const {
  return std::string(gan::fmeasure_name(gan.fmeasure)) + (gan.minibatch.enabled ? "+mbd" : "");
}

ExperimentConfig preset_config(const std::string& preset) {
  ExperimentConfig cfg;
  cfg.preset = preset;
  if (preset == "desk") {
    cfg.st = st::SkipThoughtConfig::desk();
    cfg.gan.rounds = 1000;
  } else if (preset == "paper-scale") {
    cfg.st = st::SkipThoughtConfig::paper_scale();
    cfg.gan.noise_dim = 100;
    cfg.gan.g_hidden = {1024, 1024};
    cfg.gan.d_hidden = {1024, 512};
    cfg.gan.rounds = 20000;
  } else {
    throw ValidationError("unknown preset '" + preset + "' (expected desk or paper-scale)");
  }
  cfg.gan.minibatch.a_in = cfg.gan.d_hidden.back();
  return cfg;
}

void prepare(const ExperimentConfig& cfg) {
  require_out(cfg);
  require_file(cfg.corpus, "corpus");
  auto docs = corpus::read_documents(cfg.corpus);
  stage("prepare", [&] {
    corpus::SplitOptions opts;
    opts.seed = cfg.seed;
    auto splits = corpus::split_corpus(docs, opts);
    if (splits.train.empty()) throw std::runtime_error("corpus has no usable training sentences");
    auto sentences = corpus::all_sentences(splits.train);
    auto vocab = corpus::Vocabulary::build(sentences);
    fs::create_directories(cfg.out);
    vocab.save(at(cfg, files::kVocab));
    corpus::write_token_documents(at(cfg, files::kTrain), splits.train);
    corpus::write_token_documents(at(cfg, files::kValid), splits.valid);
    corpus::write_token_documents(at(cfg, files::kTest), splits.test);
    spdlog::info("prepared {} train sentences, vocabulary {}, {} over-long dropped", sentences.size(), vocab.size(),
                 splits.dropped_long);
  });
}

void train_st(const ExperimentConfig& cfg) {
  require_out(cfg);
  const auto splits = load_splits(cfg);
  stage("train-st", [&] {
    const auto train = corpus::triples_of(splits.train);
    const auto valid = corpus::triples_of(splits.valid);
    if (train.empty()) throw std::runtime_error("training split has no sentence triples");
    auto model = st::make_model(cfg.st, splits.vocab.size());
    std::vector<double> valid_curve;
    auto result = st::train_skipthought(model, train, [&](std::size_t, double) {
      valid_curve.push_back(mean_loss(model, valid));
      ckpt::save_model(at(cfg, files::kSkipThoughtEpoch), model);
    });
    ckpt::save_model(at(cfg, files::kSkipThought), model);
    fs::remove(at(cfg, files::kSkipThoughtEpoch));
    auto os = open_out(at(cfg, files::kStLoss));
    os << "epoch,split,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      os << e + 1 << ",train," << fmt_value(result.epoch_loss[e]) << '\n';
      os << e + 1 << ",valid," << fmt_value(valid_curve[e]) << '\n';
    }
  });
}

void encode(const ExperimentConfig& cfg) {
  require_out(cfg);
  const auto splits = load_splits(cfg);
  if (cfg.embedding == embed::EmbeddingKind::CombineSkip) require_file(at(cfg, files::kSkipThought), "skip-thought checkpoint (run train-st first)");
  if (!cfg.word_vectors.empty()) require_file(cfg.word_vectors, "word vectors");
  stage("encode", [&] {
    const auto sentences = flatten(splits.train);
    gan::Rows rows;
    if (cfg.embedding == embed::EmbeddingKind::CombineSkip) {
      const auto model = ckpt::load_model(at(cfg, files::kSkipThought));
      rows = st::encode_all(model, sentences, model.config.mode);
    } else {
      const auto table = word_table(cfg, splits.vocab);
      for (const auto& s : sentences) {
        const auto tokens = corpus::decode_ids(s.ids, splits.vocab);
        rows.push_back(cfg.embedding == embed::EmbeddingKind::GloveAverage ? embed::compose_average(tokens, table).values
                                                                         : embed::compose_extrema(tokens, table).values);
      }
      std::mt19937_64 rng(cfg.seed);
      auto decoder = st::make_decoder(st::word_embedding_param(splits.vocab.size(), cfg.st.d_w, rng), cfg.st.h_dec,
                                      table.dim(), rng);
      std::vector<st::Ids> targets;
      for (const auto& s : sentences) targets.push_back(s.ids);
      st::DecoderTrainOptions opts;
      opts.epochs = cfg.decoder_epochs;
      opts.batch_size = cfg.st.batch_size;
      opts.lr = cfg.st.lr;
      opts.clip_norm = cfg.st.clip_norm;
      opts.seed = cfg.seed;
      st::train_decoder(decoder, rows, targets, opts);
      ckpt::save_decoder(at(cfg, files::kDecoder), decoder);
    }
    ckpt::save_rows(at(cfg, files::kEmbeddings), "embeddings", rows, embedding_stamp(cfg));
    spdlog::info("encoded {} sentences as {}-d {} vectors", rows.size(), rows.empty() ? 0 : rows.front().size(),
                 embed::kind_name(cfg.embedding));
  });
}

void train_gan(const ExperimentConfig& cfg) {
  require_out(cfg);
  require_file(at(cfg, files::kEmbeddings), "embeddings (run encode first)");
  ckpt::KeyValues stored;
  const auto real = ckpt::load_rows(at(cfg, files::kEmbeddings), "embeddings", &stored);
  if (stored["embedding"] != embed::kind_name(cfg.embedding))
    throw ValidationError("embeddings on disk are '" + stored["embedding"] + "', config asks for '" +
                          std::string(embed::kind_name(cfg.embedding)) + "' (rerun encode)");
  if (real.empty()) throw ValidationError("no embeddings to train on");
  const auto gcfg = gan_config_for(cfg, real.front().size());
  try {
    gcfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  stage("train-gan", [&] {
    auto model = gan::make_gan(gcfg);
    auto result = gan::gan_train(model, real);
    ckpt::save_gan(at(cfg, files::kGan), model);
    auto os = open_out(at(cfg, files::kGanHistory));
    os << "round,d_loss,g_loss,grad_norm\n";
    for (const auto& r : result.history)
      os << r.round << ',' << fmt_value(r.d_loss) << ',' << fmt_value(r.g_loss) << ',' << fmt_value(r.grad_norm) << '\n';
    ckpt::NamedTensors snaps;
    for (const auto& s : result.snapshots) {
      std::vector<double> flat;
      for (const auto& row : s.samples) flat.insert(flat.end(), row.begin(), row.end());
      snaps.emplace_back(fmt::format("round_{:06d}", s.round),
                         nd::Tensor({s.samples.size(), gcfg.data_dim}, std::move(flat)));
    }
    fs::remove_all(at(cfg, files::kSnapshots));
    if (!snaps.empty()) {
      fs::create_directories(at(cfg, files::kSnapshots));
      ckpt::save(at(cfg, files::kSnapshots) / "vectors.ckpt", "snapshots", {}, snaps);
    }
  });
}

void sample(const ExperimentConfig& cfg) {
  require_out(cfg);
  require_file(at(cfg, files::kGan), "GAN checkpoint (run train-gan first)");
  const auto vocab = corpus::Vocabulary::load(at(cfg, files::kVocab));
  stage("sample", [&] {
    const auto model = ckpt::load_gan(at(cfg, files::kGan));
    const auto decoder = load_sampling_decoder(cfg);
    if (decoder.gru.cond_reset.size(1) != model.config.data_dim)
      throw std::runtime_error(fmt::format("decoder expects {}-d vectors, generator emits {}-d",
                                           decoder.gru.cond_reset.size(1), model.config.data_dim));
    write_sentences(at(cfg, files::kSamples), gan::sample_and_decode(model, cfg.samples, decoder, cfg.decode, cfg.seed),
                    vocab);
    const auto snap_file = at(cfg, files::kSnapshots) / "vectors.ckpt";
    if (fs::exists(snap_file)) {
      for (const auto& [name, t] : ckpt::load(snap_file, "snapshots").tensors) {
        std::vector<st::DecodeResult> decoded;
        for (std::size_t i = 0; i < t.size(0); ++i) {
          std::vector<double> v(t.data().begin() + i * t.size(1), t.data().begin() + (i + 1) * t.size(1));
          decoded.push_back(st::greedy_decode(v, decoder, cfg.decode.max_len));
        }
        write_sentences(at(cfg, files::kSnapshots) / (name + ".txt"), decoded, vocab);
      }
    }
  });
}

metrics::MetricReport score(std::span<const metrics::EvalPair> pairs, const std::vector<std::string>& metric_names,
                            const std::string& model, const std::string& embedding) {
  if (metric_names.empty()) throw ValidationError("no metrics requested");
  metrics::MetricReport report;
  for (const auto& m : metric_names) {
    double v;
    try {
      v = metrics::compute_metric(m, pairs);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
    report.rows.push_back({model, embedding, m, v});
  }
  return report;
}

metrics::MetricReport evaluate(const ExperimentConfig& cfg) {
  require_out(cfg);
  require_file(at(cfg, files::kSamples), "samples (run sample first)");
  validate_metrics(cfg.metrics);
  const auto test_docs = corpus::read_token_documents(at(cfg, files::kTest));
  return stage("evaluate", [&] {
    auto refs = corpus::all_sentences(test_docs);
    if (refs.empty()) refs = corpus::all_sentences(corpus::read_token_documents(at(cfg, files::kValid)));
    if (refs.empty()) throw std::runtime_error("no reference sentences in the test or valid split");
    std::vector<metrics::EvalPair> pairs;
    for (const auto& line : read_lines(at(cfg, files::kSamples))) pairs.push_back({corpus::tokenize(line), refs});
    if (pairs.empty()) throw std::runtime_error("samples file is empty");
    auto rep = score(pairs, cfg.metrics, cfg.model_name(), std::string(embed::kind_name(cfg.embedding)));
    auto os = open_out(at(cfg, files::kReport));
    metrics::write_report_csv(rep, os);
    return rep;
  });
}

void report(const ExperimentConfig& cfg) {
  require_out(cfg);
  require_file(at(cfg, files::kReport), "report CSV (run evaluate first)");
  stage("report", [&] {
    std::ifstream is(at(cfg, files::kReport));
    const auto rep = metrics::read_report_csv(is);
    if (rep.rows.empty()) throw ValidationError("report is empty");
    open_out(at(cfg, files::kReportSvg)) << report_svg(rep);

    auto read_csv = [](const fs::path& p) {
      std::vector<std::vector<std::string>> rows;
      std::ifstream in(p);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        rows.push_back(fields);
      }
      return rows;
    };
    if (fs::exists(at(cfg, files::kStLoss))) {
      std::vector<double> train, valid;
      for (const auto& r : read_csv(at(cfg, files::kStLoss))) (r.at(1) == "train" ? train : valid).push_back(std::stod(r.at(2)));
      open_out(at(cfg, files::kStLossSvg)) << line_chart_svg("skip-thought loss", {{"train", train}, {"valid", valid}});
    }
    if (fs::exists(at(cfg, files::kGanHistory))) {
      std::vector<double> d, g;
      for (const auto& r : read_csv(at(cfg, files::kGanHistory))) {
        d.push_back(std::stod(r.at(1)));
        g.push_back(std::stod(r.at(2)));
      }
      open_out(at(cfg, files::kGanHistorySvg)) << line_chart_svg("GAN losses", {{"d_loss", d}, {"g_loss", g}});
    }
  });
}

metrics::MetricReport run_pipeline(const ExperimentConfig& cfg) {
  require_out(cfg);
  require_file(cfg.corpus, "corpus");
  if (!cfg.word_vectors.empty()) require_file(cfg.word_vectors, "word vectors");
  validate_metrics(cfg.metrics);

  bool upstream_ran = false;
  auto run_if = [&](bool fresh, const char* name, const std::function<void()>& body) {
    if (fresh && !upstream_ran) {
      spdlog::info("stage {} up to date, skipped", name);
      return;
    }
    body();
    upstream_ran = true;
  };

  const char* prepared_files[] = {files::kVocab, files::kTrain, files::kValid, files::kTest};
  const bool prepared = std::all_of(std::begin(prepared_files), std::end(prepared_files),
                                    [&](const char* f) { return fs::exists(at(cfg, f)); });
  run_if(prepared, "prepare", [&] { prepare(cfg); });
  if (cfg.embedding == embed::EmbeddingKind::CombineSkip) {
    run_if(config_matches(at(cfg, files::kSkipThought), "skipthought", st_stamp(cfg)), "train-st",
           [&] { train_st(cfg); });
  }
  const bool encoded = config_matches(at(cfg, files::kEmbeddings), "embeddings", embedding_stamp(cfg)) &&
                       (cfg.embedding == embed::EmbeddingKind::CombineSkip || fs::exists(at(cfg, files::kDecoder)));
  run_if(encoded, "encode", [&] { encode(cfg); });
  std::size_t dim = 0;
  {
    nd::Shape shape = ckpt::load(at(cfg, files::kEmbeddings), "embeddings").at("rows").shape();
    dim = shape.at(1);
  }
  run_if(config_matches(at(cfg, files::kGan), "gan", gan_stamp(cfg, dim)) && fs::exists(at(cfg, files::kGanHistory)),
         "train-gan", [&] { train_gan(cfg); });
  run_if(fs::exists(at(cfg, files::kSamples)), "sample", [&] { sample(cfg); });
  // Evaluation is cheap and depends on the metric list, so it always runs.
  upstream_ran = true;
  auto rep = evaluate(cfg);
  report(cfg);
  return rep;
}

std::vector<metrics::EvalPair> aligned_pairs(const fs::path& hyp, const fs::path& ref) {
  require_file(hyp, "hypothesis file");
  require_file(ref, "reference file");
  const auto h = read_lines(hyp), r = read_lines(ref);
  if (h.size() != r.size())
    throw ValidationError(fmt::format("{} has {} lines but {} has {}", hyp.string(), h.size(), ref.string(), r.size()));
  if (h.empty()) throw ValidationError("hypothesis file is empty");
  std::vector<metrics::EvalPair> pairs;
  for (std::size_t i = 0; i < h.size(); ++i) pairs.push_back({corpus::tokenize(h[i]), {corpus::tokenize(r[i])}});
  return pairs;
}

std::string report_svg(const metrics::MetricReport& report) {
  if (report.rows.empty()) throw ValidationError("report is empty");
  constexpr double bar = 28, gap = 12, height = 240, top = 30, left = 40;
  const double width = left + static_cast<double>(report.rows.size()) * (bar + gap) + gap;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" font-family=\"sans-serif\" "
      "font-size=\"10\">\n",
      width, height + top + 70);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top, top + height);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2:.0f}\" y2=\"{1}\" stroke=\"black\"/>\n", left, top + height, width);
  for (double tick : {0.0, 0.5, 1.0})
    svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.1f}</text>\n", left - 4,
                       top + height * (1 - tick) + 3, tick);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    const double x = left + gap + static_cast<double>(i) * (bar + gap), h = height * r.value;
    svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.2f}\" width=\"{}\" height=\"{:.2f}\" fill=\"steelblue\"><title>{} {} {} "
                       "{:.6f}</title></rect>\n",
                       x, top + height - h, bar, h, r.model, r.embedding, r.metric, r.value);
    svg += fmt::format("<text x=\"{0:.1f}\" y=\"{1:.1f}\" transform=\"rotate(60 {0:.1f} {1:.1f})\">{2} {3}</text>\n",
                       x + 4, top + height + 12, r.model, r.metric);
  }
  return svg + "</svg>\n";
}

std::string line_chart_svg(const std::string& title,
                           const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  constexpr double w = 480, h = 240, pad = 40;
  static constexpr const char* colors[] = {"steelblue", "darkorange", "seagreen", "firebrick"};
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (const auto& [name, ys] : series) {
    n = std::max(n, ys.size());
    for (double y : ys)
      if (std::isfinite(y)) lo = std::min(lo, y), hi = std::max(hi, y);
  }
  if (!(hi > lo)) lo -= 1, hi += 1;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" font-family=\"sans-serif\" "
      "font-size=\"10\">\n<text x=\"{2}\" y=\"16\">{3}</text>\n",
      w + 2 * pad, h + 2 * pad, pad, title);
  svg += fmt::format("<rect x=\"{0}\" y=\"{0}\" width=\"{1}\" height=\"{2}\" fill=\"none\" stroke=\"black\"/>\n", pad, w, h);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", pad - 4, pad + 4, hi);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", pad - 4, pad + h, lo);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& [name, ys] = series[s];
    std::string points;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (!std::isfinite(ys[i])) continue;
      const double x = pad + (n > 1 ? w * static_cast<double>(i) / static_cast<double>(n - 1) : w / 2);
      const double y = pad + h * (hi - ys[i]) / (hi - lo);
      points += fmt::format("{}{:.2f},{:.2f}", points.empty() ? "" : " ", x, y);
    }
    const char* color = colors[s % 4];
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" points=\"{}\"/>\n", color, points);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", pad + w - 60, pad + 14 + 12 * s, color, name);
  }
  return svg + "</svg>\n";
}

}  // namespace stgan::pipeline
