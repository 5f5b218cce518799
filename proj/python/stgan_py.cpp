// Python bindings for the corpus, metric, GAN and pipeline entry points.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "stgan/checkpoint.hpp"
#include "stgan/corpus.hpp"
#include "stgan/gan.hpp"
#include "stgan/metrics.hpp"
#include "stgan/pipeline.hpp"
#include "stgan/synthetic.hpp"

namespace py = pybind11;
using namespace stgan;

namespace {

std::vector<metrics::EvalPair> to_pairs(const std::vector<metrics::Tokens>& hyps,
                                        const std::vector<std::vector<metrics::Tokens>>& refs) {
  if (hyps.size() != refs.size()) throw py::value_error("hypotheses and references differ in length");
  std::vector<metrics::EvalPair> pairs;
  for (std::size_t i = 0; i < hyps.size(); ++i) pairs.push_back({hyps[i], refs[i]});
  return pairs;
}

nd::Tensor to_tensor(const gan::Rows& rows) {
  if (rows.empty()) throw py::value_error("no rows");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw py::value_error("rows differ in length");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return nd::Tensor({rows.size(), rows.front().size()}, std::move(flat));
}

gan::Rows to_rows(const nd::Tensor& t) {
  gan::Rows out(t.size(0));
  const std::size_t w = t.numel() / std::max<std::size_t>(t.size(0), 1);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].assign(t.data().begin() + i * w, t.data().begin() + (i + 1) * w);
  return out;
}

py::dict report_rows(const metrics::MetricReport& r) {
  py::dict out;
  for (const auto& row : r.rows) out[py::str(row.metric)] = row.value;
  return out;
}

}  // namespace

PYBIND11_MODULE(stgan, m) {
  m.doc() = "Skip-thought GAN text generation: corpus tools, metrics, GAN training and the experiment pipeline.";

  py::register_exception<pipeline::ValidationError>(m, "ValidationError", PyExc_ValueError);

  // corpus
  m.def("tokenize", &corpus::tokenize, py::arg("text"));
  m.def("synthetic_corpus", &corpus::synthetic_corpus, py::arg("sentences") = 200, py::arg("seed") = 0,
        "Seeded story-grammar corpus; documents are separated by empty strings.");

  // metrics
  m.def(
      "compute_metric",
      [](const std::string& name, const std::vector<metrics::Tokens>& hyps,
         const std::vector<std::vector<metrics::Tokens>>& refs) {
        const auto pairs = to_pairs(hyps, refs);
        return metrics::compute_metric(name, pairs);
      },
      py::arg("name"), py::arg("hypotheses"), py::arg("references"),
      "name is one of bleu1..bleu4, rougeL, rouge1, rouge2, meteor; references[i] lists the references of "
      "hypotheses[i].");
  m.def("stem", &metrics::stem, py::arg("word"));
  m.def("lcs_length", [](const metrics::Tokens& a, const metrics::Tokens& b) { return metrics::lcs_length(a, b); });
  m.def(
      "weighted_human_scores",
      [](const std::vector<std::pair<std::string, int>>& ratings) {
        std::vector<metrics::Rating> rs;
        for (const auto& [label, r] : ratings) {
          if (label != "real" && label != "fake") throw py::value_error("label must be 'real' or 'fake'");
          rs.push_back({label == "real" ? metrics::Label::Real : metrics::Label::Fake, r});
        }
        const auto t = metrics::weighted_human_scores(rs);
        py::dict out;
        for (auto [name, label] : {std::pair{"real", metrics::Label::Real}, std::pair{"fake", metrics::Label::Fake}}) {
          const auto& c = t.counts[static_cast<int>(label)];
          const auto pct = t.row_percentages(label);
          py::dict row;
          row["counts"] = py::make_tuple(c[0], c[1]);
          row["percent"] = pct ? py::object(py::make_tuple((*pct)[0], (*pct)[1])) : py::object(py::none());
          out[name] = row;
        }
        return out;
      },
      py::arg("ratings"), "ratings: (actual label, 1..5) pairs. Returns weighted counts and row percentages.");

  // GAN
  py::class_<gan::GanConfig>(m, "GanConfig")
      .def(py::init<>())
      .def_readwrite("noise_dim", &gan::GanConfig::noise_dim)
      .def_readwrite("data_dim", &gan::GanConfig::data_dim)
      .def_readwrite("cond_dim", &gan::GanConfig::cond_dim)
      .def_readwrite("g_hidden", &gan::GanConfig::g_hidden)
      .def_readwrite("d_hidden", &gan::GanConfig::d_hidden)
      .def_property(
          "fmeasure", [](const gan::GanConfig& c) { return std::string(gan::fmeasure_name(c.fmeasure)); },
          [](gan::GanConfig& c, const std::string& s) { c.fmeasure = gan::parse_fmeasure(s); })
      .def_property(
          "g_output", [](const gan::GanConfig& c) { return std::string(gan::output_name(c.g_output)); },
          [](gan::GanConfig& c, const std::string& s) { c.g_output = gan::parse_output(s); })
      .def_property(
          "minibatch", [](const gan::GanConfig& c) { return c.minibatch.enabled; },
          [](gan::GanConfig& c, bool on) { c.minibatch.enabled = on; })
      .def_property(
          "minibatch_sizes",
          [](const gan::GanConfig& c) { return py::make_tuple(c.minibatch.a_in, c.minibatch.b, c.minibatch.c); },
          [](gan::GanConfig& c, std::tuple<std::size_t, std::size_t, std::size_t> abc) {
            std::tie(c.minibatch.a_in, c.minibatch.b, c.minibatch.c) = abc;
          },
          "(A_in, B, C); A_in must equal the last discriminator hidden width")
      .def_readwrite("gp_lambda", &gan::GanConfig::gp_lambda)
      .def_readwrite("g_updates", &gan::GanConfig::g_updates)
      .def_readwrite("d_updates", &gan::GanConfig::d_updates)
      .def_readwrite("batch_size", &gan::GanConfig::batch_size)
      .def_readwrite("lr", &gan::GanConfig::lr)
      .def_readwrite("rounds", &gan::GanConfig::rounds)
      .def_readwrite("seed", &gan::GanConfig::seed)
      .def("validate", &gan::GanConfig::validate);

  py::class_<gan::GanModel>(m, "GanModel")
      .def(py::init(&gan::make_gan), py::arg("config"))
      .def_readonly("config", &gan::GanModel::config)
      .def_readonly("d_steps", &gan::GanModel::d_steps)
      .def_readonly("g_steps", &gan::GanModel::g_steps)
      .def(
          "train",
          [](gan::GanModel& model, const gan::Rows& real, const gan::Rows& conditions) {
            gan::GanResult r;
            {
              py::gil_scoped_release release;
              r = gan::gan_train(model, real, conditions);
            }
            py::list history;
            for (const auto& h : r.history)
              history.append(py::dict(py::arg("round") = h.round, py::arg("d_loss") = h.d_loss,
                                      py::arg("g_loss") = h.g_loss, py::arg("grad_norm") = h.grad_norm));
            return history;
          },
          py::arg("real"), py::arg("conditions") = gan::Rows{}, "Runs config.rounds rounds; returns the loss history.")
      .def(
          "generate",
          [](const gan::GanModel& model, std::size_t n, std::uint64_t seed, const gan::Rows& conditions) {
            return gan::generate(model, n, seed, conditions);
          },
          py::arg("n"), py::arg("seed") = 0, py::arg("conditions") = gan::Rows{})
      .def(
          "critic",
          [](const gan::GanModel& model, const gan::Rows& x) {
            nd::NoGradGuard guard;
            const auto out = model.d(to_tensor(x));
            return std::vector<double>(out.data().begin(), out.data().end());
          },
          py::arg("x"))
      .def(
          "interpolate_grad_norm",
          [](const gan::GanModel& model, const gan::Rows& real, const gan::Rows& fake, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            return gan::interpolate_grad_norm([&](const nd::Tensor& x) { return model.d(x); },
                                              to_tensor(real), to_tensor(fake), rng);
          },
          py::arg("real"), py::arg("fake"), py::arg("seed") = 0,
          "Mean critic gradient norm at random interpolates of row-aligned real and fake batches.")
      .def("save", [](const gan::GanModel& model, const std::filesystem::path& p) { ckpt::save_gan(p, model); })
      .def_static("load", &ckpt::load_gan, py::arg("path"));

  m.def("ring_centers", &gan::ring_centers, py::arg("k") = 8, py::arg("radius") = 2.0);
  m.def(
      "sample_mixture",
      [](const gan::Rows& centers, double sigma, std::size_t n, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return gan::sample_mixture(centers, sigma, n, rng);
      },
      py::arg("centers"), py::arg("sigma"), py::arg("n"), py::arg("seed") = 0);
  m.def("mode_coverage", &gan::mode_coverage, py::arg("samples"), py::arg("centers"), py::arg("radius"));
  m.def("minibatch_features", [](const gan::Rows& f, const std::vector<std::size_t>& t_shape,
                                 const std::vector<double>& t_values) {
    const auto out = gan::minibatch_features(to_tensor(f), nd::Tensor(t_shape, t_values));
    return to_rows(out);
  });

  // pipeline
  m.def(
      "run_pipeline",
      [](const std::filesystem::path& corpus, const std::filesystem::path& out, std::uint64_t seed,
         const std::string& preset, const std::string& fmeasure, const std::string& embedding, bool minibatch,
         std::optional<std::size_t> epochs, std::optional<std::size_t> rounds, std::optional<std::size_t> samples,
         std::optional<std::vector<std::string>> metric_names) {
        auto cfg = pipeline::preset_config(preset);
        cfg.apply_seed(seed);
        cfg.corpus = corpus;
        cfg.out = out;
        cfg.gan.fmeasure = gan::parse_fmeasure(fmeasure);
        cfg.embedding = embed::parse_kind(embedding);
        cfg.gan.minibatch.enabled = minibatch;
        if (epochs) cfg.st.epochs = cfg.decoder_epochs = *epochs;
        if (rounds) cfg.gan.rounds = *rounds;
        if (samples) cfg.samples = *samples;
        if (metric_names) cfg.metrics = *metric_names;
        metrics::MetricReport r;
        {
          py::gil_scoped_release release;
          r = pipeline::run_pipeline(cfg);
        }
        return report_rows(r);
      },
      py::arg("corpus"), py::arg("out"), py::arg("seed") = 0, py::arg("preset") = "desk",
      py::arg("fmeasure") = "wgan-gp", py::arg("embedding") = "st", py::arg("minibatch") = false,
      py::arg("epochs") = py::none(), py::arg("rounds") = py::none(), py::arg("samples") = py::none(),
      py::arg("metrics") = py::none(),
      "Runs every stage into out (resuming finished stages) and returns {metric: value}.");
}
