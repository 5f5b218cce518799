#include "stgan/sent_embed.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace stgan::embed {

std::string_view kind_name(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::CombineSkip: return "st";
    case EmbeddingKind::GloveAverage: return "glove-avg";
    case EmbeddingKind::GloveExtrema: return "glove-ext";
  }
  return "?";
}

EmbeddingKind parse_kind(std::string_view name) {
  if (name == "st" || name == "combine-skip") return EmbeddingKind::CombineSkip;
  if (name == "glove-avg" || name == "glove-average") return EmbeddingKind::GloveAverage;
  if (name == "glove-ext" || name == "glove-extrema") return EmbeddingKind::GloveExtrema;
  throw std::invalid_argument("unknown embedding kind '" + std::string(name) + "'");
}

bool WordVectorTable::insert(std::string token, Vec v) {
  if (v.size() != dim_)
    throw std::invalid_argument("vector for '" + token + "' has dimension " +
                                std::to_string(v.size()) + ", table has " + std::to_string(dim_));
  auto [it, fresh] = vectors_.insert_or_assign(std::move(token), std::move(v));
  return !fresh;
}

const Vec* WordVectorTable::find(std::string_view token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

WordVectorTable load_word_vectors(std::istream& is) {
  std::optional<WordVectorTable> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    Vec v;
    std::string num;
    while (fields >> num) {
      std::size_t used = 0;
      double x = 0;
      try {
        x = std::stod(num, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != num.size())
        throw std::runtime_error("word vectors line " + std::to_string(line_no) +
                                 ": bad number '" + num + "'");
      v.push_back(x);
    }
    if (!table) {
      if (v.empty())
        throw std::runtime_error("word vectors line " + std::to_string(line_no) + ": no values");
      table.emplace(v.size());
    }
    if (v.size() != table->dim())
      throw std::runtime_error("word vectors line " + std::to_string(line_no) + ": expected " +
                               std::to_string(table->dim()) + " values, got " +
                               std::to_string(v.size()));
    if (table->insert(token, std::move(v)))
      spdlog::warn("word vectors line {}: duplicate token '{}', keeping the later vector", line_no,
                   token);
  }
  if (!table) throw std::runtime_error("word vector file is empty");
  return std::move(*table);
}

WordVectorTable load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word vectors " + path.string());
  return load_word_vectors(in);
}

void save_word_vectors(const WordVectorTable& table, std::ostream& os) {
  os.precision(17);
  for (const auto& [token, v] : table.entries()) {
    os << token;
    for (double x : v) os << ' ' << x;
    os << '\n';
  }
}

WordVectorTable random_word_vectors(std::span<const std::string> tokens, std::size_t dim,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  WordVectorTable table(dim);
  for (const auto& t : tokens) {
    Vec v(dim);
    for (auto& x : v) x = normal(rng);
    table.insert(t, std::move(v));
  }
  return table;
}

namespace {

std::vector<const Vec*> present(std::span<const std::string> sentence, const WordVectorTable& table,
                                std::string_view what) {
  std::vector<const Vec*> rows;
  for (const auto& t : sentence)
    if (const Vec* v = table.find(t)) rows.push_back(v);
  if (rows.empty()) spdlog::warn("{}: no token of the sentence is in the table, using zeros", what);
  return rows;
}

}  // namespace

SentenceEmbedding compose_average(std::span<const std::string> sentence, const WordVectorTable& table) {
  SentenceEmbedding out{Vec(table.dim(), 0.0), EmbeddingKind::GloveAverage};
  const auto rows = present(sentence, table, "glove average");
  if (rows.empty()) return out;
  for (const Vec* v : rows)
    for (std::size_t k = 0; k < v->size(); ++k) out.values[k] += (*v)[k];
  for (auto& x : out.values) x /= static_cast<double>(rows.size());
  return out;
}

SentenceEmbedding compose_extrema(std::span<const std::string> sentence, const WordVectorTable& table) {
  SentenceEmbedding out{Vec(table.dim(), 0.0), EmbeddingKind::GloveExtrema};
  const auto rows = present(sentence, table, "glove extrema");
  if (rows.empty()) return out;
  out.values = *rows.front();
  for (std::size_t i = 1; i < rows.size(); ++i)
    for (std::size_t k = 0; k < out.values.size(); ++k)
      if (std::abs((*rows[i])[k]) > std::abs(out.values[k])) out.values[k] = (*rows[i])[k];
  return out;
}

std::string nearest_word(std::span<const double> v, const WordVectorTable& table, Metric metric) {
  if (table.empty()) throw std::invalid_argument("nearest_word on an empty table");
  if (v.size() != table.dim())
    throw std::invalid_argument("query has dimension " + std::to_string(v.size()) + ", table has " +
                                std::to_string(table.dim()));
  double vnorm = 0;
  for (double x : v) vnorm += x * x;
  vnorm = std::sqrt(vnorm);

  const std::string* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  // Map order is token order, so strict > keeps the first token on ties.
  for (const auto& [token, w] : table.entries()) {
    double score = 0;
    if (metric == Metric::Cosine) {
      double dot = 0, wnorm = 0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        dot += v[k] * w[k];
        wnorm += w[k] * w[k];
      }
      const double denom = vnorm * std::sqrt(wnorm);
      score = denom > 0 ? dot / denom : 0.0;
    } else {
      double d = 0;
      for (std::size_t k = 0; k < w.size(); ++k) d += (v[k] - w[k]) * (v[k] - w[k]);
      score = -d;
    }
    if (!best || score > best_score) {
      best = &token;
      best_score = score;
    }
  }
  return *best;
}

}  // namespace stgan::embed
