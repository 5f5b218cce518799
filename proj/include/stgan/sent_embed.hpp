#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stgan::embed {

using Vec = std::vector<double>;

enum class EmbeddingKind { CombineSkip, GloveAverage, GloveExtrema };

std::string_view kind_name(EmbeddingKind kind);
/// Accepts "st", "combine-skip", "glove-avg", "glove-average", "glove-ext", "glove-extrema".
EmbeddingKind parse_kind(std::string_view name);

struct SentenceEmbedding {
  Vec values;
  EmbeddingKind kind = EmbeddingKind::CombineSkip;
};

enum class Metric { Cosine, Euclidean };

class WordVectorTable {
 public:
  explicit WordVectorTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }

  /// Replaces an existing entry. Returns true if the token was already present.
  bool insert(std::string token, Vec v);
  const Vec* find(std::string_view token) const;
  const std::map<std::string, Vec, std::less<>>& entries() const { return vectors_; }

 private:
  std::size_t dim_;
  std::map<std::string, Vec, std::less<>> vectors_;
};

/// "token v1 ... vd" per line; d comes from the first non-blank line.
WordVectorTable load_word_vectors(std::istream& is);
WordVectorTable load_word_vectors(const std::filesystem::path& path);
void save_word_vectors(const WordVectorTable& table, std::ostream& os);

/// Seeded N(0, 1/sqrt(d)) vector per token, used when no pretrained table is given.
WordVectorTable random_word_vectors(std::span<const std::string> tokens, std::size_t dim = 50,
                                    std::uint64_t seed = 0);

SentenceEmbedding compose_average(std::span<const std::string> sentence, const WordVectorTable& table);
/// Per dimension, the entry of largest magnitude (sign kept); ties go to the earlier word.
SentenceEmbedding compose_extrema(std::span<const std::string> sentence, const WordVectorTable& table);

std::string nearest_word(std::span<const double> v, const WordVectorTable& table,
                         Metric metric = Metric::Cosine);

}  // namespace stgan::embed
