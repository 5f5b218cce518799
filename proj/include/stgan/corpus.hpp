#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stgan::corpus {

using TokenId = std::size_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kStart = 1;
inline constexpr TokenId kEnd = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kReservedCount = 4;

inline constexpr std::size_t kDefaultBatchSize = 16;
inline constexpr std::size_t kDefaultMaxLength = 30;

/// Lowercases, splits on whitespace, separates punctuation and clitics
/// ("can't" -> "ca", "n't"). Idempotent on its own output.
std::vector<std::string> tokenize(std::string_view line);

class Vocabulary {
 public:
  /// Tokens ordered by descending frequency, ties lexicographic. `cap` bounds
  /// the non-reserved entries; 0 means unbounded.
  static Vocabulary build(std::span<const std::vector<std::string>> sentences,
                          std::size_t min_freq = 1, std::size_t cap = 0);
  static Vocabulary build_from_lines(std::span<const std::string> lines, std::size_t min_freq = 1,
                                     std::size_t cap = 0);

  TokenId lookup(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t frequency(TokenId id) const { return freq_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;

  /// "token\tid\tfrequency" per line in id order, reserved entries included.
  void write(std::ostream& os) const;
  static Vocabulary read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && freq_ == other.freq_;
  }

 private:
  Vocabulary();
  void append(std::string token, std::size_t freq);

  std::vector<std::string> tokens_;
  std::vector<std::size_t> freq_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenizedSentence {
  std::vector<TokenId> ids;  // <s> body </s>
  std::size_t line = 0;

  std::size_t length() const { return ids.size(); }
  std::size_t body_length() const { return ids.size() >= 2 ? ids.size() - 2 : 0; }
  bool operator==(const TokenizedSentence&) const = default;
};

TokenizedSentence encode_ids(std::span<const std::string> tokens, const Vocabulary& vocab,
                             std::size_t line = 0);
/// Maps ids back to tokens, dropping <s>, </s> and PAD.
std::vector<std::string> decode_ids(std::span<const TokenId> ids, const Vocabulary& vocab);
std::string join_tokens(std::span<const std::string> tokens);

struct SentenceTriple {
  TokenizedSentence prev;
  TokenizedSentence current;
  TokenizedSentence next;
};

using Document = std::vector<TokenizedSentence>;

/// Width-3, stride-1 windows over one document.
std::vector<SentenceTriple> make_triples(const Document& document);

/// Groups indices by exact length, ascending by length, each batch at most
/// `batch_size` long. Order inside a group is a seeded shuffle.
std::vector<std::vector<std::size_t>> batch_by_length(std::span<const std::size_t> lengths,
                                                      std::size_t batch_size, std::uint64_t seed);
std::vector<std::vector<std::size_t>> batch_same_length(std::span<const TokenizedSentence> sentences,
                                                        std::size_t batch_size = kDefaultBatchSize,
                                                        std::uint64_t seed = 0);

// ---- corpus files ----------------------------------------------------------

struct RawLine {
  std::string text;
  std::size_t line = 0;  // 1-based source line
};
using RawDocument = std::vector<RawLine>;

/// One sentence per line; blank lines separate documents.
std::vector<RawDocument> read_documents(std::istream& is);
std::vector<RawDocument> read_documents(const std::filesystem::path& path);

struct TokenDocument {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::size_t> lines;
};

struct SplitOptions {
  std::size_t max_length = kDefaultMaxLength;  // body tokens; longer sentences are dropped
  std::size_t block_size = 32;                 // sentences per split unit
  std::uint64_t seed = 0;
};

struct CorpusSplits {
  std::vector<TokenDocument> train;
  std::vector<TokenDocument> test;
  std::vector<TokenDocument> valid;
  std::size_t dropped_long = 0;
};

/// Tokenizes, drops over-long sentences (cutting the document there so triples
/// never span a gap), then shuffles contiguous blocks and splits them 5/1/1 by
/// sentence count.
CorpusSplits split_corpus(const std::vector<RawDocument>& documents, const SplitOptions& options);

/// Tokenized documents as text: tokens joined by spaces, blank line between documents.
void write_token_documents(std::ostream& os, std::span<const TokenDocument> docs);
void write_token_documents(const std::filesystem::path& path, std::span<const TokenDocument> docs);
std::vector<TokenDocument> read_token_documents(const std::filesystem::path& path);

std::vector<Document> encode_documents(std::span<const TokenDocument> docs, const Vocabulary& vocab);
std::vector<SentenceTriple> triples_of(std::span<const Document> docs);
std::vector<std::vector<std::string>> all_sentences(std::span<const TokenDocument> docs);

}  // namespace stgan::corpus
