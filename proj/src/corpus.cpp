#include "stgan/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "stgan/log.hpp"

namespace stgan::corpus {

namespace {

constexpr std::string_view kPunct = ".,!?;:\"()[]{}";
constexpr std::string_view kReserved[kReservedCount] = {"<pad>", "<s>", "</s>", "<unk>"};
constexpr std::string_view kClitics[] = {"'s", "'re", "'ll", "'ve", "'d", "'m"};

bool is_punct(char c) { return kPunct.find(c) != std::string_view::npos; }

std::string normalize(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  for (std::size_t i = 0; i < line.size(); ++i) {
    // U+2019 right single quotation mark reads as an apostrophe.
    if (i + 2 < line.size() && static_cast<unsigned char>(line[i]) == 0xE2 &&
        static_cast<unsigned char>(line[i + 1]) == 0x80 &&
        static_cast<unsigned char>(line[i + 2]) == 0x99) {
      out.push_back('\'');
      i += 2;
      continue;
    }
    const auto c = static_cast<unsigned char>(line[i]);
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
  }
  return out;
}

void split_core(std::string core, std::vector<std::string>& out) {
  if (core.empty()) return;
  if (core.size() > 3 && core.ends_with("n't")) {
    out.push_back(core.substr(0, core.size() - 3));
    out.emplace_back("n't");
    return;
  }
  for (auto clitic : kClitics) {
    if (core.size() > clitic.size() && core.ends_with(clitic)) {
      out.push_back(core.substr(0, core.size() - clitic.size()));
      out.emplace_back(clitic);
      return;
    }
  }
  out.push_back(std::move(core));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view line) {
  const std::string text = normalize(line);
  std::vector<std::string> tokens;
  std::istringstream words(text);
  std::string chunk;
  while (words >> chunk) {
    std::size_t begin = 0;
    std::size_t end = chunk.size();
    while (begin < end && is_punct(chunk[begin])) tokens.emplace_back(1, chunk[begin++]);
    std::vector<std::string> trailing;
    while (end > begin && is_punct(chunk[end - 1])) trailing.emplace_back(1, chunk[--end]);
    split_core(chunk.substr(begin, end - begin), tokens);
    tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
  }
  return tokens;
}

// ---- Vocabulary -----------------------------------------------------------

Vocabulary::Vocabulary() {
  for (auto r : kReserved) append(std::string(r), 0);
}

void Vocabulary::append(std::string token, std::size_t freq) {
  const TokenId id = tokens_.size();
  if (!index_.emplace(token, id).second) {
    throw std::invalid_argument("duplicate vocabulary token '" + token + "'");
  }
  tokens_.push_back(std::move(token));
  freq_.push_back(freq);
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> sentences,
                             std::size_t min_freq, std::size_t cap) {
  if (min_freq < 1) throw std::invalid_argument("min_freq must be at least 1");
  if (sentences.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& t : s) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    const bool reserved = std::find(std::begin(kReserved), std::end(kReserved), tok) != std::end(kReserved);
    if (n >= min_freq && !reserved) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (cap > 0 && ranked.size() > cap) ranked.resize(cap);
  Vocabulary vocab;
  for (auto& [tok, n] : ranked) vocab.append(tok, n);
  return vocab;
}

Vocabulary Vocabulary::build_from_lines(std::span<const std::string> lines, std::size_t min_freq,
                                        std::size_t cap) {
  std::vector<std::vector<std::string>> tokenized;
  for (const auto& l : lines) tokenized.push_back(tokenize(l));
  return build(tokenized, min_freq, cap);
}

TokenId Vocabulary::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

void Vocabulary::write(std::ostream& os) const {
  for (TokenId id = 0; id < tokens_.size(); ++id) {
    os << tokens_[id] << '\t' << id << '\t' << freq_[id] << '\n';
  }
}

Vocabulary Vocabulary::read(std::istream& is) {
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tok;
    TokenId id = 0;
    std::size_t freq = 0;
    if (!std::getline(fields, tok, '\t') || !(fields >> id >> freq)) {
      throw std::runtime_error("malformed vocabulary line " + std::to_string(lineno));
    }
    if (id < kReservedCount) {
      if (tok != kReserved[id]) throw std::runtime_error("reserved id " + std::to_string(id) + " reassigned");
      continue;
    }
    if (id != vocab.size()) throw std::runtime_error("vocabulary ids not contiguous at line " + std::to_string(lineno));
    vocab.append(tok, freq);
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write(os);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read(is);
}

// ---- sentences ------------------------------------------------------------

TokenizedSentence encode_ids(std::span<const std::string> tokens, const Vocabulary& vocab,
                             std::size_t line) {
  TokenizedSentence s;
  s.line = line;
  s.ids.reserve(tokens.size() + 2);
  s.ids.push_back(kStart);
  for (const auto& t : tokens) s.ids.push_back(vocab.lookup(t));
  s.ids.push_back(kEnd);
  return s;
}

std::vector<std::string> decode_ids(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id == kStart || id == kEnd || id == kPad) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<SentenceTriple> make_triples(const Document& document) {
  std::vector<SentenceTriple> triples;
  if (document.size() < 3) {
    if (!document.empty()) spdlog::warn("document of {} sentences yields no triples", document.size());
    return triples;
  }
  for (std::size_t i = 1; i + 1 < document.size(); ++i) {
    triples.push_back({document[i - 1], document[i], document[i + 1]});
  }
  return triples;
}

std::vector<std::vector<std::size_t>> batch_by_length(std::span<const std::size_t> lengths,
                                                      std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < lengths.size(); ++i) groups[lengths[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [len, members] : groups) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t start = 0; start < members.size(); start += batch_size) {
      const std::size_t stop = std::min(members.size(), start + batch_size);
      batches.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(start),
                           members.begin() + static_cast<std::ptrdiff_t>(stop));
    }
  }
  return batches;
}

std::vector<std::vector<std::size_t>> batch_same_length(std::span<const TokenizedSentence> sentences,
                                                        std::size_t batch_size, std::uint64_t seed) {
  std::vector<std::size_t> lengths;
  lengths.reserve(sentences.size());
  for (const auto& s : sentences) lengths.push_back(s.length());
  return batch_by_length(lengths, batch_size, seed);
}

// ---- corpus files ---------------------------------------------------------

std::vector<RawDocument> read_documents(std::istream& is) {
  std::vector<RawDocument> docs;
  RawDocument current;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) {
      if (!current.empty()) docs.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back({line, lineno});
  }
  if (!current.empty()) docs.push_back(std::move(current));
  return docs;
}

std::vector<RawDocument> read_documents(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read corpus " + path.string());
  return read_documents(is);
}

CorpusSplits split_corpus(const std::vector<RawDocument>& documents, const SplitOptions& options) {
  if (options.block_size < 1) throw std::invalid_argument("block_size must be at least 1");
  CorpusSplits splits;
  std::vector<TokenDocument> blocks;
  auto flush = [&](TokenDocument& block) {
    if (!block.sentences.empty()) blocks.push_back(std::move(block));
    block = {};
  };
  for (const auto& doc : documents) {
    TokenDocument block;
    for (const auto& raw : doc) {
      auto tokens = tokenize(raw.text);
      if (tokens.empty()) continue;
      if (tokens.size() > options.max_length) {
        ++splits.dropped_long;
        flush(block);
        continue;
      }
      block.sentences.push_back(std::move(tokens));
      block.lines.push_back(raw.line);
      if (block.sentences.size() == options.block_size) flush(block);
    }
    flush(block);
  }
  if (splits.dropped_long > 0) {
    spdlog::info("dropped {} sentences longer than {} tokens", splits.dropped_long, options.max_length);
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(blocks.begin(), blocks.end(), rng);
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.sentences.size();
  std::size_t seen = 0;
  for (auto& b : blocks) {
    // Blocks go to train until 5/7 of all sentences are placed, then test to 6/7.
    const std::size_t n = b.sentences.size();
    if (seen * 7 < total * 5) {
      splits.train.push_back(std::move(b));
    } else if (seen * 7 < total * 6) {
      splits.test.push_back(std::move(b));
    } else {
      splits.valid.push_back(std::move(b));
    }
    seen += n;
  }
  return splits;
}

void write_token_documents(std::ostream& os, std::span<const TokenDocument> docs) {
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (d) os << '\n';
    for (const auto& s : docs[d].sentences) os << join_tokens(s) << '\n';
  }
}

void write_token_documents(const std::filesystem::path& path, std::span<const TokenDocument> docs) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_token_documents(os, docs);
}

std::vector<TokenDocument> read_token_documents(const std::filesystem::path& path) {
  std::vector<TokenDocument> docs;
  for (const auto& raw : read_documents(path)) {
    TokenDocument doc;
    for (const auto& l : raw) {
      doc.sentences.push_back(tokenize(l.text));
      doc.lines.push_back(l.line);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> encode_documents(std::span<const TokenDocument> docs, const Vocabulary& vocab) {
  std::vector<Document> out;
  for (const auto& d : docs) {
    Document doc;
    for (std::size_t i = 0; i < d.sentences.size(); ++i) {
      doc.push_back(encode_ids(d.sentences[i], vocab, i < d.lines.size() ? d.lines[i] : 0));
    }
    out.push_back(std::move(doc));
  }
  return out;
}

std::vector<SentenceTriple> triples_of(std::span<const Document> docs) {
  std::vector<SentenceTriple> out;
  for (const auto& d : docs) {
    auto t = make_triples(d);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::vector<std::vector<std::string>> all_sentences(std::span<const TokenDocument> docs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& d : docs) out.insert(out.end(), d.sentences.begin(), d.sentences.end());
  return out;
}

}  // namespace stgan::corpus
