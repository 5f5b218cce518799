#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "stgan/corpus.hpp"
#include "stgan/synthetic.hpp"

using namespace stgan::corpus;
using Tokens = std::vector<std::string>;

TEST_CASE("tokenize") {
  CHECK(tokenize("The cat sat.") == Tokens{"the", "cat", "sat", "."});
  CHECK(tokenize("I can't") == Tokens{"i", "ca", "n't"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   ").empty());
  CHECK(tokenize("Here you can\xE2\x80\x99t see your suitcase,") ==
        Tokens{"here", "you", "ca", "n't", "see", "your", "suitcase", ","});
  CHECK(tokenize("(John's book!)") == Tokens{"(", "john", "'s", "book", "!", ")"});
}

TEST_CASE("tokenize is idempotent on its own output") {
  for (const auto& line : synthetic_corpus(60, 5)) {
    auto once = tokenize(line);
    CHECK(tokenize(join_tokens(once)) == once);
  }
  auto t = tokenize("Don't stop, we're here.");
  CHECK(tokenize(join_tokens(t)) == t);
}

TEST_CASE("vocabulary construction") {
  std::vector<std::string> corpus{"a b", "a"};
  auto v = Vocabulary::build_from_lines(corpus, 1);
  CHECK(v.size() == kReservedCount + 2);
  CHECK(v.lookup("a") == 4);
  CHECK(v.lookup("b") == 5);

  auto v2 = Vocabulary::build_from_lines(corpus, 2);
  CHECK(v2.size() == kReservedCount + 1);
  CHECK(v2.lookup("b") == kUnk);

  auto v3 = Vocabulary::build_from_lines(corpus, 1, 1);
  CHECK(v3.contains("a"));
  CHECK_FALSE(v3.contains("b"));

  std::vector<std::string> empty;
  CHECK_THROWS(Vocabulary::build_from_lines(empty));
  CHECK_THROWS(Vocabulary::build_from_lines(corpus, 0));
}

TEST_CASE("vocabulary ties break lexicographically and reserved ids stay fixed") {
  auto v = Vocabulary::build_from_lines(std::vector<std::string>{"zeta alpha mid", "mid"});
  CHECK(v.token(0) == "<pad>");
  CHECK(v.token(1) == "<s>");
  CHECK(v.token(2) == "</s>");
  CHECK(v.token(3) == "<unk>");
  CHECK(v.token(4) == "mid");
  CHECK(v.token(5) == "alpha");
  CHECK(v.token(6) == "zeta");
  CHECK(v.lookup("never-seen") == kUnk);
}

TEST_CASE("vocabulary file round trip and determinism") {
  auto lines = synthetic_corpus(80, 1);
  auto a = Vocabulary::build_from_lines(lines);
  auto b = Vocabulary::build_from_lines(lines);
  CHECK(a == b);
  std::stringstream ss;
  a.write(ss);
  CHECK(ss.str().starts_with("<pad>\t0\t0\n<s>\t1\t0\n"));
  auto back = Vocabulary::read(ss);
  CHECK(back == a);
}

TEST_CASE("encode_ids wraps and maps OOV to UNK") {
  auto v = Vocabulary::build_from_lines(std::vector<std::string>{"a"});
  CHECK(encode_ids(Tokens{"a"}, v).ids == std::vector<TokenId>{1, 4, 2});
  CHECK(encode_ids(Tokens{"zzz"}, v).ids == std::vector<TokenId>{1, 3, 2});
  CHECK(encode_ids(Tokens{}, v).ids == std::vector<TokenId>{1, 2});
}

TEST_CASE("decode inverts encode for in-vocabulary tokens") {
  auto lines = synthetic_corpus(100, 2);
  auto v = Vocabulary::build_from_lines(lines);
  for (const auto& l : lines) {
    auto t = tokenize(l);
    auto s = encode_ids(t, v);
    CHECK(s.ids.front() == kStart);
    CHECK(s.ids.back() == kEnd);
    CHECK(std::find(s.ids.begin(), s.ids.end(), kPad) == s.ids.end());
    CHECK(decode_ids(s.ids, v) == t);
  }
}

TEST_CASE("make_triples") {
  auto v = Vocabulary::build_from_lines(std::vector<std::string>{"x"});
  Document doc;
  for (std::size_t i = 0; i < 5; ++i) doc.push_back(encode_ids(Tokens(i + 1, "x"), v, i + 1));
  CHECK(make_triples(Document(doc.begin(), doc.begin() + 3)).size() == 1);
  auto triples = make_triples(doc);
  REQUIRE(triples.size() == 3);
  for (std::size_t i = 0; i < triples.size(); ++i) {
    CHECK(triples[i].prev.line + 1 == triples[i].current.line);
    CHECK(triples[i].current.line + 1 == triples[i].next.line);
    // Every interior sentence is the center exactly once.
    CHECK(triples[i].current == doc[i + 1]);
  }
  CHECK(make_triples(Document(doc.begin(), doc.begin() + 2)).empty());
}

TEST_CASE("batch_by_length") {
  std::vector<std::size_t> lens{3, 3, 4};
  auto b = batch_by_length(lens, 2, 0);
  REQUIRE(b.size() == 2);
  CHECK(b[0].size() == 2);
  CHECK(b[1] == std::vector<std::size_t>{2});

  std::vector<std::size_t> distinct{5, 2, 9, 4};
  for (const auto& batch : batch_by_length(distinct, 16, 1)) CHECK(batch.size() == 1);

  std::vector<std::size_t> same(40, 7);
  auto sb = batch_by_length(same, 16, 3);
  REQUIRE(sb.size() == 3);
  CHECK(sb[0].size() == 16);
  CHECK(sb[1].size() == 16);
  CHECK(sb[2].size() == 8);

  CHECK(batch_by_length(same, 16, 3) == sb);
}

TEST_CASE("same-length batches are homogeneous and bounded on random inputs") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> len(2, 9), count(0, 120), bs(1, 20);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> lens(count(rng));
    for (auto& l : lens) l = len(rng);
    const std::size_t batch = bs(rng);
    std::multiset<std::size_t> covered;
    for (const auto& b : batch_by_length(lens, batch, trial)) {
      CHECK(b.size() <= batch);
      CHECK(!b.empty());
      for (auto i : b) {
        CHECK(lens[i] == lens[b[0]]);
        covered.insert(i);
      }
    }
    CHECK(covered.size() == lens.size());
    CHECK(std::set<std::size_t>(covered.begin(), covered.end()).size() == lens.size());
  }
}

TEST_CASE("synthetic corpus shape") {
  auto lines = synthetic_corpus(200, 0);
  std::size_t sentences = 0;
  for (const auto& l : lines) {
    if (l.empty()) continue;
    ++sentences;
    auto n = tokenize(l).size();
    CHECK(n >= 4);
    CHECK(n <= 12);
  }
  CHECK(sentences == 200);
  CHECK(synthetic_corpus(200, 0) == lines);
  CHECK(synthetic_corpus(200, 1) != lines);
  const auto lexicon = synthetic_lexicon().size();
  CHECK(lexicon >= 200);
  CHECK(lexicon <= 300);
}

TEST_CASE("corpus split keeps documents intact and is 5/1/1") {
  auto lines = synthetic_corpus(700, 4);
  std::stringstream ss;
  for (const auto& l : lines) ss << l << '\n';
  auto docs = read_documents(ss);
  std::size_t raw_sentences = 0;
  for (const auto& d : docs) raw_sentences += d.size();
  CHECK(raw_sentences == 700);

  auto splits = split_corpus(docs, {.max_length = 30, .block_size = 32, .seed = 9});
  auto count = [](const std::vector<TokenDocument>& ds) {
    std::size_t n = 0;
    for (const auto& d : ds) n += d.sentences.size();
    return n;
  };
  const auto tr = count(splits.train), te = count(splits.test), va = count(splits.valid);
  CHECK(tr + te + va == 700);
  CHECK(tr == doctest::Approx(500).epsilon(0.03));
  CHECK(te == doctest::Approx(100).epsilon(0.1));
  CHECK(va == doctest::Approx(100).epsilon(0.1));
  for (const auto& d : splits.train)
    for (std::size_t i = 1; i < d.lines.size(); ++i) CHECK(d.lines[i] == d.lines[i - 1] + 1);
}

TEST_CASE("over-long sentences are dropped and cut the document") {
  std::stringstream ss("one two three\nfour five six\n" + std::string(40, 'a') + " " +
                       [] {
                         std::string s;
                         for (int i = 0; i < 40; ++i) s += "w ";
                         return s;
                       }() +
                       "\nseven eight\nnine ten\n");
  auto docs = read_documents(ss);
  auto splits = split_corpus(docs, {.max_length = 30, .block_size = 32, .seed = 0});
  CHECK(splits.dropped_long == 1);
  std::size_t blocks = splits.train.size() + splits.test.size() + splits.valid.size();
  CHECK(blocks == 2);
}

TEST_CASE("token documents round trip through files") {
  auto lines = synthetic_corpus(30, 8);
  std::stringstream ss;
  for (const auto& l : lines) ss << l << '\n';
  auto splits = split_corpus(read_documents(ss), {});
  auto path = std::filesystem::temp_directory_path() / "stgan_test_tokens.txt";
  write_token_documents(path, splits.train);
  auto back = read_token_documents(path);
  REQUIRE(back.size() == splits.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i].sentences == splits.train[i].sentences);
  std::filesystem::remove(path);
}
