#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "stgan/sent_embed.hpp"

using namespace stgan::embed;
using Tokens = std::vector<std::string>;

namespace {

WordVectorTable table_of(const std::string& text) {
  std::istringstream in(text);
  return load_word_vectors(in);
}

}  // namespace

TEST_CASE("load_word_vectors") {
  auto t = table_of("a 1 2\nb 3 4\n");
  CHECK(t.dim() == 2);
  CHECK(t.size() == 2);
  CHECK(*t.find("b") == Vec{3, 4});

  try {
    table_of("a 1 2\nb 3\n");
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS(table_of(""));
  CHECK_THROWS(table_of("\n\n"));
  CHECK_THROWS(table_of("a 1 x\n"));

  auto dup = table_of("a 1 2\na 5 6\n");
  CHECK(dup.size() == 1);
  CHECK(*dup.find("a") == Vec{5, 6});
}

TEST_CASE("word vector table round trip") {
  Tokens words{"cat", "dog", "owl"};
  auto t = random_word_vectors(words, 7, 3);
  std::stringstream ss;
  save_word_vectors(t, ss);
  auto back = load_word_vectors(ss);
  CHECK(back.entries() == t.entries());
  CHECK(random_word_vectors(words, 7, 3).entries() == t.entries());
  CHECK(random_word_vectors(words, 50, 0).dim() == 50);
}

TEST_CASE("compose_average") {
  auto t = table_of("a 1 2\nb 3 4\n");
  CHECK(compose_average(Tokens{"a", "b"}, t).values == Vec{2, 3});
  CHECK(compose_average(Tokens{"a"}, t).values == Vec{1, 2});
  CHECK(compose_average(Tokens{"a", "zzz"}, t).values == Vec{1, 2});
  CHECK(compose_average(Tokens{"zzz"}, t).values == Vec{0, 0});
  CHECK(compose_average(Tokens{"a"}, t).kind == EmbeddingKind::GloveAverage);
}

TEST_CASE("compose_extrema") {
  auto t = table_of("a 1 -2\nb -3 1\n");
  CHECK(compose_extrema(Tokens{"a", "b"}, t).values == Vec{-3, -2});
  CHECK(compose_extrema(Tokens{"b"}, t).values == Vec{-3, 1});
  auto tie = table_of("p 2 0\nq -2 5\n");
  CHECK(compose_extrema(Tokens{"p", "q"}, tie).values == Vec{2, 5});
  CHECK(compose_extrema(Tokens{"q", "p"}, tie).values == Vec{-2, 5});
  CHECK(compose_extrema(Tokens{"nope"}, t).values == Vec{0, 0});
}

TEST_CASE("composition properties on random tables") {
  std::mt19937_64 rng(11);
  Tokens vocab;
  for (int i = 0; i < 30; ++i) vocab.push_back("w" + std::to_string(i));
  auto t = random_word_vectors(vocab, 9, 5);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), len(1, 8);
  for (int trial = 0; trial < 100; ++trial) {
    Tokens s(len(rng));
    for (auto& w : s) w = vocab[pick(rng)];
    auto avg = compose_average(s, t).values;
    auto ext = compose_extrema(s, t).values;
    for (std::size_t k = 0; k < avg.size(); ++k) CHECK(std::abs(ext[k]) >= std::abs(avg[k]) - 1e-15);

    Tokens shuffled = s;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto avg2 = compose_average(shuffled, t).values;
    for (std::size_t k = 0; k < avg.size(); ++k) CHECK(avg2[k] == doctest::Approx(avg[k]).epsilon(1e-12));
    // Random Gaussian entries never tie in magnitude, so extrema is order-free here.
    CHECK(compose_extrema(shuffled, t).values == ext);

    Tokens one{s.front()};
    CHECK(compose_average(one, t).values == *t.find(s.front()));
    CHECK(compose_extrema(one, t).values == *t.find(s.front()));
  }
}

TEST_CASE("nearest_word") {
  auto t = table_of("north 0 10\neast 10 0\nsouth 0 -10\n");
  CHECK(nearest_word(Vec{0, 10}, t, Metric::Euclidean) == "north");
  CHECK(nearest_word(Vec{20, 0}, t, Metric::Cosine) == "east");
  CHECK(nearest_word(Vec{0, -3}, t, Metric::Cosine) == "south");
  // Ties resolve to the first token in lexicographic order.
  CHECK(nearest_word(Vec{5, 5}, t, Metric::Euclidean) == "east");
  CHECK_THROWS(nearest_word(Vec{1, 2}, WordVectorTable(2)));
  CHECK_THROWS(nearest_word(Vec{1}, t));
}

TEST_CASE("nearest_word agrees with an exhaustive scan") {
  Tokens vocab;
  for (int i = 0; i < 40; ++i) vocab.push_back("t" + std::to_string(i));
  auto t = random_word_vectors(vocab, 6, 2);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec& a = *t.find(vocab[pick(rng)]);
    const Vec& b = *t.find(vocab[pick(rng)]);
    Vec mid(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) mid[k] = 0.5 * (a[k] + b[k]) + 0.01 * k;
    std::string best;
    double best_d = 1e300;
    for (const auto& w : vocab) {
      const Vec& v = *t.find(w);
      double d = 0;
      for (std::size_t k = 0; k < v.size(); ++k) d += (v[k] - mid[k]) * (v[k] - mid[k]);
      if (d < best_d) best_d = d, best = w;
    }
    CHECK(nearest_word(mid, t, Metric::Euclidean) == best);
    Vec scaled = a;
    for (auto& x : scaled) x *= 2;
    CHECK(*t.find(nearest_word(scaled, t, Metric::Cosine)) == a);
  }
}

TEST_CASE("embedding kind names") {
  CHECK(parse_kind("st") == EmbeddingKind::CombineSkip);
  CHECK(parse_kind("glove-avg") == EmbeddingKind::GloveAverage);
  CHECK(parse_kind("glove-ext") == EmbeddingKind::GloveExtrema);
  CHECK(kind_name(EmbeddingKind::GloveExtrema) == "glove-ext");
  CHECK_THROWS(parse_kind("bert"));
}
