#include <cmath>

#include "doctest.h"
#include "pens/embeddings.hpp"
#include "pens/error.hpp"
#include "pens/rng.hpp"
#include "test_support.hpp"

using namespace pens;

namespace {

std::vector<float> vec(std::span<const float> s) { return {s.begin(), s.end()}; }

std::vector<Tokens> paired_corpus(std::size_t docs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tokens> out;
  for (std::size_t d = 0; d < docs; ++d) {
    Tokens doc;
    const bool xy = uniform01(rng) < 0.5;
    for (int i = 0; i < 10; ++i) {
      doc.push_back(xy ? "x" : "p");
      doc.push_back(xy ? "y" : "q");
    }
    out.push_back(std::move(doc));
  }
  return out;
}

}  // namespace

TEST_CASE("parse_word_vectors examples") {
  const auto plain = parse_word_vectors("a 1 0\nb 0 1\n");
  CHECK(plain.dim() == 2);
  CHECK(plain.size() == 2);
  CHECK(vec(plain.find("a")) == std::vector<float>{1, 0});
  CHECK(vec(plain.find("b")) == std::vector<float>{0, 1});
  CHECK(plain.find("c").empty());

  const auto headed = parse_word_vectors("2 2\na 1 0\nb 0 1\n");
  CHECK(headed.tokens() == plain.tokens());
  CHECK(vec(headed.find("a")) == vec(plain.find("a")));
  CHECK(vec(headed.find("b")) == vec(plain.find("b")));

  try {
    parse_word_vectors("a 1 0\nb 0 1\nc 1 2 3\n");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_word_vectors("a 1 zero\n"), FormatError);
  CHECK_THROWS_AS(parse_word_vectors(""), FormatError);
}

TEST_CASE("word vector files round-trip exactly") {
  Rng rng(21);
  EmbeddingTable table(7, EmbeddingTable::Source::pretrained_file);
  for (int t = 0; t < 40; ++t) {
    std::vector<float> v(7);
    for (auto& x : v) x = static_cast<float>(uniform(rng, -3, 3));
    table.set("tok" + std::to_string(t), v);
  }
  pens::testing::TempDir dir;
  table.save(dir / "v.vec");
  const auto back = load_pretrained(dir / "v.vec");
  REQUIRE(back.tokens() == table.tokens());
  for (const auto& tok : table.tokens()) CHECK(vec(back.find(tok)) == vec(table.find(tok)));
  CHECK(parse_word_vectors("x 0.125 -2.5\n").to_text() == "1 2\nx 0.125 -2.5\n");
}

TEST_CASE("embedding table enforces its invariants") {
  EmbeddingTable table(2, EmbeddingTable::Source::skipgram_trained);
  CHECK_THROWS_AS(table.set("a", std::vector<float>{1, 2, 3}), FormatError);
  CHECK_THROWS_AS(table.set("a", std::vector<float>{1, NAN}), FormatError);
  table.set("a", std::vector<float>{1, 2});
  table.set("a", std::vector<float>{3, 4});
  CHECK(table.size() == 1);
  CHECK(vec(table.find("a")) == std::vector<float>{3, 4});
}

TEST_CASE("assemble_matrix examples") {
  const auto vocab = Vocabulary::from_tokens({"<pad>", "<unk>", "a", "b"});
  const auto table = parse_word_vectors("a 0.5 -1\n");
  const auto m = assemble_matrix(vocab, table, 9);
  CHECK(m.rows == 4);
  CHECK(m.dim == 2);
  CHECK(vec(m.row(0)) == std::vector<float>{0, 0});
  CHECK(vec(m.row(2)) == std::vector<float>{0.5f, -1.0f});
  CHECK(vec(m.row(3)) == vec(m.row(1)));
  for (float x : m.row(1)) {
    CHECK(x >= -0.05f);
    CHECK(x <= 0.05f);
  }
  const auto again = assemble_matrix(vocab, table, 9);
  CHECK(again.values == m.values);
  CHECK(assemble_matrix(vocab, table, 10).values != m.values);
}

TEST_CASE("random_matrix has a zero pad row and bounded entries") {
  const auto vocab = Vocabulary::from_tokens({"<pad>", "<unk>", "a", "b", "c"});
  const auto m = random_matrix(vocab, 6, 4);
  CHECK(m.values.size() == 30);
  for (float x : m.row(0)) CHECK(x == 0.0f);
  for (std::size_t r = 1; r < m.rows; ++r) {
    for (float x : m.row(r)) CHECK(std::abs(x) <= 0.05f);
  }
  CHECK(random_matrix(vocab, 6, 4).values == m.values);
}

TEST_CASE("skip-gram is deterministic under its seed") {
  const auto corpus = paired_corpus(20, 1);
  SkipGramConfig config;
  config.dim = 8;
  config.epochs = 3;
  config.seed = 5;
  const auto a = train_skipgram(corpus, config);
  const auto b = train_skipgram(corpus, config);
  REQUIRE(a.table.tokens() == b.table.tokens());
  for (const auto& tok : a.table.tokens()) CHECK(vec(a.table.find(tok)) == vec(b.table.find(tok)));
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.epoch_loss.size() == 3);
  CHECK(a.table.source() == EmbeddingTable::Source::skipgram_trained);
}

TEST_CASE("skip-gram degenerate and invalid inputs") {
  SkipGramConfig config;
  config.dim = 4;
  config.epochs = 2;
  const auto single = train_skipgram(std::vector<Tokens>{{"only"}}, config);
  REQUIRE(single.table.contains("only"));
  for (float x : single.table.find("only")) CHECK(std::isfinite(x));
  CHECK_THROWS_AS(train_skipgram(std::vector<Tokens>{}, config), Error);
  CHECK_THROWS_AS(train_skipgram(std::vector<Tokens>{{}}, config), Error);
  config.window = 0;
  CHECK_THROWS_AS(train_skipgram(std::vector<Tokens>{{"a", "b"}}, config), ConfigError);
}

TEST_CASE("skip-gram loss does not increase over the first epochs") {
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SkipGramConfig config;
    config.dim = 20;
    config.epochs = 3;
    config.seed = seed;
    const auto result = train_skipgram(paired_corpus(200, seed), config);
    REQUIRE(result.epoch_loss.size() == 3);
    if (result.epoch_loss[1] <= result.epoch_loss[0] && result.epoch_loss[2] <= result.epoch_loss[1]) {
      ++monotone;
    }
  }
  CHECK(monotone >= 4);
}

TEST_CASE("skip-gram places paired tokens together") {
  SkipGramConfig config;
  config.dim = 20;
  config.epochs = 10;
  config.seed = 2;
  const auto t = train_skipgram(paired_corpus(200, 2), config).table;
  const double within = (cosine_similarity(t.find("x"), t.find("y")) +
                         cosine_similarity(t.find("p"), t.find("q"))) / 2;
  const double across = (cosine_similarity(t.find("x"), t.find("q")) +
                         cosine_similarity(t.find("p"), t.find("y")) +
                         cosine_similarity(t.find("x"), t.find("p")) +
                         cosine_similarity(t.find("y"), t.find("q"))) / 4;
  CHECK(within > across);
}

TEST_CASE("cosine similarity") {
  const std::vector<float> a = {1, 0}, b = {0, 2}, c = {3, 0};
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.0));
  CHECK(cosine_similarity(a, c) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_similarity(a, std::vector<float>{1}), ShapeError);
}
