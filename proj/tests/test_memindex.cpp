#include <doctest.h>

#include "thoughtbench/common.hpp"
#include "thoughtbench/memindex.hpp"

#include "testutil.hpp"

#include <random>

using namespace thoughtbench;
using namespace thoughtbench::memindex;
using tbtest::ScratchDir;

namespace {

corpus::Chapter make_chapter(const std::string& id, int seq, const std::string& text,
                             const std::string& character = "Tester") {
  corpus::Chapter ch;
  ch.id = id;
  ch.character = character;
  ch.sequence_index = seq;
  ch.text = text;
  ch.source = "fixture";
  return ch;
}

std::string words(std::size_t n, const std::string& word = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += word + std::to_string(i % 7);
  }
  return out;
}

gateway::GatewayConfig vocab_config(std::vector<std::string> vocabulary) {
  gateway::GatewayConfig cfg;
  cfg.mode = gateway::BackendKind::Mock;
  cfg.mock.vocabulary = std::move(vocabulary);
  return cfg;
}

// Brute-force oracle: repeated argmax with earlier-position tie-break.
std::vector<std::size_t> oracle_top_k(const gateway::EmbeddingVector& query,
                                      const MemoryIndex& index, std::size_t k) {
  std::vector<bool> taken(index.chunks.size(), false);
  std::vector<std::size_t> out;
  for (std::size_t round = 0; round < std::min(k, index.chunks.size()); ++round) {
    double best = -2.0;
    std::size_t best_i = index.chunks.size();
    for (std::size_t i = 0; i < index.chunks.size(); ++i) {
      if (taken[i]) continue;
      double score = cosine_similarity(query, *index.chunks[i].embedding);
      if (score > best) {
        best = score;
        best_i = i;
      }
    }
    taken[best_i] = true;
    out.push_back(best_i);
  }
  return out;
}

}  // namespace

TEST_CASE("fixed windows: 2500 tokens at size 1000 -> 1000/1000/500") {
  auto chunks = chunk_memory({make_chapter("c1", 0, words(2500))}, 1000);
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[0].token_count == 1000);
  CHECK(chunks[1].token_count == 1000);
  CHECK(chunks[2].token_count == 500);
  CHECK(chunks[0].span.start_token == 0);
  CHECK(chunks[2].span.end_token == 2500);
}

TEST_CASE("empty chapter list and exact-size boundary") {
  CHECK(chunk_memory({}, 1000).empty());
  auto exact = chunk_memory({make_chapter("c1", 0, words(1000))}, 1000);
  REQUIRE(exact.size() == 1);
  CHECK(exact[0].token_count == 1000);
}

TEST_CASE("chunks straddle chapter boundaries and rejoin exactly") {
  std::vector<corpus::Chapter> chapters = {make_chapter("a", 0, words(70) + "\n"),
                                           make_chapter("b", 1, words(50) + "\n"),
                                           make_chapter("c", 2, words(35))};
  auto chunks = chunk_memory(chapters, 60);
  std::string joined;
  for (const auto& chunk : chunks) joined += chunk.text;
  std::string source;
  for (const auto& ch : chapters) source += ch.text;
  CHECK(joined == source);
  for (std::size_t i = 0; i + 1 < chunks.size(); ++i) {
    CHECK(chunks[i].token_count == 60);
    CHECK(chunks[i].span.end_token == chunks[i + 1].span.start_token);
  }
  // the second chunk starts inside chapter b
  CHECK(chunks[1].span.chapter_id == "b");
}

TEST_CASE("chunk round trip on random texts") {
  std::mt19937 rng(77);
  std::uniform_int_distribution<int> n_tokens(1, 900);
  std::uniform_int_distribution<int> chunk_size(1, 120);
  std::uniform_int_distribution<int> sep(0, 2);
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    int n = n_tokens(rng);
    for (int i = 0; i < n; ++i) {
      text += "tok" + std::to_string(rng() % 100);
      switch (sep(rng)) {
        case 0: text += ' '; break;
        case 1: text += '\n'; break;
        default: text += "  "; break;
      }
    }
    std::size_t size = static_cast<std::size_t>(chunk_size(rng));
    auto chunks = chunk_memory({make_chapter("c", 0, text)}, size);
    std::string joined;
    for (const auto& chunk : chunks) joined += chunk.text;
    REQUIRE(joined == text);
    for (std::size_t i = 0; i + 1 < chunks.size(); ++i) {
      REQUIRE(chunks[i].token_count == size);
    }
  }
}

TEST_CASE("cosine identities") {
  using gateway::EmbeddingVector;
  EmbeddingVector ex{{1, 0}, "m"};
  EmbeddingVector ey{{0, 1}, "m"};
  EmbeddingVector diag{{1, 1}, "m"};
  CHECK(cosine_similarity(ex, ex) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(ex, ey) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_similarity(diag, ex) == doctest::Approx(0.70710678).epsilon(1e-9));
}

TEST_CASE("cosine errors") {
  using gateway::EmbeddingVector;
  EmbeddingVector a{{1, 0}, "m"};
  EmbeddingVector b{{1, 0, 0}, "m"};
  EmbeddingVector zero{{0, 0}, "m"};
  CHECK_THROWS_WITH_AS(cosine_similarity(a, b), doctest::Contains("DimensionMismatch"),
                       Error);
  CHECK_THROWS_WITH_AS(cosine_similarity(a, zero), doctest::Contains("ZeroVector"), Error);
}

TEST_CASE("cosine is invariant under positive scaling") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> value(-3.0, 3.0);
  std::uniform_real_distribution<double> scale(0.01, 50.0);
  for (int trial = 0; trial < 100; ++trial) {
    gateway::EmbeddingVector a, b;
    a.model_id = b.model_id = "m";
    for (int i = 0; i < 8; ++i) {
      a.values.push_back(value(rng));
      b.values.push_back(value(rng));
    }
    double na = 0, nb = 0;
    for (double v : a.values) na += v * v;
    for (double v : b.values) nb += v * v;
    if (na == 0 || nb == 0) continue;
    double lambda = scale(rng);
    gateway::EmbeddingVector scaled = a;
    for (double& v : scaled.values) v *= lambda;
    CHECK(std::abs(cosine_similarity(a, b) - cosine_similarity(scaled, b)) < 1e-12);
  }
}

TEST_CASE("retrieval: term-frequency fixture favors the matching chunk") {
  gateway::Gateway gw(vocab_config({"direwolf", "snow", "wall"}));
  MemoryIndex index;
  index.character = "Tester";
  index.embedding_model_id = gw.config().embed_model;
  index.chunk_size = 64;
  MemoryChunk a;
  a.chunk_id = "a";
  a.text = "direwolf direwolf direwolf snow";  // [3,1,0]
  a.embedding = gw.embed(a.text);
  a.token_count = 4;
  a.span = {"ch1", 0, 4};
  MemoryChunk b;
  b.chunk_id = "b";
  b.text = "snow snow wall";  // [0,2,1]
  b.embedding = gw.embed(b.text);
  b.token_count = 3;
  b.span = {"ch1", 4, 7};
  index.chunks = {b, a};  // matching chunk deliberately second

  auto top = retrieve_top_k(std::string("direwolf"), index, 1, gw);
  REQUIRE(top.size() == 1);
  CHECK(top[0].chunk.chunk_id == "a");
  // cos(query=[1,0,0], a=[3,1,0]) = 3/sqrt(10)
  CHECK(top[0].score == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-9));
}

TEST_CASE("retrieval saturates at the chunk count and breaks ties by order") {
  gateway::Gateway gw(vocab_config({"x", "y"}));
  MemoryIndex index;
  index.character = "T";
  index.embedding_model_id = gw.config().embed_model;
  for (int i = 0; i < 3; ++i) {
    MemoryChunk c;
    c.chunk_id = "c" + std::to_string(i);
    c.text = "x y";  // identical scores
    c.embedding = gw.embed(c.text);
    c.token_count = 2;
    c.span = {"ch", static_cast<std::size_t>(2 * i), static_cast<std::size_t>(2 * i + 2)};
    index.chunks.push_back(std::move(c));
  }
  auto all = retrieve_top_k(std::string("x"), index, 10, gw);
  CHECK(all.size() == 3);
  auto two = retrieve_top_k(std::string("x"), index, 2, gw);
  REQUIRE(two.size() == 2);
  CHECK(two[0].chunk.chunk_id == "c0");
  CHECK(two[1].chunk.chunk_id == "c1");
}

TEST_CASE("retrieval errors") {
  gateway::Gateway gw(vocab_config({"x"}));
  MemoryIndex empty;
  CHECK_THROWS_WITH_AS(retrieve_top_k(std::string("x"), empty, 1, gw),
                       doctest::Contains("EmptyIndex"), Error);
}

TEST_CASE("retrieval equals the brute-force oracle on random indexes") {
  std::mt19937 rng(20240902);
  std::uniform_int_distribution<int> n_chunks(1, 200);
  std::uniform_int_distribution<int> k_dist(1, 12);
  std::uniform_int_distribution<int> coord(0, 4);
  const std::size_t dim = 6;

  for (int trial = 0; trial < 50; ++trial) {
    MemoryIndex index;
    index.character = "T";
    index.embedding_model_id = "mock";
    int n = n_chunks(rng);
    for (int i = 0; i < n; ++i) {
      MemoryChunk c;
      c.chunk_id = "c" + std::to_string(i);
      c.text = "t";
      c.token_count = 1;
      c.span = {"ch", static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1)};
      gateway::EmbeddingVector v;
      v.model_id = "mock";
      bool nonzero = false;
      for (std::size_t d = 0; d < dim; ++d) {
        double x = coord(rng);
        nonzero |= x != 0;
        v.values.push_back(x);
      }
      if (!nonzero) v.values[0] = 1;  // keep vectors non-zero
      c.embedding = std::move(v);
      index.chunks.push_back(std::move(c));
    }
    gateway::EmbeddingVector query;
    query.model_id = "mock";
    for (std::size_t d = 0; d < dim; ++d) query.values.push_back(coord(rng));
    query.values[rng() % dim] += 1;

    std::size_t k = static_cast<std::size_t>(k_dist(rng));
    auto got = retrieve_top_k(query, index, k);
    auto want = oracle_top_k(query, index, k);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].chunk.chunk_id == index.chunks[want[i]].chunk_id);
    }
  }
}

TEST_CASE("index build, sidecar round trip, and key-mismatch rebuild") {
  ScratchDir dir;
  gateway::Gateway gw(vocab_config({"one", "two", "three"}));
  std::vector<corpus::Chapter> chapters = {
      make_chapter("ch1", 0, "one two three one two. three and more words here."),
      make_chapter("ch2", 1, "two two three plus a tail of filler tokens.")};
  MemoryIndex built = build_index("Tester", chapters, 5, gw);
  CHECK(built.chunks.size() >= 3);
  CHECK(built.chapter_ranges.size() == 2);

  std::filesystem::path sidecar = dir / "tester.jsonl";
  save_index(built, sidecar);
  MemoryIndex loaded = load_index(sidecar);
  CHECK(loaded.character == built.character);
  CHECK(loaded.chunk_size == built.chunk_size);
  CHECK(loaded.embedding_model_id == built.embedding_model_id);
  REQUIRE(loaded.chunks.size() == built.chunks.size());
  for (std::size_t i = 0; i < loaded.chunks.size(); ++i) {
    CHECK(loaded.chunks[i].text == built.chunks[i].text);
    CHECK(loaded.chunks[i].embedding->values == built.chunks[i].embedding->values);
  }

  // same key: reused without new embeddings
  long calls_before = gw.stats().backend_calls;
  MemoryIndex reused = memindex::load_or_build(sidecar, "Tester", chapters, 5, gw);
  CHECK(gw.stats().backend_calls == calls_before);
  CHECK(reused.chunks.size() == built.chunks.size());

  // chunk size change invalidates the sidecar
  MemoryIndex rebuilt = memindex::load_or_build(sidecar, "Tester", chapters, 7, gw);
  CHECK(rebuilt.chunk_size == 7);
  CHECK(load_index(sidecar).chunk_size == 7);
}

TEST_CASE("restricted_before keeps only chunks that end before the chapter") {
  gateway::Gateway gw(vocab_config({"a"}));
  std::vector<corpus::Chapter> chapters = {make_chapter("ch1", 0, words(20)),
                                           make_chapter("ch2", 1, " " + words(20)),
                                           make_chapter("ch3", 2, " " + words(20))};
  MemoryIndex index = build_index("T", chapters, 8, gw);
  bool found = false;
  MemoryIndex before3 = index.restricted_before("ch3", &found);
  CHECK(found);
  std::size_t ch3_begin = 0;
  for (const auto& r : index.chapter_ranges) {
    if (r.chapter_id == "ch3") ch3_begin = r.token_begin;
  }
  for (const auto& chunk : before3.chunks) {
    CHECK(chunk.span.end_token <= ch3_begin);
  }
  CHECK(before3.chunks.size() < index.chunks.size());

  MemoryIndex unknown = index.restricted_before("nope", &found);
  CHECK_FALSE(found);
  CHECK(unknown.chunks.size() == index.chunks.size());
}
