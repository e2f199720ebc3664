#include <doctest.h>

#include "thoughtbench/common.hpp"
#include "thoughtbench/gateway.hpp"

#include "testutil.hpp"

#include <httplib.h>

#include <atomic>
#include <thread>

using namespace thoughtbench;
using namespace thoughtbench::gateway;
using tbtest::ScratchDir;

namespace {

ChatRequest simple_request(const std::string& content) {
  ChatRequest req;
  req.messages.push_back({Role::User, content});
  req.max_output_tokens = 100;
  return req;
}

GatewayConfig mock_config() {
  GatewayConfig cfg;
  cfg.mode = BackendKind::Mock;
  cfg.mock = MockScript::builtin();
  return cfg;
}

}  // namespace

TEST_CASE("mock scripted reply for any request") {
  GatewayConfig cfg = mock_config();
  cfg.mock.chat_rules = {{"", "hello"}};  // empty match hits everything
  Gateway gw(cfg);
  ChatResponse resp = gw.chat(simple_request("anything at all"));
  CHECK(resp.content == "hello");
  CHECK(resp.backend == BackendKind::Mock);
  CHECK_FALSE(resp.refusal);
}

TEST_CASE("chat request invariants are enforced") {
  Gateway gw(mock_config());
  ChatRequest empty;
  CHECK_THROWS_WITH_AS(gw.chat(empty), doctest::Contains("InvalidRequest"), Error);
  ChatRequest wrong_last;
  wrong_last.messages.push_back({Role::Assistant, "hi"});
  CHECK_THROWS_WITH_AS(gw.chat(wrong_last), doctest::Contains("InvalidRequest"), Error);
}

TEST_CASE("fingerprints: canonicalization is injective on a fixture set") {
  ChatRequest base = simple_request("alpha");
  base.model_id = "m1";

  std::vector<ChatRequest> fixtures;
  fixtures.push_back(base);
  {
    ChatRequest r = base;
    r.messages[0].content = "alpha ";  // trailing space matters
    fixtures.push_back(r);
  }
  {
    ChatRequest r = base;
    r.model_id = "m2";
    fixtures.push_back(r);
  }
  {
    ChatRequest r = base;
    r.temperature = 0.5;
    fixtures.push_back(r);
  }
  {
    ChatRequest r = base;
    r.max_output_tokens = 101;
    fixtures.push_back(r);
  }
  {
    ChatRequest r = base;
    r.seed = 7;
    fixtures.push_back(r);
  }
  {
    ChatRequest r = base;
    r.messages.insert(r.messages.begin(), {Role::System, "be brief"});
    fixtures.push_back(r);
  }
  {
    // two user messages in each order: the sequence must be order-dependent
    ChatRequest r = base;
    r.messages = {{Role::User, "one"}, {Role::User, "two"}};
    fixtures.push_back(r);
    ChatRequest swapped = base;
    swapped.messages = {{Role::User, "two"}, {Role::User, "one"}};
    fixtures.push_back(swapped);
  }
  {
    ChatRequest r = base;
    r.messages = {{Role::System, "alpha"}, {Role::User, "alpha"}};
    fixtures.push_back(r);
  }

  std::vector<std::string> prints;
  for (const ChatRequest& r : fixtures) prints.push_back(fingerprint_chat(r));
  for (std::size_t i = 0; i < prints.size(); ++i) {
    for (std::size_t j = i + 1; j < prints.size(); ++j) {
      CAPTURE(i);
      CAPTURE(j);
      CHECK(prints[i] != prints[j]);
    }
  }
  // embedding and nli fingerprints live in separate key spaces
  CHECK(fingerprint_embedding("m1", "alpha") != fingerprint_chat(base));
  CHECK(fingerprint_nli("alpha", "beta") != fingerprint_nli("beta", "alpha"));
}

TEST_CASE("mock bag-of-words embedding over a fixed vocabulary") {
  GatewayConfig cfg = mock_config();
  cfg.mock.vocabulary = {"a", "b", "c"};
  Gateway gw(cfg);
  EmbeddingVector vec = gw.embed("a b a");
  REQUIRE(vec.dim() == 3);
  CHECK(vec.values[0] == 2.0);
  CHECK(vec.values[1] == 1.0);
  CHECK(vec.values[2] == 0.0);
}

TEST_CASE("identical text embeds once; distinct texts differ") {
  GatewayConfig cfg = mock_config();
  cfg.mock.vocabulary = {"direwolf", "snow", "wall"};
  Gateway gw(cfg);
  EmbeddingVector first = gw.embed("snow on the wall");
  EmbeddingVector second = gw.embed("snow on the wall");
  CHECK(first.values == second.values);
  CHECK(gw.stats().backend_calls == 1);
  CHECK(gw.stats().cache_hits == 1);

  // hand-enumerated term frequencies for two fixtures
  EmbeddingVector other = gw.embed("direwolf direwolf snow");
  CHECK(other.values == std::vector<double>{2.0, 1.0, 0.0});
  CHECK(first.values == std::vector<double>{0.0, 1.0, 1.0});
}

TEST_CASE("embed requires non-empty text") {
  Gateway gw(mock_config());
  CHECK_THROWS_WITH_AS(gw.embed(""), doctest::Contains("InvalidRequest"), Error);
}

TEST_CASE("recording cassettes: dedup, emptiness") {
  ScratchDir dir;
  GatewayConfig cfg = mock_config();
  cfg.mock.chat_rules = {{"", "scripted {hash}"}};

  SUBCASE("three distinct requests produce three entries") {
    Gateway gw(cfg);
    Cassette cassette = record_cassette(
        gw,
        [&] {
          gw.chat(simple_request("one"));
          gw.chat(simple_request("two"));
          gw.chat(simple_request("three"));
        },
        dir / "three.jsonl");
    CHECK(cassette.entries.size() == 3);
  }

  SUBCASE("the same request twice produces one entry, replayed twice") {
    Gateway gw(cfg);
    Cassette cassette = record_cassette(
        gw,
        [&] {
          ChatResponse a = gw.chat(simple_request("same"));
          ChatResponse b = gw.chat(simple_request("same"));
          CHECK(a.content == b.content);
        },
        dir / "dupe.jsonl");
    CHECK(cassette.entries.size() == 1);
    CHECK(gw.stats().backend_calls == 1);
  }

  SUBCASE("an empty run yields an empty cassette") {
    Gateway gw(cfg);
    Cassette cassette = record_cassette(gw, [] {}, dir / "empty.jsonl");
    CHECK(cassette.entries.empty());
  }
}

TEST_CASE("replay is byte-identical and misses are errors") {
  ScratchDir dir;
  std::filesystem::path cassette_path = dir / "cassette.jsonl";

  GatewayConfig mock_cfg = mock_config();
  mock_cfg.mock.chat_rules = {{"", "deterministic reply {hash}"}};
  Gateway recorder(mock_cfg);
  std::string recorded_content;
  record_cassette(
      recorder,
      [&] { recorded_content = recorder.chat(simple_request("replay me")).content; },
      cassette_path);

  GatewayConfig replay_cfg;
  replay_cfg.mode = BackendKind::Replay;
  replay_cfg.cassette_path = cassette_path.string();

  Gateway replay1(replay_cfg);
  Gateway replay2(replay_cfg);
  ChatResponse r1 = replay1.chat(simple_request("replay me"));
  ChatResponse r2 = replay2.chat(simple_request("replay me"));
  CHECK(r1.content == recorded_content);
  CHECK(r1.content == r2.content);
  CHECK(r1.backend == BackendKind::Replay);

  // an edited message has a different fingerprint, hence ReplayMiss
  ChatRequest edited = simple_request("replay me!");
  CHECK(fingerprint_chat(edited) != fingerprint_chat(simple_request("replay me")));
  CHECK_THROWS_WITH_AS(replay1.chat(edited), doctest::Contains("ReplayMiss"), Error);
}

TEST_CASE("cassette save/load round trip") {
  ScratchDir dir;
  Cassette cassette;
  cassette.metadata.created_at = "2026-01-01T00:00:00Z";
  cassette.metadata.model_ids = {"chat-x", "embed-y"};
  cassette.entries["fp1"] = {{"kind", "chat"}, {"content", "hello"}};
  save_cassette(cassette, dir / "c.jsonl");
  Cassette loaded = load_cassette(dir / "c.jsonl");
  CHECK(loaded.metadata.created_at == cassette.metadata.created_at);
  CHECK(loaded.metadata.model_ids == cassette.metadata.model_ids);
  REQUIRE(loaded.entries.count("fp1") == 1);
  CHECK(loaded.entries.at("fp1") == cassette.entries.at("fp1"));
}

TEST_CASE("mock NLI distribution is a proper distribution") {
  Gateway gw(mock_config());
  NliDistribution d = gw.nli("the fire went out on the wall", "the wall fire went out");
  CHECK(d.entailment + d.neutral + d.contradiction == doctest::Approx(1.0));
  CHECK(d.entailment > 0.0);

  GatewayConfig fixed = mock_config();
  fixed.mock.fixed_nli = NliDistribution{0.8, 0.15, 0.05};
  Gateway gw2(fixed);
  NliDistribution d2 = gw2.nli("p", "h");
  CHECK(d2.entailment == doctest::Approx(0.8));
}

TEST_CASE("concurrent calls are safe and dedup through the cache") {
  GatewayConfig cfg = mock_config();
  cfg.mock.chat_rules = {{"", "threaded {hash}"}};
  Gateway gw(cfg);
  std::vector<std::thread> pool;
  std::atomic<int> failures{0};
  for (int t = 0; t < 8; ++t) {
    pool.emplace_back([&gw, &failures, t] {
      for (int i = 0; i < 25; ++i) {
        try {
          gw.chat(simple_request("shared-" + std::to_string(i % 5)));
          gw.embed("shared text " + std::to_string(i % 3) + " t" + std::to_string(t % 2));
        } catch (...) {
          failures.fetch_add(1);
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  CHECK(failures.load() == 0);
  // 5 distinct chats + 6 distinct embeddings, plus a benign duplicate-race allowance
  CHECK(gw.stats().backend_calls <= 11 + 8);
  CHECK(gw.stats().cache_hits > 0);
}

TEST_CASE("live backend against a loopback server") {
  httplib::Server server;
  std::atomic<int> flaky_left{1};
  server.Post("/v1/chat/completions",
              [&](const httplib::Request& req, httplib::Response& res) {
                auto body = nlohmann::json::parse(req.body);
                std::string content =
                    "echo: " + body["messages"].back()["content"].get<std::string>();
                nlohmann::json out = {
                    {"choices",
                     nlohmann::json::array(
                         {{{"message", {{"role", "assistant"}, {"content", content}}}}})},
                    {"usage", {{"prompt_tokens", 5}, {"completion_tokens", 3}}},
                    {"model", body["model"]}};
                res.set_content(out.dump(), "application/json");
              });
  server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
    nlohmann::json out = {
        {"data", nlohmann::json::array({{{"embedding", {0.1, 0.2, 0.3}}}})}};
    res.set_content(out.dump(), "application/json");
  });
  server.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
    if (flaky_left.fetch_sub(1) > 0) {
      res.status = 500;
      res.set_content("transient", "text/plain");
    } else {
      res.set_content(
          nlohmann::json{{"entailment", 0.7}, {"neutral", 0.2}, {"contradiction", 0.1}}
              .dump(),
          "application/json");
    }
  });
  server.Post("/limited", [&](const httplib::Request&, httplib::Response& res) {
    res.status = 429;
    res.set_content("slow down", "text/plain");
  });

  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string base = "http://127.0.0.1:" + std::to_string(port);

  SUBCASE("chat and embeddings round trip") {
    GatewayConfig cfg;
    cfg.mode = BackendKind::Live;
    cfg.endpoint_url = base + "/v1";
    cfg.chat_model = "test-model";
    Gateway gw(cfg);
    ChatResponse resp = gw.chat(simple_request("ping"));
    CHECK(resp.content == "echo: ping");
    CHECK(resp.backend == BackendKind::Live);
    CHECK(resp.usage.prompt_tokens == 5);
    EmbeddingVector vec = gw.embed("hello");
    CHECK(vec.dim() == 3);
  }

  SUBCASE("transient 500 retries then succeeds") {
    flaky_left = 1;
    GatewayConfig cfg;
    cfg.mode = BackendKind::Live;
    cfg.endpoint_url = base + "/v1";
    cfg.nli_url = base + "/flaky";
    Gateway gw(cfg);
    NliDistribution d = gw.nli("p", "h");
    CHECK(d.entailment == doctest::Approx(0.7));
  }

  SUBCASE("429 exhausts retries into RateLimited") {
    GatewayConfig cfg;
    cfg.mode = BackendKind::Live;
    cfg.endpoint_url = base + "/v1";
    cfg.nli_url = base + "/limited";
    cfg.max_attempts = 2;
    Gateway gw(cfg);
    CHECK_THROWS_WITH_AS(gw.nli("p", "h"), doctest::Contains("RateLimited"), Error);
  }

  SUBCASE("nli without a configured scorer is ScorerUnavailable") {
    GatewayConfig cfg;
    cfg.mode = BackendKind::Live;
    cfg.endpoint_url = base + "/v1";
    Gateway gw(cfg);
    CHECK_THROWS_WITH_AS(gw.nli("p", "h"), doctest::Contains("ScorerUnavailable"), Error);
  }

  server.stop();
  server_thread.join();
}
