#pragma once
// Provider-agnostic chat/embedding/NLI client with response caching and
// deterministic record/replay.
//
// Three backends share one wire-level cache keyed by a canonical request
// fingerprint:
//   Live   - OpenAI-compatible HTTP endpoints, bounded retry with backoff
//   Replay - cassette lookup only; a miss is an error, never a network call
//   Mock   - scripted replies + a term-frequency embedding backend
//
// Recording captures every served response into a Cassette that a later run
// replays bit-for-bit.

#include <nlohmann/json.hpp>

#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace thoughtbench::gateway {

enum class Role { System, User, Assistant };
enum class BackendKind { Live, Replay, Mock };

std::string_view to_string(Role role);
std::string_view to_string(BackendKind kind);

struct Message {
  Role role = Role::User;
  std::string content;
};

struct ChatRequest {
  std::string model_id;  // empty = gateway default
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_output_tokens = 400;
  std::optional<int> seed;
};

struct Usage {
  long prompt_tokens = 0;
  long output_tokens = 0;
};

struct ChatResponse {
  std::string content;
  std::string model_id;
  Usage usage;
  BackendKind backend = BackendKind::Mock;
  bool refusal = false;  // set when the backend returned empty content
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;

  std::size_t dim() const { return values.size(); }
};

struct NliDistribution {
  double entailment = 0.0;
  double neutral = 0.0;
  double contradiction = 0.0;
};

// Canonical fingerprints. Field serialization is order-independent (sorted
// keys); the message sequence stays order-dependent.
std::string fingerprint_chat(const ChatRequest& req);
std::string fingerprint_embedding(const std::string& model_id, const std::string& text);
std::string fingerprint_nli(const std::string& premise, const std::string& hypothesis);

struct CassetteMeta {
  std::string created_at;
  std::vector<std::string> model_ids;
};

struct Cassette {
  std::map<std::string, nlohmann::json> entries;  // fingerprint -> response
  CassetteMeta metadata;
};

Cassette load_cassette(const std::filesystem::path& path);
void save_cassette(const Cassette& cassette, const std::filesystem::path& path);

struct MockRule {
  std::string match;  // substring of the concatenated message contents
  std::string reply;  // "{hash}" expands to a short request digest
};

struct MockScript {
  std::vector<MockRule> chat_rules;
  std::string default_reply = "OK. {hash}";
  std::vector<std::string> vocabulary;  // empty = hashed term frequencies
  std::size_t hashed_dim = 256;
  std::optional<NliDistribution> fixed_nli;

  static MockScript builtin();
  static MockScript load(const std::filesystem::path& path);
};

struct GatewayConfig {
  BackendKind mode = BackendKind::Mock;
  std::string chat_model = "mock-chat";
  std::string embed_model = "mock-embed";
  std::string endpoint_url;  // live: scheme://host[:port][/base-path]
  std::string nli_url;       // live NLI scorer; empty = unavailable
  std::string credential_env = "THOUGHTBENCH_API_KEY";
  std::string cassette_path;  // replay source
  bool record = false;
  int max_attempts = 3;
  int in_flight_limit = 4;
  MockScript mock;
};

struct GatewayStats {
  long backend_calls = 0;
  long cache_hits = 0;
};

class Gateway {
 public:
  explicit Gateway(GatewayConfig config);

  ChatResponse chat(const ChatRequest& req);
  EmbeddingVector embed(const std::string& text);
  NliDistribution nli(const std::string& premise, const std::string& hypothesis);

  void start_recording();
  Cassette stop_recording();
  bool recording() const;

  GatewayStats stats() const;
  const GatewayConfig& config() const { return config_; }
  const CassetteMeta& replay_metadata() const { return replay_meta_; }

 private:
  nlohmann::json serve(const std::string& fingerprint,
                       const std::function<nlohmann::json()>& backend_call);
  nlohmann::json live_post(const std::string& url, const nlohmann::json& body);

  GatewayConfig config_;
  CassetteMeta replay_meta_;

  mutable std::mutex mutex_;
  std::map<std::string, nlohmann::json> cache_;
  bool recording_ = false;
  Cassette recording_cassette_;
  GatewayStats stats_;

  // Bounds concurrent live HTTP requests to config_.in_flight_limit.
  std::mutex flight_mutex_;
  std::condition_variable flight_cv_;
  int in_flight_ = 0;
};

// Runs `body` with recording enabled, then writes the captured cassette
// atomically to `path`.
Cassette record_cassette(Gateway& gateway, const std::function<void()>& body,
                         const std::filesystem::path& path);

}  // namespace thoughtbench::gateway
