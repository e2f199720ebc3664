#include "thoughtbench/gateway.hpp"

#include "thoughtbench/common.hpp"
#include "thoughtbench/tokenizer.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>

namespace thoughtbench::gateway {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Live: return "live";
    case BackendKind::Replay: return "replay";
    case BackendKind::Mock: return "mock";
  }
  return "mock";
}

namespace {

void validate_request(const ChatRequest& req) {
  if (req.messages.empty()) {
    raise("InvalidRequest", "chat request has no messages");
  }
  if (req.messages.back().role != Role::User) {
    raise("InvalidRequest", "last message must have role user");
  }
  if (req.temperature < 0.0) {
    raise("InvalidRequest", "temperature must be >= 0");
  }
  if (req.max_output_tokens <= 0) {
    raise("InvalidRequest", "max_output_tokens must be > 0");
  }
}

json canonical_chat(const ChatRequest& req) {
  json messages = json::array();
  for (const Message& m : req.messages) {
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  json j;
  j["kind"] = "chat";
  j["model"] = req.model_id;
  j["temperature"] = req.temperature;
  j["max_output_tokens"] = req.max_output_tokens;
  j["seed"] = req.seed ? json(*req.seed) : json(nullptr);
  j["messages"] = messages;
  return j;
}

std::string concat_contents(const ChatRequest& req) {
  std::string all;
  for (const Message& m : req.messages) {
    if (!all.empty()) all += '\n';
    all += m.content;
  }
  return all;
}

std::string expand_placeholders(std::string reply, const std::string& prompt) {
  const std::string token = "{hash}";
  const std::string digest = short_digest(prompt);
  std::size_t pos = 0;
  while ((pos = reply.find(token, pos)) != std::string::npos) {
    reply.replace(pos, token.size(), digest);
    pos += digest.size();
  }
  return reply;
}

json chat_response_json(const std::string& content, const std::string& model_id,
                        long prompt_tokens, long output_tokens) {
  json j;
  j["kind"] = "chat";
  j["content"] = content;
  j["model_id"] = model_id;
  j["usage"] = {{"prompt_tokens", prompt_tokens}, {"output_tokens", output_tokens}};
  return j;
}

}  // namespace

std::string fingerprint_chat(const ChatRequest& req) {
  return stable_digest(canonical_chat(req).dump());
}

std::string fingerprint_embedding(const std::string& model_id, const std::string& text) {
  json j;
  j["kind"] = "embedding";
  j["model"] = model_id;
  j["text"] = text;
  return stable_digest(j.dump());
}

std::string fingerprint_nli(const std::string& premise, const std::string& hypothesis) {
  json j;
  j["kind"] = "nli";
  j["premise"] = premise;
  j["hypothesis"] = hypothesis;
  return stable_digest(j.dump());
}

Cassette load_cassette(const std::filesystem::path& path) {
  Cassette cassette;
  if (!std::filesystem::exists(path)) {
    raise("IoError", "cassette not found: " + path.string());
  }
  for (const std::string& line : split_lines(read_file(path))) {
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      raise("IoError", "cassette " + path.string() + " has an invalid line");
    }
    if (j.contains("meta")) {
      cassette.metadata.created_at = j["meta"].value("created_at", "");
      if (j["meta"].contains("model_ids")) {
        for (const auto& m : j["meta"]["model_ids"]) {
          cassette.metadata.model_ids.push_back(m.get<std::string>());
        }
      }
      continue;
    }
    if (!j.contains("fingerprint") || !j.contains("response")) {
      raise("IoError", "cassette " + path.string() + " has a malformed entry");
    }
    cassette.entries[j["fingerprint"].get<std::string>()] = j["response"];
  }
  return cassette;
}

void save_cassette(const Cassette& cassette, const std::filesystem::path& path) {
  std::ostringstream out;
  json meta;
  meta["meta"] = {{"created_at", cassette.metadata.created_at},
                  {"model_ids", cassette.metadata.model_ids}};
  out << meta.dump() << '\n';
  for (const auto& [fp, response] : cassette.entries) {
    json line;
    line["fingerprint"] = fp;
    line["response"] = response;
    out << line.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

MockScript MockScript::builtin() {
  MockScript script;
  script.chat_rules = {
      {"recall all memories that are relevant",
       R"({"memories": [{"memory": "A hard lesson learned long ago ({hash}).", "relevance": "It echoes the pressures of the current scene."}, {"memory": "A promise made to someone trusted ({hash}).", "relevance": "The promise bears directly on the choice at hand."}]})"},
      {"might react to your potential actions",
       R"({"objects": [{"object": "A trusted companion", "relationship": "close ally", "predicted_reaction": "Would urge caution but stand by the decision ({hash})."}, {"object": "The surrounding order", "relationship": "institution the character serves", "predicted_reaction": "Would enforce its rules without sentiment ({hash})."}]})"},
      {"reflect on the recalled memories",
       R"({"character": "the character", "inner_thoughts": "I weigh what I remember against what I owe. The lesson from before warns me, yet the promise binds me still. Whatever comes of this, I choose with open eyes ({hash})."})"},
      {"generate the masked thoughts",
       "I know what this moment asks of me. Every path carries its cost, and I have "
       "counted them all before. I will act as I must and carry the weight of it ({hash})."},
      {"Generate your detailed thoughts at this specific moment",
       "So it comes to this at last. I remember how it began, and I can see how it "
       "must end. My mind is set, though my hands are not steady ({hash})."},
      {"compared to the reference thoughts",
       "Score: 4. The generated thought covers the reference elements and keeps the "
       "character's voice ({hash})."},
      {"based on character motivations and context",
       "Score: 3. Basic alignment with the character's documented motivations ({hash})."},
      {"analyze the important characters", R"({"characters": []})"},
      {"Extract the thoughts of character", R"({"ta_pairs": []})"},
      {"Answer with the letter of the single best choice", "The answer is (B)."},
  };
  return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    raise("IoError", "mock script " + path.string() + " is not a JSON object");
  }
  MockScript script;
  if (j.contains("chat_rules")) {
    for (const auto& r : j["chat_rules"]) {
      script.chat_rules.push_back(
          {r.at("match").get<std::string>(), r.at("reply").get<std::string>()});
    }
  }
  script.default_reply = j.value("default_reply", script.default_reply);
  if (j.contains("embedding")) {
    const auto& e = j["embedding"];
    if (e.contains("vocabulary")) {
      for (const auto& v : e["vocabulary"]) {
        script.vocabulary.push_back(v.get<std::string>());
      }
    }
    script.hashed_dim = e.value("hashed_dim", script.hashed_dim);
  }
  if (j.contains("nli")) {
    NliDistribution d;
    d.entailment = j["nli"].value("entailment", 0.0);
    d.neutral = j["nli"].value("neutral", 0.0);
    d.contradiction = j["nli"].value("contradiction", 0.0);
    script.fixed_nli = d;
  }
  return script;
}

Gateway::Gateway(GatewayConfig config) : config_(std::move(config)) {
  if (config_.mode == BackendKind::Replay) {
    if (config_.cassette_path.empty()) {
      raise("ConfigError", "replay mode requires a cassette path");
    }
    Cassette cassette = load_cassette(config_.cassette_path);
    cache_ = std::move(cassette.entries);
    replay_meta_ = std::move(cassette.metadata);
  }
}

json Gateway::serve(const std::string& fingerprint,
                    const std::function<json()>& backend_call) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(fingerprint);
    if (it != cache_.end()) {
      ++stats_.cache_hits;
      if (recording_) recording_cassette_.entries[fingerprint] = it->second;
      return it->second;
    }
  }
  if (config_.mode == BackendKind::Replay) {
    raise("ReplayMiss", "no cassette entry for fingerprint " + fingerprint);
  }
  json response = backend_call();
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++stats_.backend_calls;
    cache_[fingerprint] = response;
    if (recording_) recording_cassette_.entries[fingerprint] = response;
  }
  return response;
}

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // leading slash, possibly empty
};

ParsedUrl parse_url(const std::string& url) {
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    raise("ConfigError", "endpoint URL must include a scheme: " + url);
  }
  std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

json Gateway::live_post(const std::string& url, const json& body) {
  const int limit = std::max(1, config_.in_flight_limit);
  auto acquire = [&] {
    std::unique_lock<std::mutex> lock(flight_mutex_);
    flight_cv_.wait(lock, [&] { return in_flight_ < limit; });
    ++in_flight_;
  };
  auto release = [&] {
    {
      std::lock_guard<std::mutex> lock(flight_mutex_);
      --in_flight_;
    }
    flight_cv_.notify_one();
  };

  ParsedUrl parsed = parse_url(url);
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.credential_env.c_str());
      key != nullptr && key[0] != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const int attempts = std::max(1, config_.max_attempts);
  int last_status = 0;
  std::string last_error = "connection failed";
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      auto delay = std::chrono::milliseconds(
          std::min<long>(2000, 200L * (1L << (attempt - 1))));
      std::this_thread::sleep_for(delay);
    }
    acquire();
    httplib::Client client(parsed.base);
    client.set_read_timeout(120, 0);
    client.set_connection_timeout(10, 0);
    auto result = client.Post(parsed.path.empty() ? "/" : parsed.path, headers,
                              body.dump(), "application/json");
    release();
    if (!result) {
      last_status = 0;
      last_error = httplib::to_string(result.error());
      continue;
    }
    last_status = result->status;
    if (result->status == 200) {
      json j = json::parse(result->body, nullptr, false);
      if (j.is_discarded()) {
        raise("TransportError", "endpoint returned invalid JSON");
      }
      return j;
    }
    if (result->status == 429 || result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    raise("TransportError", "HTTP " + std::to_string(result->status) + ": " + result->body);
  }
  if (last_status == 429) {
    raise("RateLimited", "rate limited after " + std::to_string(attempts) + " attempts");
  }
  raise("TransportError",
        last_error + " after " + std::to_string(attempts) + " attempts");
}

ChatResponse Gateway::chat(const ChatRequest& request) {
  ChatRequest req = request;
  if (req.model_id.empty()) req.model_id = config_.chat_model;
  validate_request(req);
  const std::string fp = fingerprint_chat(req);

  json response = serve(fp, [&]() -> json {
    if (config_.mode == BackendKind::Mock) {
      const std::string prompt = concat_contents(req);
      std::string reply = config_.mock.default_reply;
      for (const MockRule& rule : config_.mock.chat_rules) {
        if (prompt.find(rule.match) != std::string::npos) {
          reply = rule.reply;
          break;
        }
      }
      reply = expand_placeholders(reply, prompt);
      return chat_response_json(reply, req.model_id,
                                static_cast<long>(count_tokens(prompt)),
                                static_cast<long>(count_tokens(reply)));
    }
    // Live: OpenAI-compatible /chat/completions.
    json messages = json::array();
    for (const Message& m : req.messages) {
      messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    json body;
    body["model"] = req.model_id;
    body["messages"] = messages;
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_output_tokens;
    if (req.seed) body["seed"] = *req.seed;
    json reply = live_post(config_.endpoint_url + "/chat/completions", body);
    std::string content;
    try {
      content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      raise("TransportError", "chat reply missing choices[0].message.content");
    }
    long prompt_tokens = 0, output_tokens = 0;
    if (reply.contains("usage")) {
      prompt_tokens = reply["usage"].value("prompt_tokens", 0);
      output_tokens = reply["usage"].value("completion_tokens", 0);
    }
    return chat_response_json(content, reply.value("model", req.model_id), prompt_tokens,
                              output_tokens);
  });

  ChatResponse out;
  out.content = response.value("content", "");
  out.model_id = response.value("model_id", req.model_id);
  out.usage.prompt_tokens = response["usage"].value("prompt_tokens", 0L);
  out.usage.output_tokens = response["usage"].value("output_tokens", 0L);
  out.backend = config_.mode;
  out.refusal = out.content.empty();
  return out;
}

EmbeddingVector Gateway::embed(const std::string& text) {
  if (text.empty()) {
    raise("InvalidRequest", "embed requires non-empty text");
  }
  const std::string fp = fingerprint_embedding(config_.embed_model, text);

  json response = serve(fp, [&]() -> json {
    json j;
    j["kind"] = "embedding";
    j["model_id"] = config_.embed_model;
    if (config_.mode == BackendKind::Mock) {
      std::vector<std::string> tokens = word_tokens_lower(text);
      std::vector<double> values;
      if (!config_.mock.vocabulary.empty()) {
        values.assign(config_.mock.vocabulary.size(), 0.0);
        for (const std::string& t : tokens) {
          auto it = std::find(config_.mock.vocabulary.begin(),
                              config_.mock.vocabulary.end(), t);
          if (it != config_.mock.vocabulary.end()) {
            values[static_cast<std::size_t>(it - config_.mock.vocabulary.begin())] += 1.0;
          }
        }
      } else {
        values.assign(std::max<std::size_t>(1, config_.mock.hashed_dim), 0.0);
        for (const std::string& t : tokens) {
          values[fnv1a64(t) % values.size()] += 1.0;
        }
      }
      j["values"] = values;
      return j;
    }
    json body;
    body["model"] = config_.embed_model;
    body["input"] = text;
    json reply = live_post(config_.endpoint_url + "/embeddings", body);
    std::vector<double> values;
    try {
      for (const auto& v : reply.at("data").at(0).at("embedding")) {
        values.push_back(v.get<double>());
      }
    } catch (const json::exception&) {
      raise("TransportError", "embedding reply missing data[0].embedding");
    }
    j["values"] = values;
    return j;
  });

  EmbeddingVector vec;
  vec.model_id = response.value("model_id", config_.embed_model);
  for (const auto& v : response["values"]) vec.values.push_back(v.get<double>());
  if (vec.values.empty()) {
    raise("TransportError", "embedding has zero dimensions");
  }
  for (double v : vec.values) {
    if (!std::isfinite(v)) raise("TransportError", "embedding has non-finite values");
  }
  return vec;
}

NliDistribution Gateway::nli(const std::string& premise, const std::string& hypothesis) {
  if (config_.mode == BackendKind::Live && config_.nli_url.empty()) {
    raise("ScorerUnavailable", "no NLI scorer endpoint configured");
  }
  const std::string fp = fingerprint_nli(premise, hypothesis);

  json response = serve(fp, [&]() -> json {
    json j;
    j["kind"] = "nli";
    if (config_.mode == BackendKind::Mock) {
      NliDistribution d;
      if (config_.mock.fixed_nli) {
        d = *config_.mock.fixed_nli;
      } else {
        // Unigram-overlap heuristic, kept strictly inside (0, 1).
        std::vector<std::string> p = word_tokens_lower(premise);
        std::vector<std::string> h = word_tokens_lower(hypothesis);
        std::set<std::string> pset(p.begin(), p.end());
        std::size_t hit = 0;
        for (const std::string& t : h) {
          if (pset.count(t)) ++hit;
        }
        double overlap = h.empty() ? 0.0 : static_cast<double>(hit) / h.size();
        d.entailment = 0.1 + 0.8 * overlap;
        d.contradiction = (1.0 - d.entailment) * 0.25;
        d.neutral = 1.0 - d.entailment - d.contradiction;
      }
      j["entailment"] = d.entailment;
      j["neutral"] = d.neutral;
      j["contradiction"] = d.contradiction;
      return j;
    }
    json body;
    body["premise"] = premise;
    body["hypothesis"] = hypothesis;
    json reply = live_post(config_.nli_url, body);
    j["entailment"] = reply.value("entailment", -1.0);
    j["neutral"] = reply.value("neutral", -1.0);
    j["contradiction"] = reply.value("contradiction", -1.0);
    return j;
  });

  NliDistribution d;
  d.entailment = response.value("entailment", -1.0);
  d.neutral = response.value("neutral", -1.0);
  d.contradiction = response.value("contradiction", -1.0);
  return d;
}

void Gateway::start_recording() {
  std::lock_guard<std::mutex> lock(mutex_);
  recording_ = true;
  recording_cassette_ = Cassette{};
  recording_cassette_.metadata.created_at = iso8601_utc_now();
  recording_cassette_.metadata.model_ids = {config_.chat_model, config_.embed_model};
}

Cassette Gateway::stop_recording() {
  std::lock_guard<std::mutex> lock(mutex_);
  recording_ = false;
  return std::move(recording_cassette_);
}

bool Gateway::recording() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return recording_;
}

GatewayStats Gateway::stats() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return stats_;
}

Cassette record_cassette(Gateway& gateway, const std::function<void()>& body,
                         const std::filesystem::path& path) {
  gateway.start_recording();
  body();
  Cassette cassette = gateway.stop_recording();
  save_cassette(cassette, path);
  return cassette;
}

}  // namespace thoughtbench::gateway
