#include "thoughtbench/thoughtgen.hpp"

#include "thoughtbench/common.hpp"
#include "thoughtbench/jsonutil.hpp"
#include "thoughtbench/tokenizer.hpp"

#include <algorithm>

namespace thoughtbench::thoughtgen {

using nlohmann::json;

std::string_view to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::ZeroShot: return "zero_shot";
    case MethodKind::RetrievalBased: return "retrieval";
    case MethodKind::LongContext: return "long_context";
    case MethodKind::Mirror: return "mirror";
  }
  return "zero_shot";
}

MethodKind method_kind_from_string(std::string_view s) {
  if (s == "zero_shot") return MethodKind::ZeroShot;
  if (s == "retrieval") return MethodKind::RetrievalBased;
  if (s == "long_context") return MethodKind::LongContext;
  if (s == "mirror") return MethodKind::Mirror;
  raise("ConfigError", "unknown method '" + std::string(s) + "'");
}

std::string method_label(const ProfilingMethod& method) {
  return method.label.empty() ? std::string(to_string(method.kind)) : method.label;
}

std::string base_profile_text(const corpus::CharacterProfile& profile) {
  std::string intro =
      profile.introduction.empty() ? "(no introduction available)" : profile.introduction;
  return "Name: " + profile.name + "\nIntroduction: " + intro;
}

std::string render_memory_sections(
    const std::vector<std::pair<RecalledEvent, const memindex::MemoryChunk*>>& memories) {
  if (memories.empty()) return std::string(prompts::kEmptySection);
  std::string out;
  for (const auto& [event, chunk] : memories) {
    out += "- memory: " + event.description + "\n";
    out += "  relevance: " + event.relevance_note + "\n";
    out += "  retrieved: ";
    out += chunk ? chunk->text : "(no chunk retrieved)";
    out += "\n";
  }
  return out;
}

std::string render_prediction_sections(const std::vector<TomPrediction>& predictions) {
  if (predictions.empty()) return std::string(prompts::kEmptySection);
  std::string out;
  for (const TomPrediction& p : predictions) {
    out += "- object: " + p.object_name + "\n";
    out += "  relationship: " + p.relationship + "\n";
    out += "  predicted_reaction: " + p.predicted_reaction + "\n";
  }
  return out;
}

gateway::ChatResponse ThoughtGenerator::chat_stage(const std::string& stage,
                                                   const std::string& prompt,
                                                   int max_output_tokens,
                                                   ThoughtTrace* trace) {
  gateway::ChatRequest req;
  req.messages.push_back({gateway::Role::User, prompt});
  req.max_output_tokens = max_output_tokens;
  req.model_id = gw_.config().chat_model;
  req.seed = 0;
  if (trace) {
    trace->prompt_log.push_back({stage, gateway::fingerprint_chat(req)});
  }
  return gw_.chat(req);
}

gateway::EmbeddingVector ThoughtGenerator::embed_logged(const std::string& stage,
                                                        const std::string& text,
                                                        ThoughtTrace* trace) {
  if (trace) {
    trace->prompt_log.push_back(
        {stage, gateway::fingerprint_embedding(gw_.config().embed_model, text)});
  }
  return gw_.embed(text);
}

std::vector<RecalledEvent> ThoughtGenerator::recall_events(
    const corpus::CharacterProfile& profile, const std::string& scenario,
    ThoughtTrace* trace) {
  const std::string stage = "memory_recall";
  std::string prompt = prompts::PromptCatalog::render(
      catalog_.get(prompts::kMemoryRecall),
      {{"<profile>", base_profile_text(profile)}, {"<scenario>", scenario}});
  gateway::ChatResponse resp = chat_stage(stage, prompt, 800, trace);
  json j = jsonutil::parse_with_repair(resp.content, stage);
  const json& memories = jsonutil::require_array(j, "memories", stage);
  std::vector<RecalledEvent> events;
  for (const auto& m : memories) {
    RecalledEvent event;
    event.description = jsonutil::require_string(m, "memory", stage);
    event.relevance_note = jsonutil::require_string(m, "relevance", stage);
    if (event.description.empty()) {
      raise("StageParseFailure", stage + ": empty memory description");
    }
    events.push_back(std::move(event));
  }
  return events;
}

std::vector<TomPrediction> ThoughtGenerator::predict_tom(
    const corpus::CharacterProfile& profile, const std::string& scenario,
    ThoughtTrace* trace) {
  const std::string stage = "reaction_prediction";
  std::string prompt = prompts::PromptCatalog::render(
      catalog_.get(prompts::kReactionPrediction),
      {{"<profile>", base_profile_text(profile)}, {"<scenario>", scenario}});
  gateway::ChatResponse resp = chat_stage(stage, prompt, 800, trace);
  json j = jsonutil::parse_with_repair(resp.content, stage);
  const json& objects = jsonutil::require_array(j, "objects", stage);
  std::vector<TomPrediction> predictions;
  for (const auto& o : objects) {
    TomPrediction p;
    p.object_name = jsonutil::require_string(o, "object", stage);
    p.relationship = jsonutil::require_string(o, "relationship", stage);
    p.predicted_reaction = jsonutil::require_string(o, "predicted_reaction", stage);
    if (p.object_name.empty() || p.relationship.empty() || p.predicted_reaction.empty()) {
      raise("StageParseFailure", stage + ": empty prediction field");
    }
    predictions.push_back(std::move(p));
  }
  return predictions;
}

std::pair<std::string, std::string> ThoughtGenerator::reflect_summarize(
    const corpus::CharacterProfile& profile, const std::string& scenario,
    const std::vector<std::pair<RecalledEvent, const memindex::MemoryChunk*>>& memories,
    const std::vector<TomPrediction>& predictions, ThoughtTrace* trace) {
  const std::string stage = "reflection";
  std::string prompt = prompts::PromptCatalog::render(
      catalog_.get(prompts::kReflection),
      {{"<profile>", base_profile_text(profile)},
       {"<scenario>", scenario},
       {"<memories>", render_memory_sections(memories)},
       {"<predictions>", render_prediction_sections(predictions)}});
  gateway::ChatResponse resp = chat_stage(stage, prompt, 800, trace);
  json j = jsonutil::parse_with_repair(resp.content, stage);
  std::string thought = jsonutil::require_string(j, "inner_thoughts", stage);
  if (thought.empty()) {
    raise("EmptyThought", stage + ": inner_thoughts is empty");
  }
  return {resp.content, thought};
}

namespace {

std::string chunk_block(const std::vector<RetrievedChunk>& chunks) {
  std::string out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    out += "[Memory " + std::to_string(i + 1) + "]\n" + chunks[i].chunk.text + "\n";
  }
  return out;
}

}  // namespace

ThoughtTrace ThoughtGenerator::generate(const GenerationInput& input) {
  if (!input.profile || !input.item) {
    raise("InvalidArgument", "generation requires a profile and an item");
  }
  const corpus::CharacterProfile& profile = *input.profile;
  const corpus::BenchmarkItem& item = *input.item;
  const MethodParams& params = input.method.params;

  ThoughtTrace trace;
  trace.item_id = item.id;
  trace.method = input.method;

  std::string profile_text = base_profile_text(profile);

  auto final_generation = [&](const std::string& rendered_profile) -> std::string {
    std::string prompt;
    if (item.set_kind == corpus::SetKind::Gold) {
      prompt = prompts::PromptCatalog::render(
          catalog_.get(prompts::kGoldGeneration),
          {{"<profile>", rendered_profile},
           {"<context>", item.scenario},
           {"<text with [MASK] indicating the thought position>",
            item.masked_text.value_or(item.scenario + " [MASK]")}});
    } else {
      prompt = prompts::PromptCatalog::render(
          catalog_.get(prompts::kSilverGeneration),
          {{"<profile>", rendered_profile}, {"<context>", item.scenario}});
    }
    gateway::ChatResponse resp =
        chat_stage("thought_generation", prompt, params.max_output_tokens, &trace);
    if (resp.content.empty()) {
      raise("EmptyThought", "thought_generation returned empty content");
    }
    return resp.content;
  };

  switch (input.method.kind) {
    case MethodKind::ZeroShot: {
      trace.final_thought = final_generation(profile_text);
      break;
    }
    case MethodKind::RetrievalBased: {
      if (!input.index) {
        raise("MissingIndex", "retrieval method requires a memory index");
      }
      bool found = false;
      memindex::MemoryIndex restricted =
          input.index->restricted_before(item.chapter_ref, &found);
      if (!found) {
        trace.notes.push_back("chapter_ref '" + item.chapter_ref +
                              "' not in index; retrieval unrestricted");
      }
      std::vector<RetrievedChunk> retrieved;
      if (!restricted.chunks.empty()) {
        std::string query = last_n_tokens(item.scenario, params.retrieval_query_tokens);
        gateway::EmbeddingVector qvec = embed_logged("embed:scenario_query", query, &trace);
        for (const auto& scored :
             memindex::retrieve_top_k(qvec, restricted, params.retrieval_k)) {
          retrieved.push_back({-1, scored.chunk, scored.score});
        }
      } else {
        trace.notes.push_back("no eligible memory chunks before the scenario chapter");
      }
      std::string augmented = profile_text;
      augmented += "\n\nRelevant memories:\n";
      augmented += retrieved.empty() ? std::string(prompts::kEmptySection)
                                     : chunk_block(retrieved);
      trace.retrieved_chunks = std::move(retrieved);
      trace.final_thought = final_generation(augmented);
      break;
    }
    case MethodKind::LongContext: {
      std::string prefix;
      if (input.chapters) {
        std::optional<int> scenario_seq;
        for (const corpus::Chapter& ch : *input.chapters) {
          if (ch.id == item.chapter_ref) scenario_seq = ch.sequence_index;
        }
        if (!scenario_seq) {
          trace.notes.push_back("chapter_ref '" + item.chapter_ref +
                                "' not found; long-context prefix uses all POV chapters");
        }
        for (const corpus::Chapter& ch : *input.chapters) {
          if (!scenario_seq || ch.sequence_index < *scenario_seq) prefix += ch.text;
        }
      }
      const std::size_t scenario_tokens = count_tokens(item.scenario);
      const std::size_t reserve = 600;  // template text + generation headroom
      if (scenario_tokens + reserve > params.max_context_tokens) {
        raise("ContextOverflow",
              "scenario of " + std::to_string(scenario_tokens) +
                  " tokens exceeds the context window even with an empty prefix");
      }
      const std::size_t budget = params.max_context_tokens - scenario_tokens - reserve;
      auto [kept, truncated] = truncate_front_to_tokens(prefix, budget);
      if (truncated) {
        trace.notes.push_back("long-context prefix truncated from the front to " +
                              std::to_string(budget) + " tokens");
      }
      std::string augmented = profile_text + "\n\nPoint-of-view memory:\n";
      augmented += kept.empty() ? "(no earlier point-of-view chapters)" : kept;
      trace.final_thought = final_generation(augmented);
      break;
    }
    case MethodKind::Mirror: {
      const MirrorSwitches& sw = params.switches;
      std::vector<std::pair<RecalledEvent, const memindex::MemoryChunk*>> memory_pairs;
      std::vector<RetrievedChunk> retrieved;

      if (sw.memory) {
        if (!input.index) {
          raise("MissingIndex", "mirror memory stage requires a memory index");
        }
        std::vector<RecalledEvent> events = recall_events(profile, item.scenario, &trace);
        bool found = false;
        memindex::MemoryIndex restricted =
            input.index->restricted_before(item.chapter_ref, &found);
        if (!found) {
          trace.notes.push_back("chapter_ref '" + item.chapter_ref +
                                "' not in index; retrieval unrestricted");
        }
        if (restricted.chunks.empty() && !events.empty()) {
          trace.notes.push_back("no eligible memory chunks before the scenario chapter");
        }
        for (std::size_t i = 0; i < events.size(); ++i) {
          if (restricted.chunks.empty()) continue;
          gateway::EmbeddingVector qvec = embed_logged(
              "embed:event_" + std::to_string(i), events[i].description, &trace);
          auto scored = memindex::retrieve_top_k(qvec, restricted, params.per_event_k);
          for (const auto& sc : scored) {
            retrieved.push_back({static_cast<int>(i), sc.chunk, sc.score});
          }
        }
        trace.recalled_events = std::move(events);
        trace.retrieved_chunks = retrieved;
        // Pair each event with its retrieved chunks for the reflection stage;
        // events with none still appear, marked as such.
        const auto& recalled = *trace.recalled_events;
        const auto& kept = *trace.retrieved_chunks;
        for (std::size_t i = 0; i < recalled.size(); ++i) {
          bool any = false;
          for (const RetrievedChunk& rc : kept) {
            if (rc.event_index == static_cast<int>(i)) {
              memory_pairs.emplace_back(recalled[i], &rc.chunk);
              any = true;
            }
          }
          if (!any) memory_pairs.emplace_back(recalled[i], nullptr);
        }
      }

      std::vector<TomPrediction> predictions;
      if (sw.tom) {
        predictions = predict_tom(profile, item.scenario, &trace);
        trace.tom_predictions = predictions;
      }

      if (sw.summary) {
        auto [notes, thought] =
            reflect_summarize(profile, item.scenario, memory_pairs, predictions, &trace);
        trace.reflection_notes = std::move(notes);
        trace.final_thought = std::move(thought);
      } else {
        std::string augmented = profile_text;
        if (sw.memory) {
          augmented += "\n\nRecalled memories:\n" + render_memory_sections(memory_pairs);
        }
        if (sw.tom) {
          augmented +=
              "\n\nPredicted reactions:\n" + render_prediction_sections(predictions);
        }
        trace.final_thought = final_generation(augmented);
      }
      break;
    }
  }

  if (trace.final_thought.empty()) {
    raise("EmptyThought", "trace for item " + item.id + " has no final thought");
  }
  return trace;
}

json trace_to_json(const ThoughtTrace& trace) {
  json j;
  j["item_id"] = trace.item_id;
  json method;
  method["kind"] = std::string(to_string(trace.method.kind));
  method["label"] = method_label(trace.method);
  method["params"] = {
      {"retrieval_k", trace.method.params.retrieval_k},
      {"retrieval_query_tokens", trace.method.params.retrieval_query_tokens},
      {"per_event_k", trace.method.params.per_event_k},
      {"max_context_tokens", trace.method.params.max_context_tokens},
      {"max_output_tokens", trace.method.params.max_output_tokens},
      {"switches",
       {{"memory", trace.method.params.switches.memory},
        {"tom", trace.method.params.switches.tom},
        {"summary", trace.method.params.switches.summary}}}};
  j["method"] = method;
  if (trace.recalled_events) {
    json events = json::array();
    for (const RecalledEvent& e : *trace.recalled_events) {
      events.push_back({{"memory", e.description}, {"relevance", e.relevance_note}});
    }
    j["recalled_events"] = events;
  }
  if (trace.retrieved_chunks) {
    json chunks = json::array();
    for (const RetrievedChunk& rc : *trace.retrieved_chunks) {
      chunks.push_back({{"event_index", rc.event_index},
                        {"chunk_id", rc.chunk.chunk_id},
                        {"text", rc.chunk.text},
                        {"score", rc.score},
                        {"span",
                         {{"chapter_id", rc.chunk.span.chapter_id},
                          {"start_token", rc.chunk.span.start_token},
                          {"end_token", rc.chunk.span.end_token}}}});
    }
    j["retrieved_chunks"] = chunks;
  }
  if (trace.tom_predictions) {
    json preds = json::array();
    for (const TomPrediction& p : *trace.tom_predictions) {
      preds.push_back({{"object", p.object_name},
                       {"relationship", p.relationship},
                       {"predicted_reaction", p.predicted_reaction}});
    }
    j["tom_predictions"] = preds;
  }
  if (trace.reflection_notes) j["reflection_notes"] = *trace.reflection_notes;
  j["final_thought"] = trace.final_thought;
  json log = json::array();
  for (const PromptLogEntry& e : trace.prompt_log) {
    log.push_back({{"stage", e.stage}, {"fingerprint", e.fingerprint}});
  }
  j["prompt_log"] = log;
  if (!trace.notes.empty()) j["notes"] = trace.notes;
  return j;
}

ThoughtTrace trace_from_json(const json& j) {
  ThoughtTrace trace;
  trace.item_id = j.at("item_id").get<std::string>();
  const json& method = j.at("method");
  trace.method.kind = method_kind_from_string(method.at("kind").get<std::string>());
  trace.method.label = method.value("label", "");
  const json& params = method.at("params");
  trace.method.params.retrieval_k = params.value("retrieval_k", std::size_t{3});
  trace.method.params.retrieval_query_tokens =
      params.value("retrieval_query_tokens", std::size_t{512});
  trace.method.params.per_event_k = params.value("per_event_k", std::size_t{1});
  trace.method.params.max_context_tokens =
      params.value("max_context_tokens", std::size_t{128000});
  trace.method.params.max_output_tokens = params.value("max_output_tokens", 400);
  if (params.contains("switches")) {
    trace.method.params.switches.memory = params["switches"].value("memory", true);
    trace.method.params.switches.tom = params["switches"].value("tom", true);
    trace.method.params.switches.summary = params["switches"].value("summary", true);
  }
  if (j.contains("recalled_events")) {
    std::vector<RecalledEvent> events;
    for (const auto& e : j["recalled_events"]) {
      events.push_back({e.at("memory").get<std::string>(),
                        e.at("relevance").get<std::string>()});
    }
    trace.recalled_events = std::move(events);
  }
  if (j.contains("retrieved_chunks")) {
    std::vector<RetrievedChunk> chunks;
    for (const auto& c : j["retrieved_chunks"]) {
      RetrievedChunk rc;
      rc.event_index = c.at("event_index").get<int>();
      rc.chunk.chunk_id = c.at("chunk_id").get<std::string>();
      rc.chunk.text = c.at("text").get<std::string>();
      rc.score = c.at("score").get<double>();
      rc.chunk.span.chapter_id = c.at("span").at("chapter_id").get<std::string>();
      rc.chunk.span.start_token = c.at("span").at("start_token").get<std::size_t>();
      rc.chunk.span.end_token = c.at("span").at("end_token").get<std::size_t>();
      chunks.push_back(std::move(rc));
    }
    trace.retrieved_chunks = std::move(chunks);
  }
  if (j.contains("tom_predictions")) {
    std::vector<TomPrediction> preds;
    for (const auto& p : j["tom_predictions"]) {
      preds.push_back({p.at("object").get<std::string>(),
                       p.at("relationship").get<std::string>(),
                       p.at("predicted_reaction").get<std::string>()});
    }
    trace.tom_predictions = std::move(preds);
  }
  if (j.contains("reflection_notes")) {
    trace.reflection_notes = j["reflection_notes"].get<std::string>();
  }
  trace.final_thought = j.at("final_thought").get<std::string>();
  if (j.contains("prompt_log")) {
    for (const auto& e : j["prompt_log"]) {
      trace.prompt_log.push_back({e.at("stage").get<std::string>(),
                                  e.at("fingerprint").get<std::string>()});
    }
  }
  if (j.contains("notes")) {
    for (const auto& n : j["notes"]) trace.notes.push_back(n.get<std::string>());
  }
  return trace;
}

}  // namespace thoughtbench::thoughtgen
