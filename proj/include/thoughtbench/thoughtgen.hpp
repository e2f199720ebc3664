#pragma once
// Thought-trace generation for (profile, scenario) under four profiling
// methods:
//   zero_shot    - name + introduction, one generation call
//   retrieval    - top-k chunks for the scenario query appended to the profile
//   long_context - all earlier POV text, truncated from the front
//   mirror       - staged pipeline: event recall -> per-event chunk retrieval
//                  -> reaction prediction -> reflection & summarization, with
//                  a switch per stage
//
// Retrieval and the long-context prefix only ever see chapters strictly
// earlier than the item's chapter.

#include "thoughtbench/corpus.hpp"
#include "thoughtbench/gateway.hpp"
#include "thoughtbench/memindex.hpp"
#include "thoughtbench/prompts.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace thoughtbench::thoughtgen {

enum class MethodKind { ZeroShot, RetrievalBased, LongContext, Mirror };

std::string_view to_string(MethodKind kind);
MethodKind method_kind_from_string(std::string_view s);

struct MirrorSwitches {
  bool memory = true;
  bool tom = true;
  bool summary = true;
};

struct MethodParams {
  std::size_t retrieval_k = 3;              // retrieval method
  std::size_t retrieval_query_tokens = 512; // scenario suffix used as query
  std::size_t per_event_k = 1;              // mirror retrieval per event
  std::size_t max_context_tokens = 128000;  // long-context window
  int max_output_tokens = 400;
  MirrorSwitches switches;                  // mirror stages
};

struct ProfilingMethod {
  MethodKind kind = MethodKind::ZeroShot;
  MethodParams params;
  std::string label;  // report key; defaults to to_string(kind)
};

std::string method_label(const ProfilingMethod& method);

struct RecalledEvent {
  std::string description;
  std::string relevance_note;
};

struct TomPrediction {
  std::string object_name;
  std::string relationship;
  std::string predicted_reaction;
};

struct RetrievedChunk {
  int event_index = -1;  // -1 = scenario-as-query retrieval
  memindex::MemoryChunk chunk;
  double score = 0.0;
};

struct PromptLogEntry {
  std::string stage;
  std::string fingerprint;
};

struct ThoughtTrace {
  std::string item_id;
  ProfilingMethod method;
  std::optional<std::vector<RecalledEvent>> recalled_events;
  std::optional<std::vector<RetrievedChunk>> retrieved_chunks;
  std::optional<std::vector<TomPrediction>> tom_predictions;
  std::optional<std::string> reflection_notes;
  std::string final_thought;
  std::vector<PromptLogEntry> prompt_log;  // covers every backend call
  std::vector<std::string> notes;          // truncation, unresolved refs, ...
};

nlohmann::json trace_to_json(const ThoughtTrace& trace);
ThoughtTrace trace_from_json(const nlohmann::json& j);

std::string base_profile_text(const corpus::CharacterProfile& profile);

std::string render_memory_sections(
    const std::vector<std::pair<RecalledEvent, const memindex::MemoryChunk*>>& memories);
std::string render_prediction_sections(const std::vector<TomPrediction>& predictions);

struct GenerationInput {
  ProfilingMethod method;
  const corpus::CharacterProfile* profile = nullptr;  // required
  const corpus::BenchmarkItem* item = nullptr;        // required
  const memindex::MemoryIndex* index = nullptr;       // retrieval + mirror
  const std::vector<corpus::Chapter>* chapters = nullptr;  // long_context
};

class ThoughtGenerator {
 public:
  ThoughtGenerator(gateway::Gateway& gw, const prompts::PromptCatalog& catalog)
      : gw_(gw), catalog_(catalog) {}

  std::vector<RecalledEvent> recall_events(const corpus::CharacterProfile& profile,
                                           const std::string& scenario,
                                           ThoughtTrace* trace = nullptr);

  std::vector<TomPrediction> predict_tom(const corpus::CharacterProfile& profile,
                                         const std::string& scenario,
                                         ThoughtTrace* trace = nullptr);

  // Returns (reflection_notes, final_thought); the notes hold the raw stage
  // reply, which is where a backend's own chain-of-thought lands when exposed.
  std::pair<std::string, std::string> reflect_summarize(
      const corpus::CharacterProfile& profile, const std::string& scenario,
      const std::vector<std::pair<RecalledEvent, const memindex::MemoryChunk*>>& memories,
      const std::vector<TomPrediction>& predictions, ThoughtTrace* trace = nullptr);

  ThoughtTrace generate(const GenerationInput& input);

 private:
  gateway::ChatResponse chat_stage(const std::string& stage, const std::string& prompt,
                                   int max_output_tokens, ThoughtTrace* trace);
  gateway::EmbeddingVector embed_logged(const std::string& stage, const std::string& text,
                                        ThoughtTrace* trace);

  gateway::Gateway& gw_;
  const prompts::PromptCatalog& catalog_;
};

}  // namespace thoughtbench::thoughtgen
