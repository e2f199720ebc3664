#pragma once
// Scoring of generated thoughts against references: sentence-level BLEU-4 and
// ROUGE-L implemented natively, NLI entailment via a scorer backend, and
// rubric judging through a chat backend.
//
// BLEU variant: geometric mean of modified n-gram precisions n=1..4 with
// add-epsilon smoothing (epsilon 0.1 substituted for zero match counts; an
// order with no candidate n-grams scores epsilon/1), times brevity penalty
// exp(1 - r/c) when c < r. ROUGE-L: word-level LCS F-measure with beta = 1.
// Both lowercase their inputs and share the corpus word tokenizer.

#include "thoughtbench/corpus.hpp"
#include "thoughtbench/gateway.hpp"
#include "thoughtbench/prompts.hpp"

#include <optional>
#include <string>
#include <vector>

namespace thoughtbench::evalmetrics {

inline constexpr double kBleuEpsilon = 0.1;
inline constexpr const char* kBleuVariant =
    "sentence-bleu4 add-eps=0.1 lowercase whitespace-tokens";

double bleu(const std::string& candidate, const std::string& reference);
double rouge_l(const std::string& candidate, const std::string& reference);

enum class NliDirection { GeneratedToReference, ReferenceToGenerated };

struct NliOptions {
  NliDirection direction = NliDirection::GeneratedToReference;
  bool split_sentences = false;  // mean entailment over hypothesis sentences
};

// Entailment component of the scorer's 3-way distribution. Throws
// MalformedDistribution when the components do not sum to 1 +- 1e-3 or leave
// [0, 1]; ScorerUnavailable surfaces from the gateway.
double nli_entailment_pair(gateway::Gateway& gw, const std::string& premise,
                           const std::string& hypothesis);

// Direction-aware wrapper: default premise = generated, hypothesis = reference.
double nli_entailment(gateway::Gateway& gw, const std::string& generated,
                      const std::string& reference, const NliOptions& options = {});

struct JudgeInputs {
  corpus::SetKind set_kind = corpus::SetKind::Gold;
  std::string reference;  // gold
  std::string profile;    // silver
  std::string context;    // silver
  std::string generated;
};

struct JudgeResult {
  int score = 0;  // 1..5
  std::string rationale;
};

// First standalone digit 1-5 (neighbors non-alphanumeric) in the reply.
std::optional<int> parse_judge_score(const std::string& reply);

// One re-ask on an unparseable reply, then JudgeParseFailure.
JudgeResult llm_judge(gateway::Gateway& gw, const prompts::PromptCatalog& catalog,
                      const JudgeInputs& inputs);

struct EvalRecord {
  std::string item_id;
  std::string method;
  corpus::SetKind set_kind = corpus::SetKind::Gold;
  std::optional<double> bleu;
  std::optional<double> rouge_l;
  std::optional<double> nli_entailment;
  std::optional<int> judge_score;  // present iff a judge backend ran
  std::string judge_rationale;
  std::optional<long> thought_tokens;  // generated-thought length, for histograms
};

nlohmann::json record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const nlohmann::json& j);

struct AggregateRow {
  std::string method;
  corpus::SetKind set_kind = corpus::SetKind::Gold;
  std::size_t n = 0;
  std::optional<double> bleu;
  std::optional<double> rouge_l;
  std::optional<double> nli_entailment;
  std::optional<double> judge_score;
  bool best_bleu = false;
  bool best_rouge_l = false;
  bool best_nli = false;
  bool best_judge = false;
};

struct RunMeta {
  std::string chat_model;
  std::string embed_model;
  std::string config_hash;
  std::string generated_at;  // wall clock live; cassette timestamp on replay
  std::string bleu_variant = kBleuVariant;
  std::string nli_direction = "generated_to_reference";
};

struct RunError {
  std::string item_id;
  std::string method;
  std::string code;
  std::string message;
};

struct RunReport {
  std::vector<EvalRecord> records;
  std::vector<AggregateRow> aggregates;
  RunMeta meta;
  std::vector<RunError> errors;
};

// Per-(method, set) arithmetic means with the best value per column flagged.
// Throws EmptyRun on no records.
RunReport aggregate(std::vector<EvalRecord> records, RunMeta meta);

}  // namespace thoughtbench::evalmetrics
