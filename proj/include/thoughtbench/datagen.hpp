#pragma once
// Benchmark-item construction from chapters and analysis articles: character
// identification, verbatim thought extraction with machine pre-filters, gold
// item masking, motivation analysis, thought-point location, and a flat-file
// human review queue.

#include "thoughtbench/corpus.hpp"
#include "thoughtbench/gateway.hpp"
#include "thoughtbench/prompts.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace thoughtbench::datagen {

enum class CandidateStatus { Pending, Accepted, Rejected };

std::string_view to_string(CandidateStatus status);
CandidateStatus candidate_status_from_string(std::string_view s);

struct ThoughtCandidate {
  std::string candidate_id;
  std::string character;
  std::string thought;   // verbatim chapter substring for viable candidates
  std::string raw_text;  // surrounding original segment
  std::string reason;
  std::string chapter_ref;
  CandidateStatus status = CandidateStatus::Pending;
  std::optional<std::string> reject_rule;  // NotVerbatim, TooShort, NotUnique
};

struct Behavior {
  std::string action;
  std::vector<std::string> motivations;
};

struct MotivationRecord {
  std::string character;
  std::vector<Behavior> behaviors;  // non-empty, each with >= 1 motivation
  std::string source_article;
};

struct ThoughtPoint {
  std::string chapter_ref;
  std::string prefix;  // proper prefix of the chapter text
  std::string reason;
};

// Sentence counter used by the minimum-length pre-filter: number of terminal
// punctuation groups ([.!?]+).
std::size_t sentence_count(const std::string& text);

class DataBuilder {
 public:
  DataBuilder(gateway::Gateway& gw, const prompts::PromptCatalog& catalog)
      : gw_(gw), catalog_(catalog) {}

  // Deduplicated, order preserved.
  std::vector<std::string> identify_characters(const corpus::Chapter& chapter);

  // Non-verbatim, too-short, and ambiguous candidates come back Rejected with
  // the matching rule; the rest are Pending for human review.
  std::vector<ThoughtCandidate> extract_thoughts(const corpus::Chapter& chapter,
                                                 const std::string& character);

  MotivationRecord analyze_motivations(const std::string& article,
                                       const std::string& source_name);

  ThoughtPoint locate_thought_point(const MotivationRecord& motivation,
                                    const corpus::Chapter& chapter);

 private:
  gateway::ChatResponse ask(const std::string& prompt);

  gateway::Gateway& gw_;
  const prompts::PromptCatalog& catalog_;
};

// Requires an Accepted candidate whose thought occurs exactly once in the
// chapter. masked_text replaces the thought with the mask marker; scenario is
// the prefix before it (trailing whitespace trimmed); reference is the thought.
corpus::BenchmarkItem build_gold_item(const corpus::Chapter& chapter,
                                      const ThoughtCandidate& candidate);

corpus::BenchmarkItem build_silver_item(const corpus::Chapter& chapter,
                                        const MotivationRecord& motivation,
                                        std::size_t behavior_index,
                                        const ThoughtPoint& point);

void export_review_queue(const std::vector<ThoughtCandidate>& candidates,
                         const std::filesystem::path& path);

// Applies edited status lines back onto `candidates`. Throws
// UnknownCandidateId when the file names an id not in the list.
void import_review_decisions(const std::filesystem::path& path,
                             std::vector<ThoughtCandidate>& candidates);

void save_candidates(const std::vector<ThoughtCandidate>& candidates,
                     const std::filesystem::path& path);
std::vector<ThoughtCandidate> load_candidates(const std::filesystem::path& path);

}  // namespace thoughtbench::datagen
