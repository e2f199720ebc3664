#pragma once
// Versioned prompt template catalog. Templates ship built in and can be
// overridden from a directory of <name>.txt files; placeholders are literal
// <angle-bracket> names replaced verbatim at render time.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace thoughtbench::prompts {

// Marker rendered into a section whose stage is disabled or produced nothing.
inline constexpr std::string_view kEmptySection = "(none)";

struct Template {
  std::string name;
  std::string version;
  std::string text;
};

class PromptCatalog {
 public:
  static PromptCatalog builtin();

  // Loads <name>.txt overrides from dir (falling back to built-ins for names
  // not present); an optional VERSION file tags the overrides.
  static PromptCatalog from_dir(const std::filesystem::path& dir);

  const Template& get(std::string_view name) const;

  static std::string render(
      const Template& tmpl,
      const std::vector<std::pair<std::string, std::string>>& substitutions);

  const std::vector<Template>& all() const { return templates_; }

 private:
  std::vector<Template> templates_;
};

// Catalog template names.
inline constexpr std::string_view kCharacterIdentification = "character_identification";
inline constexpr std::string_view kThoughtExtraction = "thought_extraction";
inline constexpr std::string_view kGoldGeneration = "gold_generation";
inline constexpr std::string_view kMotivationAnalysis = "motivation_analysis";
inline constexpr std::string_view kMemoryRecall = "memory_recall";
inline constexpr std::string_view kReactionPrediction = "reaction_prediction";
inline constexpr std::string_view kReflection = "reflection";
inline constexpr std::string_view kThoughtPointLocation = "thought_point_location";
inline constexpr std::string_view kSilverGeneration = "silver_generation";
inline constexpr std::string_view kJudgeGold = "judge_gold";
inline constexpr std::string_view kJudgeSilver = "judge_silver";
inline constexpr std::string_view kMultipleChoice = "multiple_choice";

}  // namespace thoughtbench::prompts
