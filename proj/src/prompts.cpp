#include "thoughtbench/prompts.hpp"

#include "thoughtbench/common.hpp"

namespace thoughtbench::prompts {

namespace {

constexpr const char* kBuiltinVersion = "v1";

constexpr const char* kCharacterIdentificationText =
    R"(Please analyze the important characters in the following text:
<text>

# Output Format:
Return the character list in JSON format as follows:
{"characters": ["character1", "character2", ...]}
)";

constexpr const char* kThoughtExtractionText =
    R"(Extract the thoughts of character <character> from the following text.

# Requirements:
1. Only return high-quality thought segments that reflect the character's internal mental process
2. Thoughts should be coherent and contain at least two sentences
3. Thoughts must be directly quoted from the original text, without any modification
4. Thoughts should be purely internal monologues, not:
    - Spoken dialogue
    - Physical actions
    - Narrative descriptions
    - External observations

# Output Format:
{
    "ta_pairs": [
        {
            "character": "character_name",
            "reason": "explanation for selecting this thought segment",
            "thought": "extracted thought content",
            "raw_text": "original text segment"
        }
    ]
}

# Input:
<text>
)";

constexpr const char* kGoldGenerationText =
    R"(Your task is to generate the masked thoughts of a character in the given scenario.

# Inputs:
1. Character Profile:
<profile>

2. Scenario Context:
<context>

3. Masked Thought Location:
<text with [MASK] indicating the thought position>

# Requirements:
1. Generate thoughts that are consistent with the character's personality and background
2. Ensure the thoughts fit naturally into the given context
3. Match the emotional state and decision-making process implied by the scenario
4. Maintain the character's perspective and knowledge at that specific moment

# Output:
Generate the content that should replace [MASK], representing the character's inner thoughts.
)";

constexpr const char* kMotivationAnalysisText =
    R"(Analyze the following fan-written character analysis article and extract structured information.

# Input:
<article>

# Requirements:
1. Identify the main character being analyzed
2. Extract specific behaviors or decisions mentioned in the article
3. For each behavior, identify the detailed motivations and reasoning behind it

# Output Format:
{
    "character": "character_name",
    "behaviors": [
        {
            "action": "specific behavior or decision",
            "motivations": [
                "detailed reason 1",
                "detailed reason 2",
                ...
            ]
        }
    ]
}
)";

constexpr const char* kMemoryRecallText =
    R"(As the character, recall all memories that are relevant to the current scenario.

# Inputs:
1. Character Profile:
<profile>

2. Current Scenario:
<scenario>

# Requirements:
1. Think as the character
2. Recall any past experiences, events, or knowledge related to this scenario
3. Consider both direct and indirect connections

# Output Format:
{
    "memories": [
        {"memory": "description of the memory",
        "relevance": "why this memory is relevant to current scenario"}
    ]
}
)";

constexpr const char* kReactionPredictionText =
    R"(As the character, analyze how other characters, groups, or environments might react to your potential actions in this scenario.

# Inputs:
1. Character Profile:
<profile>

2. Current Scenario:
<scenario>

# Requirements:
1. Identify relevant objects (characters, groups, environments)
2. Predict their possible reactions
3. Consider their perspectives and motivations

# Output Format:
{
    "objects": [
        {"object": "name or description",
        "relationship": "relationship with the character",
        "predicted_reaction": "how they might react and why"}
    ]
}
)";

constexpr const char* kReflectionText =
    R"(As the character, reflect on the recalled memories and predicted reactions to generate your inner thoughts.

# Inputs:
1. Character Profile:
<profile>

2. Current Scenario:
<scenario>

3. Recalled Memories:
<memories>

4. Theory of Mind Analysis:
<predictions>

# Requirements:
1. Remove any memories or predictions that are not directly relevant
2. Filter relevant information from remaining content
3. Organize thoughts in a coherent way
4. Ensure the thought process aligns with character's personality

# Output Format:
{
    "character": "character name",
    "inner_thoughts": "character's organized thought process"
}
)";

constexpr const char* kThoughtPointLocationText =
    R"(Locate the specific point in the chapter where the character's motivation might have manifested as internal thoughts.

# Inputs:
1. Character Motivation:
<motivation>

2. Chapter Content:
<chapter>

# Requirements:
1. Find the most appropriate point where the character might have had these thoughts
2. The point should be before the actual behavior or decision
3. The location should have sufficient context for understanding the situation

# Output Format:
{
    "thought_point": {
        "location": "text segment before the thought point",
        "reason": "explanation for choosing this point"
    }
}
)";

constexpr const char* kSilverGenerationText =
    R"(You are the character described in the profile. Generate your detailed thoughts at this specific moment.

# Inputs:
1. Character Profile:
<profile>

2. Current Scenario:
<context>

# Requirements:
1. Generate detailed internal thoughts from the character's perspective
2. Ensure consistency with the character's personality and background
3. Consider only information available to the character at this moment

# Output:
Write a detailed inner monologue expressing your thoughts at this moment.
)";

constexpr const char* kJudgeGoldText =
    R"(You are evaluating the quality of generated character thoughts compared to the reference thoughts.

# Inputs:
1. Reference Thought:
<reference>

2. Generated Thought:
<generated>

# Scoring Criteria:
5 points:
- Contains ALL elements from the reference thought
- Provides reasonable additional context or elaboration
- Maintains perfect character voice and perspective
- Shows deep understanding of the character's state
- Additional content logically connects to the reference

4 points:
- Contains ALL elements from the reference thought
- Provides some additional context
- Maintains character voice
- Shows good understanding
- No contradictions or inconsistencies

3 points:
- Contains MOST elements from the reference thought
- Limited or no additional context
- Generally maintains character voice
- Shows basic understanding
- May miss minor elements

2 points:
- Contains SOME elements from the reference thought
- Missing major elements
- Inconsistent character voice
- Shows limited understanding
- May contain minor contradictions

1 point:
- Missing MOST reference elements
- Wrong character voice
- Shows no understanding
- Contains major contradictions
- Completely different direction

# Output:
Provide a score (1-5) with a brief explanation of your rating.
)";

constexpr const char* kJudgeSilverText =
    R"(You are evaluating the quality of generated character thoughts based on character motivations and context.

# Inputs:
1. Character Profile:
<profile>

2. Scenario Context:
<context>

3. Generated Thought:
<generated>

# Scoring Criteria:
5 points:
- Perfect alignment with known character motivations
- Rich, multi-layered reasoning process
- Deep consideration of current context
- Consistent with character's knowledge at this point
- Natural connection to subsequent actions

4 points:
- Strong alignment with character motivations
- Clear reasoning process
- Good consideration of context
- Consistent with character's knowledge
- Logical connection to actions

3 points:
- Basic alignment with character motivations
- Simple but logical reasoning
- Some consideration of context
- Generally consistent with knowledge
- Basic connection to actions

2 points:
- Weak alignment with character motivations
- Unclear or illogical reasoning
- Limited context consideration
- Some knowledge inconsistencies
- Weak connection to actions

1 point:
- No alignment with character motivations
- No clear reasoning
- Ignores context
- Major knowledge inconsistencies
- No connection to actions

# Output:
Provide a score (1-5) with a brief explanation of your rating.
)";

constexpr const char* kMultipleChoiceText =
    R"(You are role-playing as <character>.

Scenario:
<scenario>

<thought_section>Question:
<question>

Choices:
<choices>

Answer with the letter of the single best choice.
)";

}  // namespace

PromptCatalog PromptCatalog::builtin() {
  PromptCatalog catalog;
  auto add = [&](std::string_view name, const char* text) {
    catalog.templates_.push_back({std::string(name), kBuiltinVersion, text});
  };
  add(kCharacterIdentification, kCharacterIdentificationText);
  add(kThoughtExtraction, kThoughtExtractionText);
  add(kGoldGeneration, kGoldGenerationText);
  add(kMotivationAnalysis, kMotivationAnalysisText);
  add(kMemoryRecall, kMemoryRecallText);
  add(kReactionPrediction, kReactionPredictionText);
  add(kReflection, kReflectionText);
  add(kThoughtPointLocation, kThoughtPointLocationText);
  add(kSilverGeneration, kSilverGenerationText);
  add(kJudgeGold, kJudgeGoldText);
  add(kJudgeSilver, kJudgeSilverText);
  add(kMultipleChoice, kMultipleChoiceText);
  return catalog;
}

PromptCatalog PromptCatalog::from_dir(const std::filesystem::path& dir) {
  PromptCatalog catalog = builtin();
  if (!std::filesystem::is_directory(dir)) {
    raise("IoError", "prompt directory not found: " + dir.string());
  }
  std::string version = "dir";
  std::filesystem::path version_file = dir / "VERSION";
  if (std::filesystem::exists(version_file)) {
    version = trim(read_file(version_file));
  }
  for (Template& tmpl : catalog.templates_) {
    std::filesystem::path file = dir / (tmpl.name + ".txt");
    if (std::filesystem::exists(file)) {
      tmpl.text = read_file(file);
      tmpl.version = version;
    }
  }
  return catalog;
}

const Template& PromptCatalog::get(std::string_view name) const {
  for (const Template& tmpl : templates_) {
    if (tmpl.name == name) return tmpl;
  }
  raise("UnknownTemplate", "no prompt template named '" + std::string(name) + "'");
}

std::string PromptCatalog::render(
    const Template& tmpl,
    const std::vector<std::pair<std::string, std::string>>& substitutions) {
  std::string out = tmpl.text;
  for (const auto& [key, value] : substitutions) {
    std::size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
      out.replace(pos, key.size(), value);
      pos += value.size();
    }
  }
  return out;
}

}  // namespace thoughtbench::prompts
