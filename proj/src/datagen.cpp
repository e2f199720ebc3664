#include "thoughtbench/datagen.hpp"

#include "thoughtbench/common.hpp"
#include "thoughtbench/jsonutil.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace thoughtbench::datagen {

using nlohmann::json;

std::string_view to_string(CandidateStatus status) {
  switch (status) {
    case CandidateStatus::Pending: return "Pending";
    case CandidateStatus::Accepted: return "Accepted";
    case CandidateStatus::Rejected: return "Rejected";
  }
  return "Pending";
}

CandidateStatus candidate_status_from_string(std::string_view s) {
  if (s == "Pending") return CandidateStatus::Pending;
  if (s == "Accepted") return CandidateStatus::Accepted;
  if (s == "Rejected") return CandidateStatus::Rejected;
  raise("MalformedRecord", "unknown candidate status '" + std::string(s) + "'");
}

std::size_t sentence_count(const std::string& text) {
  std::size_t count = 0;
  bool in_terminal = false;
  for (char c : text) {
    bool terminal = c == '.' || c == '!' || c == '?';
    if (terminal && !in_terminal) ++count;
    in_terminal = terminal;
  }
  return count;
}

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

gateway::ChatResponse DataBuilder::ask(const std::string& prompt) {
  gateway::ChatRequest req;
  req.messages.push_back({gateway::Role::User, prompt});
  req.max_output_tokens = 1200;
  req.seed = 0;
  return gw_.chat(req);
}

std::vector<std::string> DataBuilder::identify_characters(const corpus::Chapter& chapter) {
  const std::string stage = "character_identification";
  std::string prompt = prompts::PromptCatalog::render(
      catalog_.get(prompts::kCharacterIdentification), {{"<text>", chapter.text}});
  json j = jsonutil::parse_with_repair(ask(prompt).content, stage);
  const json& arr = jsonutil::require_array(j, "characters", stage);
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& entry : arr) {
    if (!entry.is_string()) {
      raise("StageParseFailure", stage + ": non-string character entry");
    }
    std::string name = entry.get<std::string>();
    if (seen.insert(name).second) names.push_back(std::move(name));
  }
  return names;
}

std::vector<ThoughtCandidate> DataBuilder::extract_thoughts(const corpus::Chapter& chapter,
                                                            const std::string& character) {
  const std::string stage = "thought_extraction";
  std::string prompt = prompts::PromptCatalog::render(
      catalog_.get(prompts::kThoughtExtraction),
      {{"<character>", character}, {"<text>", chapter.text}});
  json j = jsonutil::parse_with_repair(ask(prompt).content, stage);
  const json& pairs = jsonutil::require_array(j, "ta_pairs", stage);

  std::vector<ThoughtCandidate> candidates;
  std::size_t seq = 0;
  for (const auto& p : pairs) {
    ThoughtCandidate cand;
    cand.character = jsonutil::require_string(p, "character", stage);
    cand.reason = jsonutil::require_string(p, "reason", stage);
    cand.thought = jsonutil::require_string(p, "thought", stage);
    cand.raw_text = jsonutil::require_string(p, "raw_text", stage);
    cand.chapter_ref = chapter.id;
    cand.candidate_id =
        chapter.id + "#" + std::to_string(seq++) + "-" + short_digest(cand.thought);

    const bool verbatim = !cand.thought.empty() &&
                          cand.raw_text.find(cand.thought) != std::string::npos &&
                          chapter.text.find(cand.raw_text) != std::string::npos;
    if (!verbatim) {
      cand.status = CandidateStatus::Rejected;
      cand.reject_rule = "NotVerbatim";
    } else if (sentence_count(cand.thought) < 2) {
      cand.status = CandidateStatus::Rejected;
      cand.reject_rule = "TooShort";
    } else if (count_occurrences(chapter.text, cand.thought) != 1) {
      cand.status = CandidateStatus::Rejected;
      cand.reject_rule = "NotUnique";
    } else {
      cand.status = CandidateStatus::Pending;
    }
    candidates.push_back(std::move(cand));
  }
  return candidates;
}

MotivationRecord DataBuilder::analyze_motivations(const std::string& article,
                                                  const std::string& source_name) {
  const std::string stage = "motivation_analysis";
  std::string prompt = prompts::PromptCatalog::render(
      catalog_.get(prompts::kMotivationAnalysis), {{"<article>", article}});
  json j = jsonutil::parse_with_repair(ask(prompt).content, stage);

  MotivationRecord record;
  record.character = jsonutil::require_string(j, "character", stage);
  record.source_article = source_name;
  const json& behaviors = jsonutil::require_array(j, "behaviors", stage);
  for (const auto& b : behaviors) {
    Behavior behavior;
    behavior.action = jsonutil::require_string(b, "action", stage);
    const json& motivations = jsonutil::require_array(b, "motivations", stage);
    for (const auto& m : motivations) {
      if (!m.is_string()) {
        raise("StageParseFailure", stage + ": non-string motivation");
      }
      behavior.motivations.push_back(m.get<std::string>());
    }
    if (behavior.motivations.empty()) {
      raise("StageParseFailure", stage + ": EmptyMotivations for action '" +
                                     behavior.action + "'");
    }
    record.behaviors.push_back(std::move(behavior));
  }
  if (record.behaviors.empty()) {
    raise("StageParseFailure", stage + ": EmptyBehaviors");
  }
  return record;
}

namespace {

std::string render_motivation(const MotivationRecord& record) {
  std::string out = "Character: " + record.character + "\n";
  for (const Behavior& b : record.behaviors) {
    out += "- action: " + b.action + "\n  motivations:\n";
    for (const std::string& m : b.motivations) {
      out += "  - " + m + "\n";
    }
  }
  return out;
}

}  // namespace

ThoughtPoint DataBuilder::locate_thought_point(const MotivationRecord& motivation,
                                               const corpus::Chapter& chapter) {
  const std::string stage = "thought_point_location";
  std::string prompt = prompts::PromptCatalog::render(
      catalog_.get(prompts::kThoughtPointLocation),
      {{"<motivation>", render_motivation(motivation)}, {"<chapter>", chapter.text}});
  json j = jsonutil::parse_with_repair(ask(prompt).content, stage);
  const json& point = jsonutil::require_object(j, "thought_point", stage);
  std::string location = jsonutil::require_string(point, "location", stage);
  std::string reason = jsonutil::require_string(point, "reason", stage);

  if (location.empty()) {
    raise("LocationNotFound", "located segment is empty");
  }
  std::size_t pos = chapter.text.find(location);
  if (pos == std::string::npos) {
    raise("LocationNotFound", "located segment is not a chapter substring");
  }
  if (chapter.text.find(location, pos + 1) != std::string::npos) {
    raise("LocationNotFound", "located segment is ambiguous in the chapter");
  }
  std::size_t end = pos + location.size();
  if (end >= chapter.text.size()) {
    raise("LocationNotFound", "located segment reaches the chapter end");
  }
  ThoughtPoint result;
  result.chapter_ref = chapter.id;
  result.prefix = chapter.text.substr(0, end);
  result.reason = std::move(reason);
  return result;
}

corpus::BenchmarkItem build_gold_item(const corpus::Chapter& chapter,
                                      const ThoughtCandidate& candidate) {
  if (candidate.status != CandidateStatus::Accepted) {
    raise("CandidateNotAccepted",
          "candidate " + candidate.candidate_id + " is not Accepted");
  }
  const std::size_t occurrences = count_occurrences(chapter.text, candidate.thought);
  if (occurrences != 1) {
    raise("SpanNotFound", "thought occurs " + std::to_string(occurrences) +
                              " times in chapter " + chapter.id);
  }
  const std::size_t pos = chapter.text.find(candidate.thought);
  const std::string prefix = chapter.text.substr(0, pos);
  const std::string suffix = chapter.text.substr(pos + candidate.thought.size());

  corpus::BenchmarkItem item;
  item.id = "gold-" + chapter.id + "-" + short_digest(candidate.thought);
  item.set_kind = corpus::SetKind::Gold;
  item.character = candidate.character;
  item.scenario = rtrim(prefix);
  if (item.scenario.empty()) {
    raise("EmptyScenario", "no scenario text before the thought in " + chapter.id);
  }
  item.masked_text = prefix + std::string(corpus::kMaskMarker) + suffix;
  item.reference = candidate.thought;
  item.chapter_ref = chapter.id;
  return item;
}

corpus::BenchmarkItem build_silver_item(const corpus::Chapter& chapter,
                                        const MotivationRecord& motivation,
                                        std::size_t behavior_index,
                                        const ThoughtPoint& point) {
  if (behavior_index >= motivation.behaviors.size()) {
    raise("InvalidArgument", "behavior index out of range");
  }
  const Behavior& behavior = motivation.behaviors[behavior_index];

  corpus::BenchmarkItem item;
  item.id = "silver-" + chapter.id + "-" + short_digest(behavior.action);
  item.set_kind = corpus::SetKind::Silver;
  item.character = motivation.character;
  item.scenario = rtrim(point.prefix);
  if (item.scenario.empty()) {
    raise("EmptyScenario", "thought point leaves no scenario text in " + chapter.id);
  }
  std::string reference;
  for (const std::string& m : behavior.motivations) {
    if (!reference.empty()) reference += "\n";
    reference += m;
  }
  item.reference = reference;
  item.chapter_ref = chapter.id;
  item.motivation_notes = "action: " + behavior.action + "\nsource: " +
                          motivation.source_article + "\npoint_reason: " + point.reason;
  return item;
}

namespace {

std::string indent_block(const std::string& text) {
  std::string out;
  for (const std::string& line : split_lines(text)) {
    out += "  " + line + "\n";
  }
  if (out.empty()) out = "  \n";
  return out;
}

}  // namespace

void export_review_queue(const std::vector<ThoughtCandidate>& candidates,
                         const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# review queue\n";
  out << "# Keep only candidates that are pure internal monologue, contain at\n";
  out << "# least two sentences, belong to a single character, and whose point\n";
  out << "# precedes the action. Edit the 'status:' lines to Accepted or\n";
  out << "# Rejected (optionally 'Rejected: <rule>').\n\n";
  for (const ThoughtCandidate& c : candidates) {
    out << "=== candidate " << c.candidate_id << "\n";
    out << "character: " << c.character << "\n";
    out << "chapter: " << c.chapter_ref << "\n";
    out << "status: " << to_string(c.status);
    if (c.reject_rule) out << ": " << *c.reject_rule;
    out << "\n";
    out << "reason: " << c.reason << "\n";
    out << "thought:\n" << indent_block(c.thought);
    out << "raw_text:\n" << indent_block(c.raw_text);
    out << "\n";
  }
  write_file_atomic(path, out.str());
}

void import_review_decisions(const std::filesystem::path& path,
                             std::vector<ThoughtCandidate>& candidates) {
  const std::string marker = "=== candidate ";
  std::string current_id;
  for (const std::string& raw : split_lines(read_file(path))) {
    std::string line = trim(raw);
    if (line.rfind(marker, 0) == 0) {
      current_id = trim(line.substr(marker.size()));
      bool known = std::any_of(candidates.begin(), candidates.end(),
                               [&](const ThoughtCandidate& c) {
                                 return c.candidate_id == current_id;
                               });
      if (!known) {
        raise("UnknownCandidateId", "review file names unknown candidate '" +
                                        current_id + "'");
      }
      continue;
    }
    if (current_id.empty() || line.rfind("status:", 0) != 0) continue;
    std::string value = trim(line.substr(7));
    std::optional<std::string> rule;
    std::size_t colon = value.find(':');
    if (colon != std::string::npos) {
      rule = trim(value.substr(colon + 1));
      value = trim(value.substr(0, colon));
    }
    CandidateStatus status = candidate_status_from_string(value);
    for (ThoughtCandidate& c : candidates) {
      if (c.candidate_id == current_id) {
        c.status = status;
        if (status == CandidateStatus::Rejected) {
          if (rule) c.reject_rule = rule;
        } else {
          c.reject_rule.reset();
        }
      }
    }
  }
}

void save_candidates(const std::vector<ThoughtCandidate>& candidates,
                     const std::filesystem::path& path) {
  std::ostringstream out;
  for (const ThoughtCandidate& c : candidates) {
    json j;
    j["candidate_id"] = c.candidate_id;
    j["character"] = c.character;
    j["thought"] = c.thought;
    j["raw_text"] = c.raw_text;
    j["reason"] = c.reason;
    j["chapter_ref"] = c.chapter_ref;
    j["status"] = std::string(to_string(c.status));
    if (c.reject_rule) j["reject_rule"] = *c.reject_rule;
    out << j.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<ThoughtCandidate> load_candidates(const std::filesystem::path& path) {
  std::vector<ThoughtCandidate> candidates;
  for (const std::string& line : split_lines(read_file(path))) {
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      raise("MalformedRecord", "invalid candidate line in " + path.string());
    }
    ThoughtCandidate c;
    c.candidate_id = j.at("candidate_id").get<std::string>();
    c.character = j.at("character").get<std::string>();
    c.thought = j.at("thought").get<std::string>();
    c.raw_text = j.at("raw_text").get<std::string>();
    c.reason = j.value("reason", "");
    c.chapter_ref = j.at("chapter_ref").get<std::string>();
    c.status = candidate_status_from_string(j.value("status", "Pending"));
    if (j.contains("reject_rule")) c.reject_rule = j["reject_rule"].get<std::string>();
    candidates.push_back(std::move(c));
  }
  return candidates;
}

}  // namespace thoughtbench::datagen
