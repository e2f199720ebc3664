#include "thoughtbench/corpus.hpp"

#include "thoughtbench/common.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace thoughtbench::corpus {

using nlohmann::json;

std::string_view to_string(SetKind kind) {
  return kind == SetKind::Gold ? "gold" : "silver";
}

SetKind set_kind_from_string(std::string_view s) {
  if (s == "gold") return SetKind::Gold;
  if (s == "silver") return SetKind::Silver;
  raise("MalformedRecord", "unknown set_kind '" + std::string(s) + "'");
}

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

std::vector<Violation> validate_item(const BenchmarkItem& item) {
  std::vector<Violation> out;
  auto add = [&](const char* field, const char* rule, std::string message) {
    out.push_back({field, rule, std::move(message)});
  };
  if (item.id.empty()) add("id", "NonEmpty", "item id is empty");
  if (item.character.empty()) add("character", "NonEmpty", "character is empty");
  if (item.scenario.empty()) add("scenario", "NonEmpty", "scenario is empty");
  if (item.reference.empty()) add("reference", "NonEmpty", "reference is empty");
  if (item.set_kind == SetKind::Gold) {
    if (!item.masked_text) {
      add("masked_text", "MaskCount", "gold item without masked_text");
    } else {
      std::size_t n = count_occurrences(*item.masked_text, kMaskMarker);
      if (n != 1) {
        add("masked_text", "MaskCount",
            "expected exactly one mask marker, found " + std::to_string(n));
      } else {
        std::size_t pos = item.masked_text->find(kMaskMarker);
        std::string prefix = rtrim(item.masked_text->substr(0, pos));
        if (prefix != rtrim(item.scenario)) {
          add("scenario", "ScenarioMismatch",
              "scenario does not match the masked_text prefix before the marker");
        }
      }
    }
    if (item.motivation_notes) {
      add("motivation_notes", "GoldHasMotivation", "gold item carries motivation_notes");
    }
  } else {
    if (!item.motivation_notes || item.motivation_notes->empty()) {
      add("motivation_notes", "MissingMotivation", "silver item without motivation_notes");
    }
    if (item.masked_text) {
      add("masked_text", "SilverHasMask", "silver item carries masked_text");
    }
  }
  return out;
}

DatasetStats compute_stats(const std::vector<BenchmarkItem>& items, const Tokenizer& tok) {
  DatasetStats stats;
  stats.item_count = items.size();
  std::set<std::string> names;
  double scenario_sum = 0.0;
  double reference_sum = 0.0;
  for (const BenchmarkItem& item : items) {
    names.insert(item.character);
    scenario_sum += static_cast<double>(tok.count(item.scenario));
    reference_sum += static_cast<double>(tok.count(item.reference));
  }
  stats.distinct_characters = names.size();
  if (!items.empty()) {
    stats.mean_scenario_tokens = scenario_sum / static_cast<double>(items.size());
    stats.mean_reference_tokens = reference_sum / static_cast<double>(items.size());
  }
  return stats;
}

json item_to_json(const BenchmarkItem& item) {
  json j;
  j["id"] = item.id;
  j["set_kind"] = std::string(to_string(item.set_kind));
  j["character"] = item.character;
  j["scenario"] = item.scenario;
  if (item.masked_text) j["masked_text"] = *item.masked_text;
  j["reference"] = item.reference;
  j["chapter_ref"] = item.chapter_ref;
  if (item.motivation_notes) j["motivation_notes"] = *item.motivation_notes;
  return j;
}

namespace {

std::string get_string(const json& j, const char* field, std::size_t line_no,
                       bool required = true) {
  if (!j.contains(field)) {
    if (!required) return {};
    raise("MalformedRecord",
          "line " + std::to_string(line_no) + ": missing field '" + field + "'");
  }
  if (!j.at(field).is_string()) {
    raise("MalformedRecord",
          "line " + std::to_string(line_no) + ": field '" + field + "' is not a string");
  }
  return j.at(field).get<std::string>();
}

}  // namespace

BenchmarkItem item_from_json(const json& j, std::size_t line_no) {
  if (!j.is_object()) {
    raise("MalformedRecord", "line " + std::to_string(line_no) + ": record is not an object");
  }
  BenchmarkItem item;
  item.id = get_string(j, "id", line_no);
  item.set_kind = set_kind_from_string(get_string(j, "set_kind", line_no));
  item.character = get_string(j, "character", line_no);
  item.scenario = get_string(j, "scenario", line_no);
  item.reference = get_string(j, "reference", line_no);
  item.chapter_ref = get_string(j, "chapter_ref", line_no);
  if (j.contains("masked_text")) item.masked_text = get_string(j, "masked_text", line_no);
  if (j.contains("motivation_notes"))
    item.motivation_notes = get_string(j, "motivation_notes", line_no);
  return item;
}

Dataset load_dataset(const std::filesystem::path& path, SetKind kind,
                     const CharacterRegistry* registry) {
  if (!std::filesystem::exists(path)) {
    raise("IoError", "dataset file not found: " + path.string());
  }
  Dataset dataset;
  if (registry) dataset.characters = *registry;

  std::string content = read_file(path);
  std::vector<std::string> lines = split_lines(content);
  std::set<std::string> seen_ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::size_t line_no = i + 1;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      raise("MalformedRecord", "line " + std::to_string(line_no) + ": invalid JSON");
    }
    BenchmarkItem item = item_from_json(j, line_no);
    if (item.set_kind != kind) {
      raise("MalformedRecord", "line " + std::to_string(line_no) + ": set_kind '" +
                                   std::string(to_string(item.set_kind)) +
                                   "' does not match the requested set");
    }
    if (item.set_kind == SetKind::Gold) {
      std::size_t n = item.masked_text ? count_occurrences(*item.masked_text, kMaskMarker) : 0;
      if (n != 1) {
        raise("MaskCountError", "line " + std::to_string(line_no) + ": gold item '" + item.id +
                                    "' has " + std::to_string(n) + " mask markers");
      }
    }
    std::vector<Violation> violations = validate_item(item);
    if (!violations.empty()) {
      raise("MalformedRecord", "line " + std::to_string(line_no) + ": " +
                                   violations.front().field + " violates " +
                                   violations.front().rule + " (" +
                                   violations.front().message + ")");
    }
    if (!seen_ids.insert(item.id).second) {
      dataset.warnings.push_back("duplicate item id '" + item.id + "' at line " +
                                 std::to_string(line_no));
    }
    if (registry && !registry->count(item.character)) {
      item.character_known = false;
      dataset.warnings.push_back("UnknownCharacter: '" + item.character + "' at line " +
                                 std::to_string(line_no));
    }
    dataset.items.push_back(std::move(item));
  }
  dataset.stats = compute_stats(dataset.items);
  return dataset;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const BenchmarkItem& item : dataset.items) {
    out << item_to_json(item).dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

void verify_official_counts(const Dataset& dataset, SetKind kind) {
  const std::size_t want_items = kind == SetKind::Gold ? 405 : 211;
  const std::size_t want_chars = kind == SetKind::Gold ? 22 : 18;
  if (dataset.stats.item_count != want_items ||
      dataset.stats.distinct_characters != want_chars) {
    raise("OfficialCountMismatch",
          std::string(to_string(kind)) + " set: expected " + std::to_string(want_items) +
              " items from " + std::to_string(want_chars) + " characters, got " +
              std::to_string(dataset.stats.item_count) + " items from " +
              std::to_string(dataset.stats.distinct_characters) + " characters");
  }
}

Manifest load_manifest(const std::filesystem::path& root) {
  std::filesystem::path file = root / "manifest.json";
  if (!std::filesystem::exists(file)) {
    raise("ManifestError", "no manifest.json under " + root.string());
  }
  json j = json::parse(read_file(file), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    raise("ManifestError", "manifest.json is not a JSON object");
  }
  Manifest m;
  m.root = root;
  m.profiles = j.value("profiles", "");
  m.chapters = j.value("chapters", "");
  if (j.contains("datasets") && j.at("datasets").is_object()) {
    m.gold = j.at("datasets").value("gold", "");
    m.silver = j.at("datasets").value("silver", "");
  }
  m.mc = j.value("mc", "");
  if (m.profiles.empty() || m.chapters.empty()) {
    raise("ManifestError", "manifest must name 'profiles' and 'chapters'");
  }
  return m;
}

void write_manifest(const Manifest& manifest) {
  json j;
  j["profiles"] = manifest.profiles;
  j["chapters"] = manifest.chapters;
  j["datasets"] = {{"gold", manifest.gold}, {"silver", manifest.silver}};
  if (!manifest.mc.empty()) j["mc"] = manifest.mc;
  write_file_atomic(manifest.root / "manifest.json", j.dump(2) + "\n");
}

CharacterRegistry load_profiles(const std::filesystem::path& path) {
  CharacterRegistry registry;
  std::string content = read_file(path);
  std::vector<std::string> lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::size_t line_no = i + 1;
    json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      raise("MalformedRecord", "profiles line " + std::to_string(line_no) + ": invalid JSON");
    }
    CharacterProfile p;
    p.name = get_string(j, "name", line_no);
    if (p.name.empty()) {
      raise("MalformedRecord", "profiles line " + std::to_string(line_no) + ": empty name");
    }
    p.introduction = get_string(j, "introduction", line_no, /*required=*/false);
    if (j.contains("aliases")) {
      for (const auto& a : j.at("aliases")) p.aliases.push_back(a.get<std::string>());
    }
    int last_seq = -1;
    if (j.contains("pov_chapters")) {
      for (const auto& c : j.at("pov_chapters")) {
        ChapterRef ref;
        ref.id = c.at("id").get<std::string>();
        ref.sequence_index = c.at("sequence_index").get<int>();
        if (ref.sequence_index <= last_seq) {
          raise("MalformedRecord", "profiles line " + std::to_string(line_no) +
                                       ": pov_chapters not strictly increasing");
        }
        last_seq = ref.sequence_index;
        p.pov_chapters.push_back(std::move(ref));
      }
    }
    registry[p.name] = std::move(p);
  }
  return registry;
}

void write_profiles(const CharacterRegistry& registry, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& [name, p] : registry) {
    json j;
    j["name"] = p.name;
    j["introduction"] = p.introduction;
    j["aliases"] = p.aliases;
    json chapters = json::array();
    for (const ChapterRef& ref : p.pov_chapters) {
      chapters.push_back({{"id", ref.id}, {"sequence_index", ref.sequence_index}});
    }
    j["pov_chapters"] = chapters;
    out << j.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<Chapter> load_chapters(const std::filesystem::path& path,
                                   const std::filesystem::path& root) {
  std::vector<Chapter> chapters;
  std::set<std::string> seen;
  std::string content = read_file(path);
  std::vector<std::string> lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::size_t line_no = i + 1;
    json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      raise("MalformedRecord", "chapters line " + std::to_string(line_no) + ": invalid JSON");
    }
    Chapter ch;
    ch.id = get_string(j, "id", line_no);
    ch.character = get_string(j, "character", line_no);
    ch.sequence_index = j.value("sequence_index", 0);
    if (ch.sequence_index < 0) {
      raise("MalformedRecord",
            "chapters line " + std::to_string(line_no) + ": negative sequence_index");
    }
    if (j.contains("text")) {
      ch.text = get_string(j, "text", line_no);
      ch.source = "inline";
    } else {
      ch.source = get_string(j, "source", line_no);
      ch.text = read_file(root / ch.source);
    }
    if (ch.text.empty()) {
      raise("MalformedRecord",
            "chapters line " + std::to_string(line_no) + ": chapter text is empty");
    }
    if (!seen.insert(ch.id).second) {
      raise("MalformedRecord",
            "chapters line " + std::to_string(line_no) + ": duplicate chapter id " + ch.id);
    }
    chapters.push_back(std::move(ch));
  }
  return chapters;
}

CorpusStore CorpusStore::load(const std::filesystem::path& root) {
  CorpusStore store;
  store.manifest = load_manifest(root);
  store.characters = load_profiles(root / store.manifest.profiles);
  store.chapters = load_chapters(root / store.manifest.chapters, root);
  return store;
}

const Chapter* CorpusStore::find_chapter(const std::string& id) const {
  for (const Chapter& ch : chapters) {
    if (ch.id == id) return &ch;
  }
  return nullptr;
}

const CharacterProfile* CorpusStore::find_profile(const std::string& name) const {
  auto it = characters.find(name);
  if (it != characters.end()) return &it->second;
  for (const auto& [key, profile] : characters) {
    if (std::find(profile.aliases.begin(), profile.aliases.end(), name) !=
        profile.aliases.end()) {
      return &profile;
    }
  }
  return nullptr;
}

std::vector<Chapter> CorpusStore::chapters_for(const std::string& character) const {
  std::vector<Chapter> out;
  const CharacterProfile* profile = find_profile(character);
  if (profile && !profile->pov_chapters.empty()) {
    for (const ChapterRef& ref : profile->pov_chapters) {
      if (const Chapter* ch = find_chapter(ref.id)) out.push_back(*ch);
    }
    return out;
  }
  for (const Chapter& ch : chapters) {
    if (ch.character == character) out.push_back(ch);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Chapter& a, const Chapter& b) {
                     return a.sequence_index < b.sequence_index;
                   });
  return out;
}

}  // namespace thoughtbench::corpus
