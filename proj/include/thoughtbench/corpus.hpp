#pragma once
// Data model, on-disk formats, loaders, and validators for character profiles,
// chapters, and benchmark items.
//
// On-disk layout under a corpus root:
//   manifest.json     names the files below (paths relative to the root)
//   profiles.jsonl    one CharacterProfile per line
//   chapters.jsonl    one chapter record per line; "text" inline or "source"
//                     pointing at a plain-text file relative to the root
//   gold.jsonl / silver.jsonl   one BenchmarkItem per line

#include "thoughtbench/tokenizer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace thoughtbench::corpus {

inline constexpr std::string_view kMaskMarker = "[MASK]";

struct ChapterRef {
  std::string id;
  int sequence_index = 0;

  friend bool operator==(const ChapterRef&, const ChapterRef&) = default;
};

struct CharacterProfile {
  std::string name;
  std::string introduction;
  std::vector<ChapterRef> pov_chapters;  // strictly increasing sequence_index
  std::vector<std::string> aliases;

  friend bool operator==(const CharacterProfile&, const CharacterProfile&) = default;
};

struct Chapter {
  std::string id;
  std::string character;  // POV holder
  int sequence_index = 0;
  std::string text;
  std::string source;
};

enum class SetKind { Gold, Silver };

std::string_view to_string(SetKind kind);
SetKind set_kind_from_string(std::string_view s);

struct BenchmarkItem {
  std::string id;
  SetKind set_kind = SetKind::Gold;
  std::string character;
  std::string scenario;
  std::optional<std::string> masked_text;       // Gold only
  std::string reference;
  std::string chapter_ref;
  std::optional<std::string> motivation_notes;  // Silver only
  bool character_known = true;                  // loader flag, not serialized

  friend bool operator==(const BenchmarkItem& a, const BenchmarkItem& b) {
    return a.id == b.id && a.set_kind == b.set_kind && a.character == b.character &&
           a.scenario == b.scenario && a.masked_text == b.masked_text &&
           a.reference == b.reference && a.chapter_ref == b.chapter_ref &&
           a.motivation_notes == b.motivation_notes;
  }
};

struct Violation {
  std::string field;
  std::string rule;
  std::string message;
};

struct DatasetStats {
  std::size_t item_count = 0;
  std::size_t distinct_characters = 0;
  double mean_scenario_tokens = 0.0;
  double mean_reference_tokens = 0.0;
};

using CharacterRegistry = std::map<std::string, CharacterProfile>;

struct Dataset {
  std::vector<BenchmarkItem> items;  // file order
  CharacterRegistry characters;
  DatasetStats stats;
  std::vector<std::string> warnings;
};

// Empty result iff all type invariants hold; each entry names field + rule.
std::vector<Violation> validate_item(const BenchmarkItem& item);

DatasetStats compute_stats(const std::vector<BenchmarkItem>& items,
                           const Tokenizer& tok = default_tokenizer());

nlohmann::json item_to_json(const BenchmarkItem& item);
BenchmarkItem item_from_json(const nlohmann::json& j, std::size_t line_no);

// Throws MalformedRecord(line#) on schema violations and MaskCountError on a
// Gold item whose masked_text does not contain exactly one mask marker.
// Unknown characters (when a registry is given) are warnings; the item is kept
// with character_known = false.
Dataset load_dataset(const std::filesystem::path& path, SetKind kind,
                     const CharacterRegistry* registry = nullptr);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Shape check for the published benchmark files: 405 items / 22 characters in
// the gold set, 211 / 18 in the silver set. Throws OfficialCountMismatch.
void verify_official_counts(const Dataset& dataset, SetKind kind);

struct Manifest {
  std::filesystem::path root;
  std::string profiles;  // paths relative to root
  std::string chapters;
  std::string gold;
  std::string silver;
  std::string mc;  // optional; empty when absent
};

Manifest load_manifest(const std::filesystem::path& root);
void write_manifest(const Manifest& manifest);

CharacterRegistry load_profiles(const std::filesystem::path& path);
void write_profiles(const CharacterRegistry& registry, const std::filesystem::path& path);

std::vector<Chapter> load_chapters(const std::filesystem::path& path,
                                   const std::filesystem::path& root);

// A loaded corpus root: registry + chapters + dataset paths.
struct CorpusStore {
  Manifest manifest;
  CharacterRegistry characters;
  std::vector<Chapter> chapters;

  static CorpusStore load(const std::filesystem::path& root);

  const Chapter* find_chapter(const std::string& id) const;
  const CharacterProfile* find_profile(const std::string& name) const;

  // POV chapters for a character, in profile order when a profile exists,
  // otherwise every chapter attributed to the character by sequence_index.
  std::vector<Chapter> chapters_for(const std::string& character) const;
};

}  // namespace thoughtbench::corpus
