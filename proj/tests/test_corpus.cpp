#include <doctest.h>

#include "thoughtbench/common.hpp"
#include "thoughtbench/corpus.hpp"

#include "testutil.hpp"

#include <fstream>

using namespace thoughtbench;
using tbtest::ScratchDir;

namespace {

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<corpus::BenchmarkItem>& items) {
  std::string out;
  for (const auto& item : items) out += corpus::item_to_json(item).dump() + "\n";
  write_file_atomic(path, out);
}

}  // namespace

TEST_CASE("empty dataset file loads without error") {
  ScratchDir dir;
  write_file_atomic(dir / "empty.jsonl", "");
  corpus::Dataset ds = corpus::load_dataset(dir / "empty.jsonl", corpus::SetKind::Gold);
  CHECK(ds.items.empty());
  CHECK(ds.stats.item_count == 0);
  CHECK(ds.stats.distinct_characters == 0);
}

TEST_CASE("well-formed items load in file order with stats") {
  ScratchDir dir;
  std::vector<corpus::BenchmarkItem> items = {tbtest::make_gold_item("g1", "Mira Holt"),
                                              tbtest::make_gold_item("g2", "Corin Vale")};
  write_jsonl(dir / "gold.jsonl", items);
  corpus::Dataset ds = corpus::load_dataset(dir / "gold.jsonl", corpus::SetKind::Gold);
  REQUIRE(ds.items.size() == 2);
  CHECK(ds.items[0].id == "g1");
  CHECK(ds.items[1].id == "g2");
  CHECK(ds.stats.item_count == 2);
  CHECK(ds.stats.distinct_characters == 2);
  // means recomputed from the items themselves
  double expect_scenario = (count_tokens(items[0].scenario) +
                            count_tokens(items[1].scenario)) / 2.0;
  CHECK(ds.stats.mean_scenario_tokens == doctest::Approx(expect_scenario));
}

TEST_CASE("malformed JSON reports the line number") {
  ScratchDir dir;
  write_file_atomic(dir / "bad.jsonl",
                    corpus::item_to_json(tbtest::make_gold_item("g1", "A")).dump() +
                        "\nnot json\n");
  try {
    corpus::load_dataset(dir / "bad.jsonl", corpus::SetKind::Gold);
    FAIL("expected MalformedRecord");
  } catch (const Error& e) {
    CHECK(e.code() == "MalformedRecord");
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("gold item with wrong mask count is a MaskCountError") {
  ScratchDir dir;
  corpus::BenchmarkItem zero = tbtest::make_gold_item("g1", "A");
  zero.masked_text = "no mask here at all";
  write_jsonl(dir / "zero.jsonl", {zero});
  CHECK_THROWS_WITH_AS(corpus::load_dataset(dir / "zero.jsonl", corpus::SetKind::Gold),
                       doctest::Contains("MaskCountError"), Error);

  corpus::BenchmarkItem two = tbtest::make_gold_item("g2", "A");
  two.masked_text = "[MASK] and again [MASK]";
  write_jsonl(dir / "two.jsonl", {two});
  CHECK_THROWS_WITH_AS(corpus::load_dataset(dir / "two.jsonl", corpus::SetKind::Gold),
                       doctest::Contains("MaskCountError"), Error);
}

TEST_CASE("unknown character is a warning, item kept with flag") {
  ScratchDir dir;
  corpus::CharacterRegistry registry;
  corpus::CharacterProfile known;
  known.name = "Mira Holt";
  known.introduction = "A watch captain.";
  registry[known.name] = known;

  write_jsonl(dir / "gold.jsonl", {tbtest::make_gold_item("g1", "Mira Holt"),
                                   tbtest::make_gold_item("g2", "Stranger")});
  corpus::Dataset ds =
      corpus::load_dataset(dir / "gold.jsonl", corpus::SetKind::Gold, &registry);
  REQUIRE(ds.items.size() == 2);
  CHECK(ds.items[0].character_known);
  CHECK_FALSE(ds.items[1].character_known);
  REQUIRE(ds.warnings.size() == 1);
  CHECK(ds.warnings[0].find("UnknownCharacter") != std::string::npos);
}

TEST_CASE("validate_item contract cases") {
  corpus::BenchmarkItem good = tbtest::make_gold_item("g1", "A");
  CHECK(corpus::validate_item(good).empty());

  corpus::BenchmarkItem no_mask = good;
  no_mask.masked_text = "prefix without marker";
  auto violations = corpus::validate_item(no_mask);
  REQUIRE_FALSE(violations.empty());
  CHECK(violations[0].rule == "MaskCount");

  corpus::BenchmarkItem silver = tbtest::make_silver_item("s1", "A");
  CHECK(corpus::validate_item(silver).empty());
  silver.motivation_notes.reset();
  violations = corpus::validate_item(silver);
  REQUIRE_FALSE(violations.empty());
  CHECK(violations[0].rule == "MissingMotivation");
}

TEST_CASE("gold scenario must match the masked_text prefix") {
  corpus::BenchmarkItem item = tbtest::make_gold_item("g1", "A");
  item.scenario = "a different scenario entirely";
  auto violations = corpus::validate_item(item);
  REQUIRE_FALSE(violations.empty());
  CHECK(violations[0].rule == "ScenarioMismatch");
}

TEST_CASE("write/load round trip preserves every field") {
  ScratchDir dir;
  corpus::Dataset gold;
  gold.items = {tbtest::make_gold_item("g1", "Mira Holt")};
  corpus::Dataset silver;
  silver.items = {tbtest::make_silver_item("s1", "Corin Vale")};
  corpus::write_dataset(gold, dir / "gold.jsonl");
  corpus::write_dataset(silver, dir / "silver.jsonl");

  corpus::Dataset gold2 = corpus::load_dataset(dir / "gold.jsonl", corpus::SetKind::Gold);
  corpus::Dataset silver2 =
      corpus::load_dataset(dir / "silver.jsonl", corpus::SetKind::Silver);
  REQUIRE(gold2.items.size() == 1);
  REQUIRE(silver2.items.size() == 1);
  CHECK(gold2.items[0] == gold.items[0]);
  CHECK(silver2.items[0] == silver.items[0]);
}

TEST_CASE("official count verification") {
  corpus::Dataset ds;
  for (int c = 0; c < 22; ++c) {
    for (int i = 0; i < (c < 9 ? 19 : 18); ++i) {  // 9*19 + 13*18 = 405
      ds.items.push_back(
          tbtest::make_gold_item("g" + std::to_string(c) + "_" + std::to_string(i),
                                 "char" + std::to_string(c)));
    }
  }
  ds.stats = corpus::compute_stats(ds.items);
  REQUIRE(ds.stats.item_count == 405);
  REQUIRE(ds.stats.distinct_characters == 22);
  CHECK_NOTHROW(corpus::verify_official_counts(ds, corpus::SetKind::Gold));

  ds.items.pop_back();
  ds.stats = corpus::compute_stats(ds.items);
  CHECK_THROWS_WITH_AS(corpus::verify_official_counts(ds, corpus::SetKind::Gold),
                       doctest::Contains("OfficialCountMismatch"), Error);
}

TEST_CASE("manifest and corpus store load a full root") {
  ScratchDir dir;
  corpus::CharacterRegistry registry;
  corpus::CharacterProfile p;
  p.name = "Mira Holt";
  p.introduction = "Watch captain of a river town.";
  p.pov_chapters = {{"mira-1", 0}, {"mira-2", 2}};
  registry[p.name] = p;
  corpus::write_profiles(registry, dir / "profiles.jsonl");

  write_file_atomic(dir / "chapters" / "mira-1.txt", "First night on the wall. Quiet.");
  std::string chapters_jsonl =
      nlohmann::json{{"id", "mira-1"},
                     {"character", "Mira Holt"},
                     {"sequence_index", 0},
                     {"source", "chapters/mira-1.txt"}}
          .dump() +
      "\n" +
      nlohmann::json{{"id", "mira-2"},
                     {"character", "Mira Holt"},
                     {"sequence_index", 2},
                     {"text", "Second chapter, inline text."}}
          .dump() +
      "\n";
  write_file_atomic(dir / "chapters.jsonl", chapters_jsonl);
  write_jsonl(dir / "gold.jsonl", {tbtest::make_gold_item("g1", "Mira Holt")});
  write_jsonl(dir / "silver.jsonl", {});

  corpus::Manifest manifest;
  manifest.root = dir.path();
  manifest.profiles = "profiles.jsonl";
  manifest.chapters = "chapters.jsonl";
  manifest.gold = "gold.jsonl";
  manifest.silver = "silver.jsonl";
  corpus::write_manifest(manifest);

  corpus::CorpusStore store = corpus::CorpusStore::load(dir.path());
  CHECK(store.characters.size() == 1);
  REQUIRE(store.chapters.size() == 2);
  CHECK(store.find_chapter("mira-1") != nullptr);
  CHECK(store.find_chapter("mira-1")->text == "First night on the wall. Quiet.");
  auto povs = store.chapters_for("Mira Holt");
  REQUIRE(povs.size() == 2);
  CHECK(povs[0].id == "mira-1");
  CHECK(povs[1].id == "mira-2");
}

TEST_CASE("profiles with non-increasing chapters are rejected") {
  ScratchDir dir;
  std::string line = nlohmann::json{
      {"name", "X"},
      {"introduction", "intro"},
      {"aliases", nlohmann::json::array()},
      {"pov_chapters",
       nlohmann::json::array({{{"id", "a"}, {"sequence_index", 3}},
                              {{"id", "b"}, {"sequence_index", 1}}})}}.dump();
  write_file_atomic(dir / "profiles.jsonl", line + "\n");
  CHECK_THROWS_WITH_AS(corpus::load_profiles(dir / "profiles.jsonl"),
                       doctest::Contains("strictly increasing"), Error);
}

TEST_CASE("bundled sample corpus loads with zero violations") {
  auto root = tbtest::sample_corpus_root();
  corpus::CorpusStore store = corpus::CorpusStore::load(root);
  corpus::Dataset gold = corpus::load_dataset(root / store.manifest.gold,
                                              corpus::SetKind::Gold, &store.characters);
  corpus::Dataset silver = corpus::load_dataset(root / store.manifest.silver,
                                                corpus::SetKind::Silver, &store.characters);
  CHECK(gold.items.size() == 5);
  CHECK(silver.items.size() == 5);
  CHECK(gold.warnings.empty());
  CHECK(silver.warnings.empty());
  for (const auto& item : gold.items) CHECK(corpus::validate_item(item).empty());
  for (const auto& item : silver.items) CHECK(corpus::validate_item(item).empty());
}
