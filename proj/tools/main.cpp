// thoughtbench CLI: corpus ingestion, index building, dataset construction,
// thought generation, scoring, end-to-end benchmark runs, the multiple-choice
// harness, and report re-rendering.
//
// Exit codes: 0 success, 1 fatal config/dataset error, 2 completed with
// per-item errors.

#include "thoughtbench/benchrun.hpp"
#include "thoughtbench/common.hpp"
#include "thoughtbench/corpus.hpp"
#include "thoughtbench/datagen.hpp"
#include "thoughtbench/memindex.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace tb = thoughtbench;

namespace {

tb::benchrun::RunConfig load_config(const std::string& path, bool force,
                                    const std::string& out_override) {
  tb::benchrun::RunConfig cfg = tb::benchrun::RunConfig::from_file(path);
  if (force) cfg.force = true;
  if (!out_override.empty()) cfg.output_dir = out_override;
  return cfg;
}

int report_exit(const tb::evalmetrics::RunReport& report) {
  if (!report.errors.empty()) {
    std::cerr << report.errors.size() << " item(s) failed; see errors.jsonl\n";
    return 2;
  }
  return 0;
}

void print_aggregates(const tb::evalmetrics::RunReport& report) {
  for (const auto& row : report.aggregates) {
    std::printf("%-20s %-6s n=%-4zu", row.method.c_str(),
                std::string(tb::corpus::to_string(row.set_kind)).c_str(), row.n);
    if (row.bleu) std::printf(" bleu=%.4f", *row.bleu);
    if (row.rouge_l) std::printf(" rouge_l=%.4f", *row.rouge_l);
    if (row.nli_entailment) std::printf(" nli=%.4f", *row.nli_entailment);
    if (row.judge_score) std::printf(" judge=%.2f", *row.judge_score);
    std::printf("\n");
  }
}

int cmd_ingest(const std::string& root, bool expect_official) {
  tb::corpus::CorpusStore store = tb::corpus::CorpusStore::load(root);
  std::printf("profiles: %zu\nchapters: %zu\n", store.characters.size(),
              store.chapters.size());
  auto show = [&](const std::string& rel, tb::corpus::SetKind kind) {
    if (rel.empty()) return;
    tb::corpus::Dataset ds =
        tb::corpus::load_dataset(store.manifest.root / rel, kind, &store.characters);
    if (expect_official) tb::corpus::verify_official_counts(ds, kind);
    std::printf("%s: %zu items, %zu characters, mean scenario %.1f tokens, "
                "mean reference %.1f tokens\n",
                std::string(tb::corpus::to_string(kind)).c_str(), ds.stats.item_count,
                ds.stats.distinct_characters, ds.stats.mean_scenario_tokens,
                ds.stats.mean_reference_tokens);
    for (const std::string& warning : ds.warnings) {
      std::fprintf(stderr, "warning: %s\n", warning.c_str());
    }
  };
  show(store.manifest.gold, tb::corpus::SetKind::Gold);
  show(store.manifest.silver, tb::corpus::SetKind::Silver);
  return 0;
}

int cmd_index(const tb::benchrun::RunConfig& cfg, const std::string& only_character) {
  tb::corpus::CorpusStore store = tb::corpus::CorpusStore::load(cfg.corpus_root);
  tb::gateway::Gateway gw(cfg.gateway);
  std::size_t built = 0;
  for (const auto& [name, profile] : store.characters) {
    if (!only_character.empty() && name != only_character) continue;
    std::vector<tb::corpus::Chapter> chapters = store.chapters_for(name);
    if (chapters.empty()) continue;
    std::string file;
    for (char c : name) file += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    std::filesystem::path sidecar = cfg.output_dir / "indexes" / (file + ".jsonl");
    std::filesystem::create_directories(sidecar.parent_path());
    tb::memindex::MemoryIndex index =
        tb::memindex::load_or_build(sidecar, name, chapters, cfg.chunk_size, gw);
    std::printf("%s: %zu chunks (size %zu, model %s)\n", name.c_str(), index.chunks.size(),
                index.chunk_size, index.embedding_model_id.c_str());
    ++built;
  }
  if (built == 0) {
    std::fprintf(stderr, "no characters with chapters found\n");
    return 1;
  }
  return 0;
}

int cmd_datagen(const tb::benchrun::RunConfig& cfg,
                const std::vector<std::string>& article_paths,
                const std::string& review_export, const std::string& review_import,
                const std::string& emit_gold) {
  tb::corpus::CorpusStore store = tb::corpus::CorpusStore::load(cfg.corpus_root);
  tb::gateway::Gateway gw(cfg.gateway);
  tb::prompts::PromptCatalog catalog = tb::prompts::PromptCatalog::builtin();
  tb::datagen::DataBuilder builder(gw, catalog);

  std::filesystem::path out = cfg.output_dir;
  std::filesystem::create_directories(out);
  std::filesystem::path candidates_path = out / "candidates.jsonl";

  std::vector<tb::datagen::ThoughtCandidate> candidates;
  if (std::filesystem::exists(candidates_path)) {
    candidates = tb::datagen::load_candidates(candidates_path);
  } else {
    for (const tb::corpus::Chapter& chapter : store.chapters) {
      for (const std::string& character : builder.identify_characters(chapter)) {
        auto found = builder.extract_thoughts(chapter, character);
        candidates.insert(candidates.end(), found.begin(), found.end());
      }
    }
    tb::datagen::save_candidates(candidates, candidates_path);
  }
  std::printf("candidates: %zu\n", candidates.size());

  if (!review_export.empty()) {
    tb::datagen::export_review_queue(candidates, review_export);
    std::printf("review queue written to %s\n", review_export.c_str());
  }
  if (!review_import.empty()) {
    tb::datagen::import_review_decisions(review_import, candidates);
    tb::datagen::save_candidates(candidates, candidates_path);
    std::printf("review decisions imported\n");
  }
  if (!emit_gold.empty()) {
    tb::corpus::Dataset dataset;
    dataset.characters = store.characters;
    for (const tb::datagen::ThoughtCandidate& cand : candidates) {
      if (cand.status != tb::datagen::CandidateStatus::Accepted) continue;
      const tb::corpus::Chapter* chapter = store.find_chapter(cand.chapter_ref);
      if (!chapter) continue;
      dataset.items.push_back(tb::datagen::build_gold_item(*chapter, cand));
    }
    dataset.stats = tb::corpus::compute_stats(dataset.items);
    tb::corpus::write_dataset(dataset, emit_gold);
    std::printf("gold items: %zu -> %s\n", dataset.items.size(), emit_gold.c_str());
  }

  for (const std::string& article_path : article_paths) {
    std::string article = tb::read_file(article_path);
    tb::datagen::MotivationRecord record =
        builder.analyze_motivations(article, article_path);
    std::printf("article %s: character %s, %zu behaviors\n", article_path.c_str(),
                record.character.c_str(), record.behaviors.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"character inner-thought generation and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  bool force = false;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a corpus root and print stats");
  std::string ingest_root;
  bool expect_official = false;
  ingest->add_option("--root", ingest_root, "corpus root directory")->required();
  ingest->add_flag("--expect-official", expect_official,
                   "fail unless the datasets match the published counts");

  // index
  auto* index = app.add_subcommand("index", "build memory index sidecars");
  std::string index_character;
  index->add_option("--config", config_path)->required();
  index->add_option("--character", index_character, "only this character");

  // datagen
  auto* datagen = app.add_subcommand("datagen", "construct benchmark items");
  std::vector<std::string> articles;
  std::string review_export, review_import, emit_gold;
  datagen->add_option("--config", config_path)->required();
  datagen->add_option("--article", articles, "analysis article file(s)");
  datagen->add_option("--review-export", review_export, "write the review queue here");
  datagen->add_option("--review-import", review_import, "apply edited review decisions");
  datagen->add_option("--emit-gold", emit_gold, "write accepted gold items here");

  // generate / eval / bench / report
  auto* generate = app.add_subcommand("generate", "produce thought traces");
  generate->add_option("--config", config_path)->required();
  generate->add_flag("--force", force);
  generate->add_option("--out", out_override);

  auto* eval = app.add_subcommand("eval", "score existing traces");
  eval->add_option("--config", config_path)->required();
  eval->add_flag("--force", force);
  eval->add_option("--out", out_override);

  auto* bench = app.add_subcommand("bench", "generate, score, and report");
  bool ablation = false;
  bench->add_option("--config", config_path)->required();
  bench->add_flag("--force", force);
  bench->add_flag("--ablation", ablation, "run the four mirror stage configurations");
  bench->add_option("--out", out_override);

  auto* report = app.add_subcommand("report", "re-render reports from records");
  report->add_option("--config", config_path)->required();
  report->add_option("--out", out_override);

  // mc
  auto* mc = app.add_subcommand("mc", "multiple-choice harness");
  std::string mc_items, mc_method;
  mc->add_option("--config", config_path)->required();
  mc->add_option("--items", mc_items, "mc items JSONL")->required();
  mc->add_option("--method", mc_method, "generate thoughts with this method first");
  mc->add_option("--out", out_override);

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return cmd_ingest(ingest_root, expect_official);
    if (index->parsed()) {
      return cmd_index(load_config(config_path, false, out_override), index_character);
    }
    if (datagen->parsed()) {
      return cmd_datagen(load_config(config_path, false, out_override), articles,
                         review_export, review_import, emit_gold);
    }
    if (generate->parsed()) {
      auto rpt = tb::benchrun::run_generate(load_config(config_path, force, out_override));
      return report_exit(rpt);
    }
    if (eval->parsed()) {
      auto rpt = tb::benchrun::run_eval(load_config(config_path, force, out_override));
      print_aggregates(rpt);
      return report_exit(rpt);
    }
    if (bench->parsed()) {
      auto cfg = load_config(config_path, force, out_override);
      auto rpt = ablation ? tb::benchrun::run_ablation(cfg) : tb::benchrun::run_benchmark(cfg);
      print_aggregates(rpt);
      return report_exit(rpt);
    }
    if (report->parsed()) {
      auto rpt = tb::benchrun::rebuild_report(load_config(config_path, false, out_override));
      print_aggregates(rpt);
      return report_exit(rpt);
    }
    if (mc->parsed()) {
      auto cfg = load_config(config_path, false, out_override);
      std::optional<std::string> method;
      if (!mc_method.empty()) method = mc_method;
      tb::benchrun::McReport rpt = tb::benchrun::run_mc(cfg, mc_items, method);
      tb::benchrun::emit_mc_report(rpt, cfg.output_dir);
      std::printf("mc accuracy: %zu/%zu = %.4f\n", rpt.correct, rpt.results.size(),
                  rpt.accuracy);
      if (!rpt.errors.empty()) {
        std::cerr << rpt.errors.size() << " mc item(s) failed\n";
        return 2;
      }
      return 0;
    }
  } catch (const tb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
