#pragma once
// End-to-end run orchestration: generate -> evaluate -> report, the downstream
// multiple-choice harness, ablation sweeps, and report rendering.
//
// Runs are resumable: each (item, method) writes a trace and a record file
// keyed by the config hash; existing matching outputs are reused unless
// forced. Per-item failures are recorded in the report and never abort the
// run. In replay or mock mode two executions of the same config produce
// byte-identical artifacts.

#include "thoughtbench/corpus.hpp"
#include "thoughtbench/evalmetrics.hpp"
#include "thoughtbench/gateway.hpp"
#include "thoughtbench/thoughtgen.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace thoughtbench::benchrun {

struct RunConfig {
  std::filesystem::path corpus_root;
  std::filesystem::path output_dir;
  std::vector<thoughtgen::ProfilingMethod> methods;
  gateway::GatewayConfig gateway;
  std::filesystem::path prompt_dir;  // empty = built-in catalog
  std::filesystem::path record_cassette_path;  // written when gateway.record
  std::size_t chunk_size = 1000;
  int concurrency = 4;
  bool use_gold = true;
  bool use_silver = true;
  bool metric_bleu = true;
  bool metric_rouge = true;
  bool metric_nli = true;
  bool metric_judge = true;
  evalmetrics::NliOptions nli_options;
  bool force = false;
  std::string config_hash;  // computed by the loaders

  // Flat key=value file; '#' starts a comment; paths resolve against the
  // file's directory. Unknown keys are errors.
  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_kv(const std::map<std::string, std::string>& kv,
                           const std::filesystem::path& base_dir);
};

struct McItem {
  std::string id;
  std::string character;
  std::string scenario;
  std::string question;
  std::vector<std::string> choices;  // 2..6
  int answer_index = 0;
  std::optional<std::string> memory;  // threaded into thought generation
};

struct McResult {
  std::string item_id;
  int chosen_index = -1;
  bool correct = false;
  bool with_thought = false;
  std::optional<std::string> thought_method;
};

std::vector<McItem> load_mc_items(const std::filesystem::path& path);

// First standalone letter (A.. within the choice count, case-insensitive,
// optionally parenthesized) in the reply.
std::optional<int> parse_choice_letter(const std::string& reply, std::size_t n_choices);

McResult answer_mc(gateway::Gateway& gw, const prompts::PromptCatalog& catalog,
                   const McItem& item, const std::optional<std::string>& thought,
                   const std::optional<std::string>& thought_method = std::nullopt);

struct McReport {
  std::vector<McResult> results;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::optional<std::string> thought_method;
  std::vector<evalmetrics::RunError> errors;
};

evalmetrics::RunReport run_benchmark(const RunConfig& config);

// Traces only / scores only (scores require existing traces).
evalmetrics::RunReport run_generate(const RunConfig& config);
evalmetrics::RunReport run_eval(const RunConfig& config);

// Mirror over the same items under the four stage configurations
// (mirror_full, mirror_no_memory, mirror_no_tom, mirror_no_summary).
evalmetrics::RunReport run_ablation(const RunConfig& config);

McReport run_mc(const RunConfig& config, const std::filesystem::path& items_path,
                const std::optional<std::string>& method_name);

// report.csv + report.md + records.jsonl + lengths.csv + meta.json (+
// errors.jsonl when per-item errors occurred).
void emit_report(const evalmetrics::RunReport& report,
                 const std::filesystem::path& out_dir);

void emit_mc_report(const McReport& report, const std::filesystem::path& out_dir);

// Re-renders a report from the record files persisted under output_dir.
evalmetrics::RunReport rebuild_report(const RunConfig& config);

// Ablation delta table (vs mirror_full) appended to the markdown report.
std::string render_ablation_deltas(const evalmetrics::RunReport& report);

}  // namespace thoughtbench::benchrun
