#include "thoughtbench/benchrun.hpp"

#include "thoughtbench/common.hpp"
#include "thoughtbench/memindex.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace thoughtbench::benchrun {

using nlohmann::json;

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
  std::string v = ascii_lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  raise("ConfigError", "key '" + key + "' expects a boolean, got '" + value + "'");
}

long parse_long(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    raise("ConfigError", "key '" + key + "' expects an integer, got '" + value + "'");
  }
}

const std::set<std::string> kKnownKeys = {
    "corpus_root", "output_dir", "methods", "mode", "cassette", "record",
    "record_cassette", "chat_model", "embed_model", "endpoint_url", "nli_url",
    "credential_env", "mock_script", "concurrency", "chunk_size", "retrieval_k",
    "per_event_k", "retrieval_query_tokens", "max_context_tokens",
    "max_output_tokens", "mirror_memory", "mirror_tom", "mirror_summary",
    "metrics", "sets", "nli_direction", "nli_split_sentences", "force",
    "prompt_dir", "in_flight_limit", "max_attempts"};

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    raise("ConfigError", "config file not found: " + path.string());
  }
  std::map<std::string, std::string> kv;
  const std::vector<std::string> lines = split_lines(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      raise("ConfigError",
            "line " + std::to_string(i + 1) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      raise("ConfigError", "line " + std::to_string(i + 1) + ": empty key");
    }
    kv[key] = value;
  }
  return from_kv(kv, path.parent_path());
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv,
                             const std::filesystem::path& base_dir) {
  for (const auto& [key, value] : kv) {
    if (!kKnownKeys.count(key)) {
      raise("ConfigError", "unknown config key '" + key + "'");
    }
  }
  auto get = [&](const char* key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  RunConfig cfg;
  if (kv.count("corpus_root")) cfg.corpus_root = resolve(kv.at("corpus_root"));
  cfg.output_dir = resolve(get("output_dir", "out"));

  thoughtgen::MethodParams params;
  params.retrieval_k = static_cast<std::size_t>(
      parse_long(get("retrieval_k", "3"), "retrieval_k"));
  params.per_event_k = static_cast<std::size_t>(
      parse_long(get("per_event_k", "1"), "per_event_k"));
  params.retrieval_query_tokens = static_cast<std::size_t>(
      parse_long(get("retrieval_query_tokens", "512"), "retrieval_query_tokens"));
  params.max_context_tokens = static_cast<std::size_t>(
      parse_long(get("max_context_tokens", "128000"), "max_context_tokens"));
  params.max_output_tokens = static_cast<int>(
      parse_long(get("max_output_tokens", "400"), "max_output_tokens"));
  params.switches.memory = parse_bool(get("mirror_memory", "true"), "mirror_memory");
  params.switches.tom = parse_bool(get("mirror_tom", "true"), "mirror_tom");
  params.switches.summary = parse_bool(get("mirror_summary", "true"), "mirror_summary");

  for (const std::string& name : split_list(get("methods", "zero_shot"), ',')) {
    thoughtgen::ProfilingMethod method;
    method.kind = thoughtgen::method_kind_from_string(name);
    method.params = params;
    cfg.methods.push_back(std::move(method));
  }
  if (cfg.methods.empty()) {
    raise("ConfigError", "at least one method must be enabled");
  }

  const std::string mode = ascii_lower(get("mode", "mock"));
  if (mode == "mock") cfg.gateway.mode = gateway::BackendKind::Mock;
  else if (mode == "replay") cfg.gateway.mode = gateway::BackendKind::Replay;
  else if (mode == "live") cfg.gateway.mode = gateway::BackendKind::Live;
  else raise("ConfigError", "mode must be mock, replay, or live");

  cfg.gateway.chat_model = get("chat_model", cfg.gateway.chat_model);
  cfg.gateway.embed_model = get("embed_model", cfg.gateway.embed_model);
  cfg.gateway.endpoint_url = get("endpoint_url", "");
  cfg.gateway.nli_url = get("nli_url", "");
  cfg.gateway.credential_env = get("credential_env", cfg.gateway.credential_env);
  if (kv.count("cassette")) {
    cfg.gateway.cassette_path = resolve(kv.at("cassette")).string();
  }
  cfg.gateway.record = parse_bool(get("record", "false"), "record");
  if (kv.count("record_cassette")) {
    cfg.record_cassette_path = resolve(kv.at("record_cassette"));
  } else if (cfg.gateway.record && !cfg.gateway.cassette_path.empty()) {
    cfg.record_cassette_path = cfg.gateway.cassette_path;
  }
  cfg.gateway.max_attempts = static_cast<int>(
      parse_long(get("max_attempts", "3"), "max_attempts"));
  cfg.gateway.in_flight_limit = static_cast<int>(
      parse_long(get("in_flight_limit", "4"), "in_flight_limit"));
  if (kv.count("mock_script")) {
    cfg.gateway.mock = gateway::MockScript::load(resolve(kv.at("mock_script")));
  } else {
    cfg.gateway.mock = gateway::MockScript::builtin();
  }
  if (cfg.gateway.mode == gateway::BackendKind::Replay &&
      cfg.gateway.cassette_path.empty()) {
    raise("ConfigError", "replay mode requires a cassette path");
  }
  if (cfg.gateway.mode == gateway::BackendKind::Live && cfg.gateway.endpoint_url.empty()) {
    raise("ConfigError", "live mode requires endpoint_url");
  }

  cfg.concurrency = static_cast<int>(parse_long(get("concurrency", "4"), "concurrency"));
  if (cfg.concurrency < 1) {
    raise("ConfigError", "concurrency must be >= 1");
  }
  cfg.chunk_size = static_cast<std::size_t>(
      parse_long(get("chunk_size", "1000"), "chunk_size"));
  if (cfg.chunk_size == 0) {
    raise("ConfigError", "chunk_size must be > 0");
  }

  cfg.use_gold = cfg.use_silver = false;
  for (const std::string& set : split_list(get("sets", "gold, silver"), ',')) {
    if (set == "gold") cfg.use_gold = true;
    else if (set == "silver") cfg.use_silver = true;
    else raise("ConfigError", "unknown set '" + set + "'");
  }
  if (!cfg.use_gold && !cfg.use_silver) {
    raise("ConfigError", "at least one of gold/silver must be enabled");
  }

  cfg.metric_bleu = cfg.metric_rouge = cfg.metric_nli = cfg.metric_judge = false;
  for (const std::string& metric :
       split_list(get("metrics", "bleu, rouge_l, nli, judge"), ',')) {
    if (metric == "bleu") cfg.metric_bleu = true;
    else if (metric == "rouge_l") cfg.metric_rouge = true;
    else if (metric == "nli") cfg.metric_nli = true;
    else if (metric == "judge") cfg.metric_judge = true;
    else raise("ConfigError", "unknown metric '" + metric + "'");
  }
  if (!cfg.metric_bleu && !cfg.metric_rouge && !cfg.metric_nli && !cfg.metric_judge) {
    raise("ConfigError", "at least one metric must be enabled");
  }

  const std::string direction = get("nli_direction", "generated_to_reference");
  if (direction == "generated_to_reference") {
    cfg.nli_options.direction = evalmetrics::NliDirection::GeneratedToReference;
  } else if (direction == "reference_to_generated") {
    cfg.nli_options.direction = evalmetrics::NliDirection::ReferenceToGenerated;
  } else {
    raise("ConfigError", "unknown nli_direction '" + direction + "'");
  }
  cfg.nli_options.split_sentences =
      parse_bool(get("nli_split_sentences", "false"), "nli_split_sentences");

  cfg.force = parse_bool(get("force", "false"), "force");
  if (kv.count("prompt_dir")) cfg.prompt_dir = resolve(kv.at("prompt_dir"));

  // Hash everything that affects results; output_dir and force only steer
  // where artifacts land and whether caches are honored.
  std::string normalized;
  for (const auto& [key, value] : kv) {
    if (key == "force" || key == "output_dir") continue;
    normalized += key + "=" + value + "\n";
  }
  cfg.config_hash = stable_digest(normalized);
  return cfg;
}

namespace {

std::string slug(const std::string& name) {
  std::string out;
  for (char c : name) {
    out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  }
  return out;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (count == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(count));
  for (int w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

struct RunContext {
  const RunConfig& cfg;
  corpus::CorpusStore store;
  std::vector<corpus::BenchmarkItem> items;
  gateway::Gateway gw;
  prompts::PromptCatalog catalog;
  std::map<std::string, corpus::CharacterProfile> stub_profiles;
  std::map<std::string, memindex::MemoryIndex> indexes;
  std::map<std::string, std::vector<corpus::Chapter>> chapters_by_character;

  explicit RunContext(const RunConfig& config)
      : cfg(config), store(corpus::CorpusStore::load(config.corpus_root)),
        gw(config.gateway),
        catalog(config.prompt_dir.empty()
                    ? prompts::PromptCatalog::builtin()
                    : prompts::PromptCatalog::from_dir(config.prompt_dir)) {}

  const corpus::CharacterProfile& profile_for(const std::string& character) {
    if (const corpus::CharacterProfile* p = store.find_profile(character)) return *p;
    auto it = stub_profiles.find(character);
    if (it != stub_profiles.end()) return it->second;
    corpus::CharacterProfile stub;
    stub.name = character;
    return stub_profiles.emplace(character, std::move(stub)).first->second;
  }
};

void load_items(RunContext& ctx) {
  const corpus::Manifest& manifest = ctx.store.manifest;
  if (ctx.cfg.use_gold) {
    if (manifest.gold.empty()) {
      raise("ConfigError", "manifest has no gold dataset");
    }
    corpus::Dataset gold = corpus::load_dataset(manifest.root / manifest.gold,
                                                corpus::SetKind::Gold, &ctx.store.characters);
    ctx.items.insert(ctx.items.end(), gold.items.begin(), gold.items.end());
  }
  if (ctx.cfg.use_silver) {
    if (manifest.silver.empty()) {
      raise("ConfigError", "manifest has no silver dataset");
    }
    corpus::Dataset silver = corpus::load_dataset(
        manifest.root / manifest.silver, corpus::SetKind::Silver, &ctx.store.characters);
    ctx.items.insert(ctx.items.end(), silver.items.begin(), silver.items.end());
  }
}

// Builds (or loads) indexes and chapter lists for the characters the run
// touches; single-writer, before the parallel phase.
void prepare_memory(RunContext& ctx) {
  bool needs_index = false;
  bool needs_chapters = false;
  for (const thoughtgen::ProfilingMethod& m : ctx.cfg.methods) {
    if (m.kind == thoughtgen::MethodKind::RetrievalBased) needs_index = true;
    if (m.kind == thoughtgen::MethodKind::Mirror && m.params.switches.memory)
      needs_index = true;
    if (m.kind == thoughtgen::MethodKind::LongContext) needs_chapters = true;
  }
  if (!needs_index && !needs_chapters) return;

  std::set<std::string> characters;
  for (const corpus::BenchmarkItem& item : ctx.items) characters.insert(item.character);
  for (const std::string& character : characters) {
    std::vector<corpus::Chapter> chapters = ctx.store.chapters_for(character);
    if (needs_chapters) ctx.chapters_by_character[character] = chapters;
    if (needs_index && !chapters.empty()) {
      std::filesystem::path sidecar =
          ctx.cfg.output_dir / "indexes" / (slug(character) + ".jsonl");
      std::filesystem::create_directories(sidecar.parent_path());
      ctx.indexes.emplace(character,
                          memindex::load_or_build(sidecar, character, chapters,
                                                  ctx.cfg.chunk_size, ctx.gw));
    }
  }
}

evalmetrics::EvalRecord evaluate_trace(RunContext& ctx, const thoughtgen::ThoughtTrace& trace,
                                       const corpus::BenchmarkItem& item,
                                       const std::string& label) {
  evalmetrics::EvalRecord record;
  record.item_id = item.id;
  record.method = label;
  record.set_kind = item.set_kind;
  record.thought_tokens = static_cast<long>(count_tokens(trace.final_thought));
  if (ctx.cfg.metric_bleu) {
    record.bleu = evalmetrics::bleu(trace.final_thought, item.reference);
  }
  if (ctx.cfg.metric_rouge) {
    record.rouge_l = evalmetrics::rouge_l(trace.final_thought, item.reference);
  }
  if (ctx.cfg.metric_nli) {
    record.nli_entailment = evalmetrics::nli_entailment(
        ctx.gw, trace.final_thought, item.reference, ctx.cfg.nli_options);
  }
  if (ctx.cfg.metric_judge) {
    evalmetrics::JudgeInputs inputs;
    inputs.set_kind = item.set_kind;
    inputs.generated = trace.final_thought;
    if (item.set_kind == corpus::SetKind::Gold) {
      inputs.reference = item.reference;
    } else {
      inputs.profile = thoughtgen::base_profile_text(ctx.profile_for(item.character));
      inputs.context = item.scenario;
    }
    evalmetrics::JudgeResult judged = evalmetrics::llm_judge(ctx.gw, ctx.catalog, inputs);
    record.judge_score = judged.score;
    record.judge_rationale = judged.rationale;
  }
  return record;
}

std::filesystem::path trace_path(const RunConfig& cfg, const std::string& label,
                                 const std::string& item_id) {
  return cfg.output_dir / "traces" / slug(label) / (slug(item_id) + ".json");
}

std::filesystem::path record_path(const RunConfig& cfg, const std::string& label,
                                  const std::string& item_id) {
  return cfg.output_dir / "records" / slug(label) / (slug(item_id) + ".json");
}

std::string meta_generated_at(const RunContext& ctx) {
  switch (ctx.cfg.gateway.mode) {
    case gateway::BackendKind::Live: return iso8601_utc_now();
    case gateway::BackendKind::Replay: {
      std::string at = ctx.gw.replay_metadata().created_at;
      return at.empty() ? "replay" : at;
    }
    case gateway::BackendKind::Mock: return "mock";
  }
  return "unknown";
}

evalmetrics::RunMeta make_meta(const RunContext& ctx) {
  evalmetrics::RunMeta meta;
  meta.chat_model = ctx.cfg.gateway.chat_model;
  meta.embed_model = ctx.cfg.gateway.embed_model;
  meta.config_hash = ctx.cfg.config_hash;
  meta.generated_at = meta_generated_at(ctx);
  meta.nli_direction =
      ctx.cfg.nli_options.direction == evalmetrics::NliDirection::GeneratedToReference
          ? "generated_to_reference"
          : "reference_to_generated";
  return meta;
}

enum class RunStage { GenerateOnly, EvalOnly, Full };

evalmetrics::RunReport run_stages(const RunConfig& cfg, RunStage stage) {
  RunContext ctx(cfg);
  load_items(ctx);
  prepare_memory(ctx);
  thoughtgen::ThoughtGenerator generator(ctx.gw, ctx.catalog);

  struct Task {
    std::size_t method_index;
    std::size_t item_index;
  };
  std::vector<Task> tasks;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    for (std::size_t i = 0; i < ctx.items.size(); ++i) {
      tasks.push_back({m, i});
    }
  }

  std::vector<std::optional<evalmetrics::EvalRecord>> records(tasks.size());
  std::vector<std::optional<evalmetrics::RunError>> errors(tasks.size());

  if (cfg.gateway.record) ctx.gw.start_recording();

  parallel_for(tasks.size(), cfg.concurrency, [&](std::size_t t) {
    const Task& task = tasks[t];
    const thoughtgen::ProfilingMethod& method = cfg.methods[task.method_index];
    const corpus::BenchmarkItem& item = ctx.items[task.item_index];
    const std::string label = thoughtgen::method_label(method);
    try {
      const std::filesystem::path rec_path = record_path(cfg, label, item.id);
      if (stage != RunStage::GenerateOnly && !cfg.force &&
          std::filesystem::exists(rec_path)) {
        json j = json::parse(read_file(rec_path), nullptr, false);
        if (!j.is_discarded() && j.value("config_hash", "") == cfg.config_hash) {
          records[t] = evalmetrics::record_from_json(j.at("record"));
          return;
        }
      }

      thoughtgen::ThoughtTrace trace;
      const std::filesystem::path tr_path = trace_path(cfg, label, item.id);
      bool have_trace = false;
      if (!cfg.force && std::filesystem::exists(tr_path)) {
        json j = json::parse(read_file(tr_path), nullptr, false);
        if (!j.is_discarded() && j.value("config_hash", "") == cfg.config_hash) {
          trace = thoughtgen::trace_from_json(j.at("trace"));
          have_trace = true;
        }
      }
      if (!have_trace) {
        if (stage == RunStage::EvalOnly) {
          raise("MissingTrace", "no trace for item " + item.id + " under method " + label);
        }
        thoughtgen::GenerationInput input;
        input.method = method;
        input.profile = &ctx.profile_for(item.character);
        input.item = &item;
        auto idx = ctx.indexes.find(item.character);
        input.index = idx == ctx.indexes.end() ? nullptr : &idx->second;
        auto chapters = ctx.chapters_by_character.find(item.character);
        input.chapters = chapters == ctx.chapters_by_character.end()
                             ? nullptr
                             : &chapters->second;
        trace = generator.generate(input);
        json wrapper;
        wrapper["config_hash"] = cfg.config_hash;
        wrapper["trace"] = thoughtgen::trace_to_json(trace);
        write_file_atomic(tr_path, wrapper.dump(2) + "\n");
      }

      if (stage == RunStage::GenerateOnly) return;

      evalmetrics::EvalRecord record = evaluate_trace(ctx, trace, item, label);
      json wrapper;
      wrapper["config_hash"] = cfg.config_hash;
      wrapper["record"] = evalmetrics::record_to_json(record);
      write_file_atomic(record_path(cfg, label, item.id), wrapper.dump(2) + "\n");
      records[t] = std::move(record);
    } catch (const Error& e) {
      errors[t] = evalmetrics::RunError{item.id, label, e.code(), e.what()};
    } catch (const std::exception& e) {
      errors[t] = evalmetrics::RunError{item.id, label, "InternalError", e.what()};
    }
  });

  if (cfg.gateway.record) {
    gateway::Cassette cassette = ctx.gw.stop_recording();
    if (!cfg.record_cassette_path.empty()) {
      gateway::save_cassette(cassette, cfg.record_cassette_path);
    }
  }

  std::vector<evalmetrics::EvalRecord> flat;
  std::vector<evalmetrics::RunError> flat_errors;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (records[t]) flat.push_back(*records[t]);
    if (errors[t]) flat_errors.push_back(*errors[t]);
  }

  evalmetrics::RunReport report;
  if (!flat.empty()) {
    report = evalmetrics::aggregate(std::move(flat), make_meta(ctx));
  } else {
    report.meta = make_meta(ctx);
  }
  report.errors = std::move(flat_errors);
  return report;
}

}  // namespace

evalmetrics::RunReport run_benchmark(const RunConfig& config) {
  evalmetrics::RunReport report = run_stages(config, RunStage::Full);
  emit_report(report, config.output_dir);
  return report;
}

evalmetrics::RunReport run_ablation(const RunConfig& config) {
  bool has_mirror = std::any_of(
      config.methods.begin(), config.methods.end(),
      [](const auto& m) { return m.kind == thoughtgen::MethodKind::Mirror; });
  if (!has_mirror) {
    raise("ConfigError", "ablation requires the mirror method");
  }
  thoughtgen::MethodParams base;
  for (const thoughtgen::ProfilingMethod& m : config.methods) {
    if (m.kind == thoughtgen::MethodKind::Mirror) base = m.params;
  }

  RunConfig sweep = config;
  sweep.methods.clear();
  auto add = [&](const char* label, bool memory, bool tom, bool summary) {
    thoughtgen::ProfilingMethod method;
    method.kind = thoughtgen::MethodKind::Mirror;
    method.params = base;
    method.params.switches = {memory, tom, summary};
    method.label = label;
    sweep.methods.push_back(std::move(method));
  };
  add("mirror_full", true, true, true);
  add("mirror_no_memory", false, true, true);
  add("mirror_no_tom", true, false, true);
  add("mirror_no_summary", true, true, false);

  evalmetrics::RunReport report = run_stages(sweep, RunStage::Full);
  emit_report(report, sweep.output_dir);
  return report;
}

std::vector<McItem> load_mc_items(const std::filesystem::path& path) {
  std::vector<McItem> items;
  const std::vector<std::string> lines = split_lines(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    json j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      raise("MalformedRecord", "mc line " + std::to_string(i + 1) + ": invalid JSON");
    }
    McItem item;
    item.id = j.at("id").get<std::string>();
    item.character = j.value("character", "");
    item.scenario = j.at("scenario").get<std::string>();
    item.question = j.at("question").get<std::string>();
    for (const auto& c : j.at("choices")) {
      item.choices.push_back(c.get<std::string>());
    }
    item.answer_index = j.at("answer_index").get<int>();
    if (item.choices.size() < 2 || item.choices.size() > 6) {
      raise("MalformedRecord", "mc line " + std::to_string(i + 1) +
                                   ": choices must number 2..6");
    }
    if (item.answer_index < 0 ||
        item.answer_index >= static_cast<int>(item.choices.size())) {
      raise("MalformedRecord",
            "mc line " + std::to_string(i + 1) + ": answer_index out of range");
    }
    if (j.contains("memory")) item.memory = j["memory"].get<std::string>();
    items.push_back(std::move(item));
  }
  return items;
}

std::optional<int> parse_choice_letter(const std::string& reply, std::size_t n_choices) {
  auto alnum = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
  };
  const std::size_t max_letters = std::min<std::size_t>(n_choices, 6);
  for (std::size_t i = 0; i < reply.size(); ++i) {
    char c = reply[i];
    char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (upper < 'A' || upper >= static_cast<char>('A' + max_letters)) continue;
    const bool left_ok = i == 0 || !alnum(reply[i - 1]);
    const bool right_ok = i + 1 >= reply.size() || !alnum(reply[i + 1]);
    if (left_ok && right_ok) return upper - 'A';
  }
  return std::nullopt;
}

McResult answer_mc(gateway::Gateway& gw, const prompts::PromptCatalog& catalog,
                   const McItem& item, const std::optional<std::string>& thought,
                   const std::optional<std::string>& thought_method) {
  std::string choices;
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    choices += static_cast<char>('A' + i);
    choices += ". " + item.choices[i] + "\n";
  }
  std::string thought_section;
  if (thought) {
    thought_section = "Inner thoughts:\n" + *thought + "\n\n";
  }
  std::string prompt = prompts::PromptCatalog::render(
      catalog.get(prompts::kMultipleChoice),
      {{"<character>", item.character.empty() ? "the character" : item.character},
       {"<scenario>", item.scenario},
       {"<thought_section>", thought_section},
       {"<question>", item.question},
       {"<choices>", choices}});

  gateway::ChatRequest req;
  req.messages.push_back({gateway::Role::User, prompt});
  req.max_output_tokens = 100;
  req.seed = 0;
  gateway::ChatResponse first = gw.chat(req);
  std::optional<int> chosen = parse_choice_letter(first.content, item.choices.size());
  if (!chosen) {
    gateway::ChatRequest retry = req;
    retry.messages.push_back({gateway::Role::Assistant, first.content});
    retry.messages.push_back(
        {gateway::Role::User, "Reply with only the letter of your choice."});
    gateway::ChatResponse second = gw.chat(retry);
    chosen = parse_choice_letter(second.content, item.choices.size());
    if (!chosen) {
      raise("ChoiceParseFailure", "no choice letter in the reply for item " + item.id);
    }
  }
  McResult result;
  result.item_id = item.id;
  result.chosen_index = *chosen;
  result.correct = *chosen == item.answer_index;
  result.with_thought = thought.has_value();
  result.thought_method = thought_method;
  return result;
}

McReport run_mc(const RunConfig& config, const std::filesystem::path& items_path,
                const std::optional<std::string>& method_name) {
  std::vector<McItem> items = load_mc_items(items_path);
  gateway::Gateway gw(config.gateway);
  prompts::PromptCatalog catalog = config.prompt_dir.empty()
                                       ? prompts::PromptCatalog::builtin()
                                       : prompts::PromptCatalog::from_dir(config.prompt_dir);
  thoughtgen::ThoughtGenerator generator(gw, catalog);

  std::optional<corpus::CorpusStore> store;
  if (!config.corpus_root.empty() &&
      std::filesystem::exists(config.corpus_root / "manifest.json")) {
    store = corpus::CorpusStore::load(config.corpus_root);
  }

  std::optional<thoughtgen::ProfilingMethod> method;
  if (method_name) {
    thoughtgen::ProfilingMethod m;
    m.kind = thoughtgen::method_kind_from_string(*method_name);
    for (const thoughtgen::ProfilingMethod& configured : config.methods) {
      if (configured.kind == m.kind) m = configured;
    }
    method = m;
  }

  McReport report;
  report.thought_method = method_name;
  std::map<std::string, corpus::CharacterProfile> stubs;

  for (const McItem& item : items) {
    try {
      std::optional<std::string> thought;
      if (method) {
        corpus::CharacterProfile profile;
        if (store) {
          if (const corpus::CharacterProfile* p = store->find_profile(item.character)) {
            profile = *p;
          }
        }
        if (profile.name.empty()) {
          profile.name = item.character.empty() ? "the character" : item.character;
        }

        corpus::BenchmarkItem pseudo;
        pseudo.id = item.id;
        pseudo.set_kind = corpus::SetKind::Silver;
        pseudo.character = profile.name;
        pseudo.scenario = item.scenario;
        pseudo.reference = "-";
        pseudo.motivation_notes = "-";

        std::vector<corpus::Chapter> chapters;
        std::optional<memindex::MemoryIndex> index;
        if (item.memory) {
          corpus::Chapter memory_chapter;
          memory_chapter.id = item.id + "-memory";
          memory_chapter.character = profile.name;
          memory_chapter.sequence_index = 0;
          memory_chapter.text = *item.memory;
          memory_chapter.source = "mc-memory";
          chapters.push_back(std::move(memory_chapter));
        } else if (store) {
          chapters = store->chapters_for(profile.name);
        }
        const bool needs_index =
            method->kind == thoughtgen::MethodKind::RetrievalBased ||
            (method->kind == thoughtgen::MethodKind::Mirror &&
             method->params.switches.memory);
        if (needs_index && !chapters.empty()) {
          index = memindex::build_index(profile.name, chapters, config.chunk_size, gw);
        }

        thoughtgen::GenerationInput input;
        input.method = *method;
        input.profile = &profile;
        input.item = &pseudo;
        input.index = index ? &*index : nullptr;
        input.chapters = &chapters;
        thought = generator.generate(input).final_thought;
      }
      report.results.push_back(answer_mc(gw, catalog, item, thought, method_name));
    } catch (const Error& e) {
      report.errors.push_back({item.id, method_name.value_or("direct"), e.code(), e.what()});
    }
  }

  for (const McResult& r : report.results) {
    if (r.correct) ++report.correct;
  }
  report.accuracy = report.results.empty()
                        ? 0.0
                        : static_cast<double>(report.correct) / report.results.size();
  return report;
}

namespace {

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return std::string(buf);
}

struct ColumnFlags {
  bool bleu = false;
  bool rouge = false;
  bool nli = false;
  bool judge = false;
};

ColumnFlags present_columns(const evalmetrics::RunReport& report) {
  ColumnFlags flags;
  for (const evalmetrics::AggregateRow& row : report.aggregates) {
    flags.bleu |= row.bleu.has_value();
    flags.rouge |= row.rouge_l.has_value();
    flags.nli |= row.nli_entailment.has_value();
    flags.judge |= row.judge_score.has_value();
  }
  return flags;
}

std::string render_csv(const evalmetrics::RunReport& report) {
  const ColumnFlags cols = present_columns(report);
  std::string out = "method,set,n";
  if (cols.bleu) out += ",bleu";
  if (cols.rouge) out += ",rouge_l";
  if (cols.nli) out += ",nli_entailment";
  if (cols.judge) out += ",judge_score";
  out += "\n";
  for (const evalmetrics::AggregateRow& row : report.aggregates) {
    out += row.method + "," + std::string(corpus::to_string(row.set_kind)) + "," +
           std::to_string(row.n);
    auto cell = [&](const std::optional<double>& v, bool enabled) {
      if (!enabled) return;
      out += ",";
      if (v) out += format_full(*v);
    };
    cell(row.bleu, cols.bleu);
    cell(row.rouge_l, cols.rouge);
    cell(row.nli_entailment, cols.nli);
    cell(row.judge_score, cols.judge);
    out += "\n";
  }
  return out;
}

std::string render_markdown(const evalmetrics::RunReport& report) {
  const ColumnFlags cols = present_columns(report);
  std::string out = "# Run report\n\n";
  out += "| Method | Set | N |";
  if (cols.bleu) out += " BLEU | BLEU x100 |";
  if (cols.rouge) out += " ROUGE-L | ROUGE-L x100 |";
  if (cols.nli) out += " NLI | NLI x100 |";
  if (cols.judge) out += " Judge |";
  out += "\n|---|---|---|";
  if (cols.bleu) out += "---|---|";
  if (cols.rouge) out += "---|---|";
  if (cols.nli) out += "---|---|";
  if (cols.judge) out += "---|";
  out += "\n";
  for (const evalmetrics::AggregateRow& row : report.aggregates) {
    out += "| " + row.method + " | " + std::string(corpus::to_string(row.set_kind)) +
           " | " + std::to_string(row.n) + " |";
    auto cell = [&](const std::optional<double>& v, bool enabled, bool best,
                    bool with_x100) {
      if (!enabled) return;
      if (!v) {
        out += with_x100 ? "  |  |" : "  |";
        return;
      }
      std::string value = format_fixed(*v, 4);
      if (best) value = "**" + value + "**";
      out += " " + value + " |";
      if (with_x100) out += " " + format_fixed(*v * 100.0, 2) + " |";
    };
    cell(row.bleu, cols.bleu, row.best_bleu, true);
    cell(row.rouge_l, cols.rouge, row.best_rouge_l, true);
    cell(row.nli_entailment, cols.nli, row.best_nli, true);
    cell(row.judge_score, cols.judge, row.best_judge, false);
    out += "\n";
  }
  out += "\n";
  out += "Bold marks the best value per metric column within each set.\n\n";
  out += "- chat model: " + report.meta.chat_model + "\n";
  out += "- embed model: " + report.meta.embed_model + "\n";
  out += "- config hash: " + report.meta.config_hash + "\n";
  out += "- generated at: " + report.meta.generated_at + "\n";
  out += "- bleu variant: " + report.meta.bleu_variant + "\n";
  out += "- nli direction: " + report.meta.nli_direction + "\n";
  std::vector<std::string> omitted;
  if (!cols.bleu) omitted.push_back("bleu");
  if (!cols.rouge) omitted.push_back("rouge_l");
  if (!cols.nli) omitted.push_back("nli_entailment");
  if (!cols.judge) omitted.push_back("judge_score");
  if (!omitted.empty()) {
    out += "- omitted columns (metric disabled):";
    for (const std::string& name : omitted) out += " " + name;
    out += "\n";
  }
  if (!report.errors.empty()) {
    out += "- per-item errors: " + std::to_string(report.errors.size()) + "\n";
  }
  std::string deltas = render_ablation_deltas(report);
  if (!deltas.empty()) {
    out += "\n" + deltas;
  }
  return out;
}

std::string render_lengths_csv(const evalmetrics::RunReport& report) {
  constexpr long kBinWidth = 50;
  std::map<std::tuple<std::string, std::string, long>, std::size_t> bins;
  for (const evalmetrics::EvalRecord& r : report.records) {
    if (!r.thought_tokens) continue;
    long bin = (*r.thought_tokens / kBinWidth) * kBinWidth;
    ++bins[{r.method, std::string(corpus::to_string(r.set_kind)), bin}];
  }
  std::string out = "method,set,bin_lo,bin_hi,count\n";
  for (const auto& [key, count] : bins) {
    const auto& [method, set, bin] = key;
    out += method + "," + set + "," + std::to_string(bin) + "," +
           std::to_string(bin + kBinWidth) + "," + std::to_string(count) + "\n";
  }
  return out;
}

}  // namespace

std::string render_ablation_deltas(const evalmetrics::RunReport& report) {
  std::map<corpus::SetKind, const evalmetrics::AggregateRow*> baseline;
  for (const evalmetrics::AggregateRow& row : report.aggregates) {
    if (row.method == "mirror_full") baseline[row.set_kind] = &row;
  }
  if (baseline.empty()) return "";

  std::string out = "## Stage sweep vs mirror_full\n\n";
  out += "| Configuration | Set |";
  const ColumnFlags cols = present_columns(report);
  if (cols.bleu) out += " BLEU (delta) |";
  if (cols.rouge) out += " ROUGE-L (delta) |";
  if (cols.nli) out += " NLI (delta) |";
  if (cols.judge) out += " Judge (delta) |";
  out += "\n|---|---|";
  if (cols.bleu) out += "---|";
  if (cols.rouge) out += "---|";
  if (cols.nli) out += "---|";
  if (cols.judge) out += "---|";
  out += "\n";
  for (const evalmetrics::AggregateRow& row : report.aggregates) {
    if (row.method.rfind("mirror_", 0) != 0) continue;
    auto base = baseline.find(row.set_kind);
    const evalmetrics::AggregateRow* b =
        base == baseline.end() ? nullptr : base->second;
    out += "| " + row.method + " | " + std::string(corpus::to_string(row.set_kind)) + " |";
    auto cell = [&](const std::optional<double>& v, bool enabled,
                    const std::optional<double>& base_v) {
      if (!enabled) return;
      if (!v) {
        out += "  |";
        return;
      }
      std::string text = format_fixed(*v, 4);
      if (base_v) {
        double delta = *v - *base_v;
        text += " (" + std::string(delta >= 0 ? "+" : "") + format_fixed(delta, 4) + ")";
      }
      out += " " + text + " |";
    };
    cell(row.bleu, cols.bleu, b ? b->bleu : std::nullopt);
    cell(row.rouge_l, cols.rouge, b ? b->rouge_l : std::nullopt);
    cell(row.nli_entailment, cols.nli, b ? b->nli_entailment : std::nullopt);
    cell(row.judge_score, cols.judge, b ? b->judge_score : std::nullopt);
    out += "\n";
  }
  return out;
}

void emit_report(const evalmetrics::RunReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::string records_out;
  for (const evalmetrics::EvalRecord& r : report.records) {
    records_out += evalmetrics::record_to_json(r).dump() + "\n";
  }
  write_file_atomic(out_dir / "records.jsonl", records_out);
  write_file_atomic(out_dir / "report.csv", render_csv(report));
  write_file_atomic(out_dir / "report.md", render_markdown(report));
  write_file_atomic(out_dir / "lengths.csv", render_lengths_csv(report));

  json meta;
  meta["chat_model"] = report.meta.chat_model;
  meta["embed_model"] = report.meta.embed_model;
  meta["config_hash"] = report.meta.config_hash;
  meta["generated_at"] = report.meta.generated_at;
  meta["bleu_variant"] = report.meta.bleu_variant;
  meta["nli_direction"] = report.meta.nli_direction;
  meta["record_count"] = report.records.size();
  meta["error_count"] = report.errors.size();
  write_file_atomic(out_dir / "meta.json", meta.dump(2) + "\n");

  if (!report.errors.empty()) {
    std::string errors_out;
    for (const evalmetrics::RunError& e : report.errors) {
      json j;
      j["item_id"] = e.item_id;
      j["method"] = e.method;
      j["code"] = e.code;
      j["message"] = e.message;
      errors_out += j.dump() + "\n";
    }
    write_file_atomic(out_dir / "errors.jsonl", errors_out);
  }
}

void emit_mc_report(const McReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::string results_out;
  for (const McResult& r : report.results) {
    json j;
    j["item_id"] = r.item_id;
    j["chosen_index"] = r.chosen_index;
    j["correct"] = r.correct;
    j["with_thought"] = r.with_thought;
    if (r.thought_method) j["thought_method"] = *r.thought_method;
    results_out += j.dump() + "\n";
  }
  write_file_atomic(out_dir / "mc_results.jsonl", results_out);

  std::string csv = "with_thought,method,items,correct,accuracy\n";
  csv += std::string(report.thought_method ? "true" : "false") + "," +
         report.thought_method.value_or("direct") + "," +
         std::to_string(report.results.size()) + "," + std::to_string(report.correct) +
         "," + format_full(report.accuracy) + "\n";
  write_file_atomic(out_dir / "mc_report.csv", csv);
}

evalmetrics::RunReport run_generate(const RunConfig& config) {
  return run_stages(config, RunStage::GenerateOnly);
}

evalmetrics::RunReport run_eval(const RunConfig& config) {
  evalmetrics::RunReport report = run_stages(config, RunStage::EvalOnly);
  emit_report(report, config.output_dir);
  return report;
}

evalmetrics::RunReport rebuild_report(const RunConfig& config) {
  RunContext ctx(config);
  load_items(ctx);

  std::vector<evalmetrics::EvalRecord> records;
  std::vector<evalmetrics::RunError> errors;
  for (const thoughtgen::ProfilingMethod& method : config.methods) {
    const std::string label = thoughtgen::method_label(method);
    for (const corpus::BenchmarkItem& item : ctx.items) {
      std::filesystem::path path = record_path(config, label, item.id);
      if (!std::filesystem::exists(path)) {
        errors.push_back({item.id, label, "MissingRecord", path.string()});
        continue;
      }
      json j = json::parse(read_file(path), nullptr, false);
      if (j.is_discarded()) {
        errors.push_back({item.id, label, "MalformedRecord", path.string()});
        continue;
      }
      records.push_back(evalmetrics::record_from_json(j.at("record")));
    }
  }
  evalmetrics::RunReport report;
  if (!records.empty()) {
    report = evalmetrics::aggregate(std::move(records), make_meta(ctx));
  } else {
    report.meta = make_meta(ctx);
  }
  report.errors = std::move(errors);
  emit_report(report, config.output_dir);
  return report;
}

}  // namespace thoughtbench::benchrun
