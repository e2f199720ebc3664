#include "thoughtbench/evalmetrics.hpp"

#include "thoughtbench/common.hpp"
#include "thoughtbench/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>

namespace thoughtbench::evalmetrics {

using nlohmann::json;

namespace {

// n-gram keyed by tokens joined with a separator byte that cannot occur
// inside a whitespace-delimited token boundary mix-up.
std::string ngram_key(const std::vector<std::string>& tokens, std::size_t start,
                      std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) key.push_back('\x1f');
    key += tokens[start + i];
  }
  return key;
}

}  // namespace

double bleu(const std::string& candidate, const std::string& reference) {
  const std::vector<std::string> cand = word_tokens_lower(candidate);
  const std::vector<std::string> ref = word_tokens_lower(reference);
  if (cand.empty()) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const std::size_t cand_count = cand.size() >= n ? cand.size() - n + 1 : 0;
    std::unordered_map<std::string, std::size_t> ref_counts;
    if (ref.size() >= n) {
      for (std::size_t i = 0; i + n <= ref.size(); ++i) {
        ++ref_counts[ngram_key(ref, i, n)];
      }
    }
    std::unordered_map<std::string, std::size_t> cand_counts;
    for (std::size_t i = 0; i + n <= cand.size(); ++i) {
      ++cand_counts[ngram_key(cand, i, n)];
    }
    std::size_t clipped = 0;
    for (const auto& [key, count] : cand_counts) {
      auto it = ref_counts.find(key);
      if (it != ref_counts.end()) clipped += std::min(count, it->second);
    }
    const double denom = cand_count > 0 ? static_cast<double>(cand_count) : 1.0;
    const double num = clipped > 0 ? static_cast<double>(clipped) : kBleuEpsilon;
    log_sum += std::log(num / denom);
  }
  const double geo_mean = std::exp(log_sum / 4.0);
  const double bp = cand.size() < ref.size()
                        ? std::exp(1.0 - static_cast<double>(ref.size()) /
                                             static_cast<double>(cand.size()))
                        : 1.0;
  return bp * geo_mean;
}

double rouge_l(const std::string& candidate, const std::string& reference) {
  const std::vector<std::string> cand = word_tokens_lower(candidate);
  const std::vector<std::string> ref = word_tokens_lower(reference);
  if (cand.empty() || ref.empty()) return 0.0;

  const std::size_t m = cand.size();
  const std::size_t n = ref.size();
  std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = cand[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[n]);
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(m);
  const double recall = lcs / static_cast<double>(n);
  return 2.0 * precision * recall / (precision + recall);
}

double nli_entailment_pair(gateway::Gateway& gw, const std::string& premise,
                           const std::string& hypothesis) {
  gateway::NliDistribution d = gw.nli(premise, hypothesis);
  const double sum = d.entailment + d.neutral + d.contradiction;
  const bool in_range = d.entailment >= 0.0 && d.entailment <= 1.0 && d.neutral >= 0.0 &&
                        d.neutral <= 1.0 && d.contradiction >= 0.0 && d.contradiction <= 1.0;
  if (!in_range || std::abs(sum - 1.0) > 1e-3) {
    raise("MalformedDistribution",
          "NLI components sum to " + std::to_string(sum) + " or leave [0,1]");
  }
  return d.entailment;
}

namespace {

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    current.push_back(text[i]);
    char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      bool boundary = i + 1 >= text.size() ||
                      std::isspace(static_cast<unsigned char>(text[i + 1]));
      if (boundary) {
        std::string trimmed = trim(current);
        if (!trimmed.empty()) sentences.push_back(std::move(trimmed));
        current.clear();
      }
    }
  }
  std::string rest = trim(current);
  if (!rest.empty()) sentences.push_back(std::move(rest));
  return sentences;
}

}  // namespace

double nli_entailment(gateway::Gateway& gw, const std::string& generated,
                      const std::string& reference, const NliOptions& options) {
  const bool gen_first = options.direction == NliDirection::GeneratedToReference;
  const std::string& premise = gen_first ? generated : reference;
  const std::string& hypothesis = gen_first ? reference : generated;
  if (!options.split_sentences) {
    return nli_entailment_pair(gw, premise, hypothesis);
  }
  std::vector<std::string> sentences = split_sentences(hypothesis);
  if (sentences.empty()) return nli_entailment_pair(gw, premise, hypothesis);
  double sum = 0.0;
  for (const std::string& s : sentences) {
    sum += nli_entailment_pair(gw, premise, s);
  }
  return sum / static_cast<double>(sentences.size());
}

std::optional<int> parse_judge_score(const std::string& reply) {
  auto alnum = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
  };
  for (std::size_t i = 0; i < reply.size(); ++i) {
    char c = reply[i];
    if (c < '1' || c > '5') continue;
    const bool left_ok = i == 0 || !alnum(reply[i - 1]);
    const bool right_ok = i + 1 >= reply.size() || !alnum(reply[i + 1]);
    if (left_ok && right_ok) return c - '0';
  }
  return std::nullopt;
}

JudgeResult llm_judge(gateway::Gateway& gw, const prompts::PromptCatalog& catalog,
                      const JudgeInputs& inputs) {
  std::string prompt;
  if (inputs.set_kind == corpus::SetKind::Gold) {
    prompt = prompts::PromptCatalog::render(
        catalog.get(prompts::kJudgeGold),
        {{"<reference>", inputs.reference}, {"<generated>", inputs.generated}});
  } else {
    prompt = prompts::PromptCatalog::render(catalog.get(prompts::kJudgeSilver),
                                            {{"<profile>", inputs.profile},
                                             {"<context>", inputs.context},
                                             {"<generated>", inputs.generated}});
  }

  gateway::ChatRequest req;
  req.messages.push_back({gateway::Role::User, prompt});
  req.max_output_tokens = 400;
  req.seed = 0;
  gateway::ChatResponse first = gw.chat(req);
  if (auto score = parse_judge_score(first.content)) {
    return {*score, first.content};
  }
  // one re-ask
  gateway::ChatRequest retry = req;
  retry.messages.push_back({gateway::Role::Assistant, first.content});
  retry.messages.push_back(
      {gateway::Role::User, "Reply with a single score digit from 1 to 5."});
  gateway::ChatResponse second = gw.chat(retry);
  if (auto score = parse_judge_score(second.content)) {
    return {*score, second.content};
  }
  raise("JudgeParseFailure", "no standalone digit 1-5 in the judge reply");
}

json record_to_json(const EvalRecord& record) {
  json j;
  j["item_id"] = record.item_id;
  j["method"] = record.method;
  j["set_kind"] = std::string(corpus::to_string(record.set_kind));
  if (record.bleu) j["bleu"] = *record.bleu;
  if (record.rouge_l) j["rouge_l"] = *record.rouge_l;
  if (record.nli_entailment) j["nli_entailment"] = *record.nli_entailment;
  if (record.judge_score) {
    j["judge_score"] = *record.judge_score;
    j["judge_rationale"] = record.judge_rationale;
  }
  if (record.thought_tokens) j["thought_tokens"] = *record.thought_tokens;
  return j;
}

EvalRecord record_from_json(const json& j) {
  EvalRecord record;
  record.item_id = j.at("item_id").get<std::string>();
  record.method = j.at("method").get<std::string>();
  record.set_kind = corpus::set_kind_from_string(j.at("set_kind").get<std::string>());
  if (j.contains("bleu")) record.bleu = j["bleu"].get<double>();
  if (j.contains("rouge_l")) record.rouge_l = j["rouge_l"].get<double>();
  if (j.contains("nli_entailment")) {
    record.nli_entailment = j["nli_entailment"].get<double>();
  }
  if (j.contains("judge_score")) {
    record.judge_score = j["judge_score"].get<int>();
    record.judge_rationale = j.value("judge_rationale", "");
  }
  if (j.contains("thought_tokens")) {
    record.thought_tokens = j["thought_tokens"].get<long>();
  }
  return record;
}

RunReport aggregate(std::vector<EvalRecord> records, RunMeta meta) {
  if (records.empty()) {
    raise("EmptyRun", "no records to aggregate");
  }
  RunReport report;
  report.meta = std::move(meta);

  struct Sums {
    std::size_t n = 0;
    double bleu = 0, rouge = 0, nli = 0, judge = 0;
    std::size_t n_bleu = 0, n_rouge = 0, n_nli = 0, n_judge = 0;
  };
  // map keeps (method, set) rows in a deterministic order; method order is
  // re-imposed from first appearance below.
  std::vector<std::pair<std::string, corpus::SetKind>> order;
  std::map<std::string, Sums> sums;
  auto key_of = [](const std::string& method, corpus::SetKind kind) {
    return method + "\x1f" + std::string(corpus::to_string(kind));
  };
  for (const EvalRecord& r : records) {
    std::string key = key_of(r.method, r.set_kind);
    if (!sums.count(key)) order.emplace_back(r.method, r.set_kind);
    Sums& s = sums[key];
    ++s.n;
    if (r.bleu) { s.bleu += *r.bleu; ++s.n_bleu; }
    if (r.rouge_l) { s.rouge += *r.rouge_l; ++s.n_rouge; }
    if (r.nli_entailment) { s.nli += *r.nli_entailment; ++s.n_nli; }
    if (r.judge_score) { s.judge += *r.judge_score; ++s.n_judge; }
  }
  for (const auto& [method, kind] : order) {
    const Sums& s = sums[key_of(method, kind)];
    AggregateRow row;
    row.method = method;
    row.set_kind = kind;
    row.n = s.n;
    if (s.n_bleu) row.bleu = s.bleu / static_cast<double>(s.n_bleu);
    if (s.n_rouge) row.rouge_l = s.rouge / static_cast<double>(s.n_rouge);
    if (s.n_nli) row.nli_entailment = s.nli / static_cast<double>(s.n_nli);
    if (s.n_judge) row.judge_score = s.judge / static_cast<double>(s.n_judge);
    report.aggregates.push_back(row);
  }

  // flag the best value per metric column within each set
  for (corpus::SetKind kind : {corpus::SetKind::Gold, corpus::SetKind::Silver}) {
    auto flag_best = [&](auto member, auto flag_member) {
      double best = -1.0;
      for (const AggregateRow& row : report.aggregates) {
        if (row.set_kind == kind && (row.*member).has_value() && *(row.*member) > best) {
          best = *(row.*member);
        }
      }
      if (best < 0) return;
      for (AggregateRow& row : report.aggregates) {
        if (row.set_kind == kind && row.*member && *(row.*member) == best) {
          row.*flag_member = true;
        }
      }
    };
    flag_best(&AggregateRow::bleu, &AggregateRow::best_bleu);
    flag_best(&AggregateRow::rouge_l, &AggregateRow::best_rouge_l);
    flag_best(&AggregateRow::nli_entailment, &AggregateRow::best_nli);
    flag_best(&AggregateRow::judge_score, &AggregateRow::best_judge);
  }

  report.records = std::move(records);
  return report;
}

}  // namespace thoughtbench::evalmetrics
