#include "thoughtbench/memindex.hpp"

#include "thoughtbench/common.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace thoughtbench::memindex {

using nlohmann::json;

std::vector<ChapterTokenRange> chapter_token_ranges(
    const std::vector<corpus::Chapter>& chapters, const Tokenizer& tok) {
  std::vector<ChapterTokenRange> ranges;
  std::size_t token_cursor = 0;
  for (const corpus::Chapter& ch : chapters) {
    std::size_t n = tok.count(ch.text);
    ranges.push_back({ch.id, ch.sequence_index, token_cursor, token_cursor + n});
    token_cursor += n;
  }
  return ranges;
}

std::vector<MemoryChunk> chunk_memory(const std::vector<corpus::Chapter>& chapters,
                                      std::size_t chunk_size, const Tokenizer& tok) {
  if (chunk_size == 0) {
    raise("InvalidArgument", "chunk_size must be > 0");
  }
  std::vector<MemoryChunk> chunks;
  if (chapters.empty()) return chunks;

  std::string memory;
  for (const corpus::Chapter& ch : chapters) memory += ch.text;

  std::vector<TokenSpan> spans = tok.spans(memory);
  if (spans.empty()) return chunks;

  // Byte offset of each chapter start, for span chapter attribution.
  std::vector<std::pair<std::size_t, const corpus::Chapter*>> chapter_starts;
  std::size_t byte_cursor = 0;
  for (const corpus::Chapter& ch : chapters) {
    chapter_starts.emplace_back(byte_cursor, &ch);
    byte_cursor += ch.text.size();
  }
  auto chapter_at = [&](std::size_t byte_offset) -> const corpus::Chapter* {
    const corpus::Chapter* hit = chapter_starts.front().second;
    for (const auto& [start, ch] : chapter_starts) {
      if (start <= byte_offset) hit = ch;
      else break;
    }
    return hit;
  };

  const std::string& character = chapters.front().character;
  const std::size_t total = spans.size();
  const std::size_t n_chunks = (total + chunk_size - 1) / chunk_size;
  for (std::size_t i = 0; i < n_chunks; ++i) {
    const std::size_t tok_begin = i * chunk_size;
    const std::size_t tok_end = std::min(total, tok_begin + chunk_size);
    const std::size_t byte_begin = i == 0 ? 0 : spans[tok_begin].begin;
    const std::size_t byte_end = tok_end == total ? memory.size() : spans[tok_end].begin;

    MemoryChunk chunk;
    chunk.character = character;
    chunk.text = memory.substr(byte_begin, byte_end - byte_begin);
    chunk.token_count = tok_end - tok_begin;
    chunk.span.chapter_id = chapter_at(spans[tok_begin].begin)->id;
    chunk.span.start_token = tok_begin;
    chunk.span.end_token = tok_end;
    chunk.chunk_id = character + "#" + std::to_string(i);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

double cosine_similarity(const gateway::EmbeddingVector& a,
                         const gateway::EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    raise("DimensionMismatch", "cosine between dims " + std::to_string(a.dim()) + " and " +
                                   std::to_string(b.dim()));
  }
  if (a.dim() == 0) {
    raise("DimensionMismatch", "cosine over empty vectors");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) {
    raise("ZeroVector", "cosine with a zero vector");
  }
  double value = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(value, -1.0, 1.0);
}

MemoryIndex MemoryIndex::restricted_before(const std::string& chapter_id, bool* found) const {
  const ChapterTokenRange* range = nullptr;
  for (const ChapterTokenRange& r : chapter_ranges) {
    if (r.chapter_id == chapter_id) {
      range = &r;
      break;
    }
  }
  if (found) *found = range != nullptr;
  if (!range) return *this;

  MemoryIndex out;
  out.character = character;
  out.embedding_model_id = embedding_model_id;
  out.chunk_size = chunk_size;
  out.chapter_ranges = chapter_ranges;
  for (const MemoryChunk& chunk : chunks) {
    if (chunk.span.end_token <= range->token_begin) out.chunks.push_back(chunk);
  }
  return out;
}

std::vector<ScoredChunk> retrieve_top_k(const gateway::EmbeddingVector& query,
                                        const MemoryIndex& index, std::size_t k) {
  if (k < 1) {
    raise("InvalidArgument", "k must be >= 1");
  }
  if (index.chunks.empty()) {
    raise("EmptyIndex", "retrieval over an index with no chunks");
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(index.chunks.size());
  for (std::size_t i = 0; i < index.chunks.size(); ++i) {
    const MemoryChunk& chunk = index.chunks[i];
    if (!chunk.embedding) {
      raise("IndexFormat", "chunk " + chunk.chunk_id + " has no embedding");
    }
    scored.emplace_back(cosine_similarity(query, *chunk.embedding), i);
  }
  // stable sort on descending score keeps narrative order within ties
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<ScoredChunk> out;
  const std::size_t take = std::min(k, scored.size());
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back({index.chunks[scored[i].second], scored[i].first});
  }
  return out;
}

std::vector<ScoredChunk> retrieve_top_k(const std::string& query, const MemoryIndex& index,
                                        std::size_t k, gateway::Gateway& gw) {
  return retrieve_top_k(gw.embed(query), index, k);
}

MemoryIndex build_index(const std::string& character,
                        const std::vector<corpus::Chapter>& chapters,
                        std::size_t chunk_size, gateway::Gateway& gw) {
  MemoryIndex index;
  index.character = character;
  index.chunk_size = chunk_size;
  index.embedding_model_id = gw.config().embed_model;
  index.chapter_ranges = chapter_token_ranges(chapters);
  index.chunks = chunk_memory(chapters, chunk_size);
  for (MemoryChunk& chunk : index.chunks) {
    chunk.embedding = gw.embed(chunk.text);
  }
  return index;
}

namespace {

json chunk_to_json(const MemoryChunk& chunk) {
  json j;
  j["chunk_id"] = chunk.chunk_id;
  j["character"] = chunk.character;
  j["text"] = chunk.text;
  j["token_count"] = chunk.token_count;
  j["span"] = {{"chapter_id", chunk.span.chapter_id},
               {"start_token", chunk.span.start_token},
               {"end_token", chunk.span.end_token}};
  if (chunk.embedding) {
    j["embedding"] = {{"values", chunk.embedding->values},
                      {"model_id", chunk.embedding->model_id}};
  }
  return j;
}

MemoryChunk chunk_from_json(const json& j) {
  MemoryChunk chunk;
  chunk.chunk_id = j.at("chunk_id").get<std::string>();
  chunk.character = j.at("character").get<std::string>();
  chunk.text = j.at("text").get<std::string>();
  chunk.token_count = j.at("token_count").get<std::size_t>();
  chunk.span.chapter_id = j.at("span").at("chapter_id").get<std::string>();
  chunk.span.start_token = j.at("span").at("start_token").get<std::size_t>();
  chunk.span.end_token = j.at("span").at("end_token").get<std::size_t>();
  if (j.contains("embedding")) {
    gateway::EmbeddingVector vec;
    vec.model_id = j.at("embedding").at("model_id").get<std::string>();
    for (const auto& v : j.at("embedding").at("values")) {
      vec.values.push_back(v.get<double>());
    }
    chunk.embedding = std::move(vec);
  }
  return chunk;
}

}  // namespace

void save_index(const MemoryIndex& index, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const MemoryChunk& chunk : index.chunks) {
    out << chunk_to_json(chunk).dump() << '\n';
  }
  json ranges = json::array();
  for (const ChapterTokenRange& r : index.chapter_ranges) {
    ranges.push_back({{"chapter_id", r.chapter_id},
                      {"sequence_index", r.sequence_index},
                      {"token_begin", r.token_begin},
                      {"token_end", r.token_end}});
  }
  json footer;
  footer["footer"] = {{"character", index.character},
                      {"embedding_model_id", index.embedding_model_id},
                      {"chunk_size", index.chunk_size},
                      {"chapter_ranges", ranges}};
  out << footer.dump() << '\n';
  write_file_atomic(path, out.str());
}

MemoryIndex load_index(const std::filesystem::path& path) {
  MemoryIndex index;
  bool have_footer = false;
  for (const std::string& line : split_lines(read_file(path))) {
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      raise("IndexFormat", "invalid JSON line in " + path.string());
    }
    if (j.contains("footer")) {
      const json& f = j["footer"];
      index.character = f.value("character", "");
      index.embedding_model_id = f.value("embedding_model_id", "");
      index.chunk_size = f.value("chunk_size", static_cast<std::size_t>(0));
      if (f.contains("chapter_ranges")) {
        for (const auto& r : f["chapter_ranges"]) {
          index.chapter_ranges.push_back({r.at("chapter_id").get<std::string>(),
                                          r.at("sequence_index").get<int>(),
                                          r.at("token_begin").get<std::size_t>(),
                                          r.at("token_end").get<std::size_t>()});
        }
      }
      have_footer = true;
      continue;
    }
    index.chunks.push_back(chunk_from_json(j));
  }
  if (!have_footer) {
    raise("IndexFormat", "index sidecar " + path.string() + " has no footer");
  }
  return index;
}

MemoryIndex load_or_build(const std::filesystem::path& path, const std::string& character,
                          const std::vector<corpus::Chapter>& chapters,
                          std::size_t chunk_size, gateway::Gateway& gw) {
  if (std::filesystem::exists(path)) {
    try {
      MemoryIndex index = load_index(path);
      if (index.character == character &&
          index.embedding_model_id == gw.config().embed_model &&
          index.chunk_size == chunk_size) {
        return index;
      }
    } catch (const Error&) {
      // fall through to rebuild
    }
  }
  MemoryIndex index = build_index(character, chapters, chunk_size, gw);
  save_index(index, path);
  return index;
}

}  // namespace thoughtbench::memindex
