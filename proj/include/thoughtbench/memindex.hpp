#pragma once
// Fixed token-window chunking over a character's POV memory, chunk embeddings,
// and exact top-k cosine retrieval via a linear scan.
//
// Windows are non-overlapping and may straddle chapter boundaries; joining the
// chunk texts reproduces the concatenated chapter texts byte for byte. Spans
// are global token offsets plus the chapter the chunk starts in; per-chapter
// token ranges kept on the index let callers restrict retrieval to chunks that
// end strictly before a given chapter.

#include "thoughtbench/corpus.hpp"
#include "thoughtbench/gateway.hpp"
#include "thoughtbench/tokenizer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace thoughtbench::memindex {

struct ChunkSpan {
  std::string chapter_id;  // chapter containing the chunk's first token
  std::size_t start_token = 0;
  std::size_t end_token = 0;  // exclusive, global token offsets
};

struct MemoryChunk {
  std::string chunk_id;
  std::string character;
  std::string text;
  std::size_t token_count = 0;
  ChunkSpan span;
  std::optional<gateway::EmbeddingVector> embedding;
};

struct ChapterTokenRange {
  std::string chapter_id;
  int sequence_index = 0;
  std::size_t token_begin = 0;
  std::size_t token_end = 0;
};

struct MemoryIndex {
  std::string character;
  std::vector<MemoryChunk> chunks;  // narrative order, all embedded
  std::string embedding_model_id;
  std::size_t chunk_size = 1000;
  std::vector<ChapterTokenRange> chapter_ranges;

  // Chunks that end at or before the first token of `chapter_id`. `found`
  // reports whether the chapter resolves; when it does not, the full index is
  // returned unchanged.
  MemoryIndex restricted_before(const std::string& chapter_id, bool* found = nullptr) const;
};

// Every chunk except possibly the last holds exactly chunk_size tokens;
// whitespace between tokens rides with the chunk it precedes, so concatenating
// chunk texts reproduces the concatenated chapter texts. A memory with zero
// tokens yields no chunks.
std::vector<MemoryChunk> chunk_memory(const std::vector<corpus::Chapter>& chapters,
                                      std::size_t chunk_size,
                                      const Tokenizer& tok = default_tokenizer());

std::vector<ChapterTokenRange> chapter_token_ranges(
    const std::vector<corpus::Chapter>& chapters,
    const Tokenizer& tok = default_tokenizer());

double cosine_similarity(const gateway::EmbeddingVector& a,
                         const gateway::EmbeddingVector& b);

struct ScoredChunk {
  MemoryChunk chunk;
  double score = 0.0;
};

// Sorted by score descending, ties broken by earlier narrative order; length
// min(k, |chunks|). Matches a brute-force full scan exactly.
std::vector<ScoredChunk> retrieve_top_k(const gateway::EmbeddingVector& query,
                                        const MemoryIndex& index, std::size_t k);
std::vector<ScoredChunk> retrieve_top_k(const std::string& query, const MemoryIndex& index,
                                        std::size_t k, gateway::Gateway& gw);

MemoryIndex build_index(const std::string& character,
                        const std::vector<corpus::Chapter>& chapters,
                        std::size_t chunk_size, gateway::Gateway& gw);

// Sidecar format: JSONL chunk records followed by a footer carrying the
// embedding model id, chunk size, and chapter ranges.
void save_index(const MemoryIndex& index, const std::filesystem::path& path);
MemoryIndex load_index(const std::filesystem::path& path);

// Loads the sidecar when it matches (character, embedding model, chunk size),
// otherwise rebuilds and rewrites it.
MemoryIndex load_or_build(const std::filesystem::path& path, const std::string& character,
                          const std::vector<corpus::Chapter>& chapters,
                          std::size_t chunk_size, gateway::Gateway& gw);

}  // namespace thoughtbench::memindex
