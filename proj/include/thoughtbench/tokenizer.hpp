#pragma once
// Word tokenization used for all token counts, chunk windows, and text metrics.
//
// A token is a maximal run of non-whitespace bytes; whitespace covers the ASCII
// space classes plus the common Unicode space code points (NBSP, the U+2000
// block, line/paragraph separators, ideographic space). Splitting text at span
// boundaries and re-joining reproduces it byte for byte, which the chunker
// relies on.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace thoughtbench {

struct TokenSpan {
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenSpan> spans(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const;
};

class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<TokenSpan> spans(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

std::size_t count_tokens(std::string_view text);

std::vector<std::string> word_tokens(std::string_view text);

// ASCII-lowercased tokens; shared by the text metrics.
std::vector<std::string> word_tokens_lower(std::string_view text);

// Suffix of `text` starting at its (count-n)-th token; whole text when it has
// at most n tokens.
std::string last_n_tokens(std::string_view text, std::size_t n);

// Drops oldest tokens until at most max_tokens remain. Returns the suffix and
// whether anything was dropped.
std::pair<std::string, bool> truncate_front_to_tokens(std::string_view text,
                                                      std::size_t max_tokens);

}  // namespace thoughtbench
