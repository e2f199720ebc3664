#include "thoughtbench/tokenizer.hpp"

#include "thoughtbench/common.hpp"

#include <cctype>

namespace thoughtbench {

namespace {

// Byte length of the whitespace character starting at text[i], or 0 when
// text[i] does not start one. Multi-byte checks cover U+0085, U+00A0, U+1680,
// U+2000..U+200A, U+2028, U+2029, U+202F, U+205F, U+3000.
std::size_t space_len(std::string_view text, std::size_t i) {
  unsigned char c = static_cast<unsigned char>(text[i]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
  if (c < 0x80) return 0;
  auto at = [&](std::size_t off) -> unsigned char {
    return i + off < text.size() ? static_cast<unsigned char>(text[i + off]) : 0;
  };
  if (c == 0xc2) {
    unsigned char b = at(1);
    if (b == 0x85 || b == 0xa0) return 2;
    return 0;
  }
  if (c == 0xe1) {
    if (at(1) == 0x9a && at(2) == 0x80) return 3;
    return 0;
  }
  if (c == 0xe2) {
    unsigned char b1 = at(1), b2 = at(2);
    if (b1 == 0x80 && ((b2 >= 0x80 && b2 <= 0x8a) || b2 == 0xa8 || b2 == 0xa9 || b2 == 0xaf))
      return 3;
    if (b1 == 0x81 && b2 == 0x9f) return 3;
    return 0;
  }
  if (c == 0xe3) {
    if (at(1) == 0x80 && at(2) == 0x80) return 3;
    return 0;
  }
  return 0;
}

}  // namespace

std::size_t Tokenizer::count(std::string_view text) const { return spans(text).size(); }

std::vector<TokenSpan> WhitespaceTokenizer::spans(std::string_view text) const {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    std::size_t sl = space_len(text, i);
    if (sl > 0) {
      i += sl;
      continue;
    }
    std::size_t begin = i;
    while (i < n) {
      std::size_t s = space_len(text, i);
      if (s > 0) break;
      ++i;
    }
    out.push_back({begin, i});
  }
  return out;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
  std::size_t n_tokens = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    std::size_t sl = space_len(text, i);
    if (sl > 0) {
      i += sl;
      continue;
    }
    ++n_tokens;
    while (i < n && space_len(text, i) == 0) ++i;
  }
  return n_tokens;
}

const Tokenizer& default_tokenizer() {
  static const WhitespaceTokenizer tok;
  return tok;
}

std::size_t count_tokens(std::string_view text) { return default_tokenizer().count(text); }

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (const TokenSpan& sp : default_tokenizer().spans(text)) {
    out.emplace_back(text.substr(sp.begin, sp.end - sp.begin));
  }
  return out;
}

std::vector<std::string> word_tokens_lower(std::string_view text) {
  std::vector<std::string> out = word_tokens(text);
  for (std::string& t : out) t = ascii_lower(std::move(t));
  return out;
}

std::string last_n_tokens(std::string_view text, std::size_t n) {
  auto spans = default_tokenizer().spans(text);
  if (spans.size() <= n) return std::string(text);
  return std::string(text.substr(spans[spans.size() - n].begin));
}

std::pair<std::string, bool> truncate_front_to_tokens(std::string_view text,
                                                      std::size_t max_tokens) {
  auto spans = default_tokenizer().spans(text);
  if (spans.size() <= max_tokens) return {std::string(text), false};
  if (max_tokens == 0) return {std::string(), true};
  return {std::string(text.substr(spans[spans.size() - max_tokens].begin)), true};
}

}  // namespace thoughtbench
