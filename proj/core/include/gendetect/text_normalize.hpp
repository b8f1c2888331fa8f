#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gendetect {

/// Normalized unigram stream. Tokens are non-empty, lowercase, NFKC, and
/// carry no whitespace or punctuation.
struct TokenSeq {
  std::vector<std::string> tokens;
  std::size_t source_len_chars = 0;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  auto begin() const noexcept { return tokens.begin(); }
  auto end() const noexcept { return tokens.end(); }
  const std::string& operator[](std::size_t i) const { return tokens[i]; }
};

/// Byte span [begin, end) over the original text.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - begin; }
  bool operator==(const SentenceSpan&) const = default;
};

struct SentenceSplit {
  std::vector<SentenceSpan> sentences;
};

/// SQuAD-style normalization: NFKC, lowercase, drop punctuation code points,
/// drop the articles a/an/the, split on whitespace.
TokenSeq normalize_tokens(std::string_view text);

/// Sentence boundaries at ., ! or ? (plus trailing closing quotes/brackets)
/// followed by whitespace or end of text. A single '.' after a known
/// abbreviation does not end a sentence, and neither does a terminator inside
/// a parenthesized or double-quoted run shorter than 40 bytes.
SentenceSplit split_sentences(std::string_view text);

/// Convenience: the sentence texts of split_sentences(text).
std::vector<std::string> sentence_texts(std::string_view text);

/// Multiset unigram F1. 1 when both sides are empty, 0 when exactly one is.
double unigram_f1(std::span<const std::string> a, std::span<const std::string> b);
double unigram_f1(const TokenSeq& a, const TokenSeq& b);

/// Tokens joined with single spaces.
std::string join_tokens(const TokenSeq& seq);

/// Sentences joined with single spaces.
std::string join_sentences(std::span<const std::string> sentences);

}  // namespace gendetect
