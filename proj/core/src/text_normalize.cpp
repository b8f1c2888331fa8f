#include "gendetect/text_normalize.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace gendetect {
namespace {

bool is_article(std::string_view tok) {
  return tok == "a" || tok == "an" || tok == "the";
}

void push_token(std::string& cur, TokenSeq& out) {
  if (!cur.empty()) {
    if (!is_article(cur)) out.tokens.push_back(std::move(cur));
    cur.clear();
  }
}

bool is_ascii(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

std::size_t count_code_points(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

TokenSeq normalize_ascii(std::string_view text) {
  TokenSeq out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      push_token(cur, out);
    } else if (std::ispunct(c)) {
      continue;
    } else if (std::iscntrl(c)) {
      push_token(cur, out);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  push_token(cur, out);
  return out;
}

TokenSeq normalize_unicode(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = U_SUCCESS(status) ? nfkc->normalize(src, status) : src;
  if (U_FAILURE(status)) normalized = src;
  normalized.toLower(icu::Locale::getRoot());

  TokenSeq out;
  std::string cur;
  for (int32_t i = 0; i < normalized.length();) {
    const UChar32 c = normalized.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c) || u_iscntrl(c)) {
      push_token(cur, out);
    } else if (u_ispunct(c) || (c < 0x80 && std::ispunct(static_cast<int>(c)))) {
      continue;
    } else {
      std::array<char, 4> buf{};
      int32_t len = 0;
      UBool err = false;
      U8_APPEND(buf.data(), len, 4, c, err);
      if (!err) cur.append(buf.data(), static_cast<std::size_t>(len));
    }
  }
  push_token(cur, out);
  return out;
}

constexpr std::array<std::string_view, 11> kAbbreviations = {
    "dr", "mr", "mrs", "ms", "prof", "etc", "e.g", "i.e", "vs", "fig", "eq"};

constexpr std::size_t kProtectedRunLimit = 40;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// Interiors of short (...) and "..." runs, as [open, close] byte pairs.
std::vector<std::pair<std::size_t, std::size_t>> protected_runs(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '(') {
      const auto close = text.find(')', i + 1);
      if (close != std::string_view::npos && close - i < kProtectedRunLimit) {
        runs.emplace_back(i, close);
      }
    }
  }
  std::size_t open = std::string_view::npos;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '"') continue;
    if (open == std::string_view::npos) {
      open = i;
    } else {
      if (i - open < kProtectedRunLimit) runs.emplace_back(open, i);
      open = std::string_view::npos;
    }
  }
  return runs;
}

bool preceded_by_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !is_space(text[start - 1])) --start;
  std::string word;
  for (std::size_t i = start; i < dot; ++i) {
    const char c = text[i];
    if (word.empty() && (c == '(' || c == '"' || c == '\'' || c == '[')) continue;
    word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

}  // namespace

TokenSeq normalize_tokens(std::string_view text) {
  TokenSeq out = is_ascii(text) ? normalize_ascii(text) : normalize_unicode(text);
  out.source_len_chars = count_code_points(text);
  return out;
}

SentenceSplit split_sentences(std::string_view text) {
  SentenceSplit split;
  const auto runs = protected_runs(text);
  auto inside_protected = [&](std::size_t pos) {
    return std::any_of(runs.begin(), runs.end(),
                       [pos](const auto& r) { return r.first < pos && pos < r.second; });
  };

  std::size_t start = 0;
  while (start < text.size() && is_space(text[start])) ++start;

  for (std::size_t i = start; i < text.size(); ++i) {
    if (!is_terminal(text[i])) continue;
    std::size_t run_end = i;
    while (run_end + 1 < text.size() && is_terminal(text[run_end + 1])) ++run_end;
    const bool single_dot = run_end == i && text[i] == '.';
    std::size_t end = run_end + 1;
    while (end < text.size() && is_closer(text[end])) ++end;

    if (end < text.size() && !is_space(text[end])) {
      i = run_end;
      continue;
    }
    if (inside_protected(i) || (single_dot && preceded_by_abbreviation(text, i))) {
      i = run_end;
      continue;
    }
    split.sentences.push_back({start, end});
    start = end;
    while (start < text.size() && is_space(text[start])) ++start;
    i = start - 1;  // start >= end > 0
  }

  if (start < text.size()) {
    std::size_t end = text.size();
    while (end > start && is_space(text[end - 1])) --end;
    if (end > start) split.sentences.push_back({start, end});
  }
  return split;
}

std::vector<std::string> sentence_texts(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& s : split_sentences(text).sentences) {
    out.emplace_back(text.substr(s.begin, s.length()));
  }
  return out;
}

double unigram_f1(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::unordered_map<std::string_view, long> counts;
  counts.reserve(a.size());
  for (const auto& t : a) ++counts[t];
  std::size_t matches = 0;
  for (const auto& t : b) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++matches;
    }
  }
  if (matches == 0) return 0.0;
  const double precision = static_cast<double>(matches) / static_cast<double>(a.size());
  const double recall = static_cast<double>(matches) / static_cast<double>(b.size());
  return 2.0 * precision * recall / (precision + recall);
}

double unigram_f1(const TokenSeq& a, const TokenSeq& b) {
  return unigram_f1(std::span<const std::string>(a.tokens), std::span<const std::string>(b.tokens));
}

std::string join_tokens(const TokenSeq& seq) {
  return join_sentences(seq.tokens);
}

std::string join_sentences(std::span<const std::string> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (s.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += s;
  }
  return out;
}

}  // namespace gendetect
