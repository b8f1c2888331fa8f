#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gendetect/detection.hpp"

namespace gendetect {

using TokenId = std::uint32_t;

/// Green-list watermark configuration. Defaults are gamma = 0.5, delta = 2.
struct WatermarkParams {
  double gamma = 0.5;
  double delta = 2.0;
  std::uint64_t hash_key = 0x5EEDC0FFEE15600DULL;
  std::uint32_t vocab_size = 1000;

  /// floor(gamma * |V|).
  std::size_t green_count() const noexcept;
  /// Throws InvalidInput unless 0 < gamma < 1, delta >= 0, |V| > 1 and
  /// green_count() >= 1.
  void validate() const;
};

/// Membership bitmap over the vocabulary.
class GreenList {
 public:
  explicit GreenList(std::size_t vocab_size) : member_(vocab_size, 0) {}

  bool contains(TokenId t) const { return t < member_.size() && member_[t] != 0; }
  std::size_t size() const noexcept { return count_; }
  std::size_t vocab_size() const noexcept { return member_.size(); }
  void insert(TokenId t);

 private:
  std::vector<std::uint8_t> member_;
  std::size_t count_ = 0;
};

/// The green list keyed on `prev_token`: a SplitMix64 stream seeded with
/// mix64(hash_key ^ prev_token) drives a forward Fisher-Yates pass over the
/// identity permutation of V (position i swaps with i + below(|V| - i)); the
/// first floor(gamma |V|) entries are green. Throws InvalidInput when
/// prev_token >= |V|.
GreenList green_set(TokenId prev_token, const WatermarkParams& params);

/// Stand-in for a language model's next-token logits.
class LogitSource {
 public:
  virtual ~LogitSource() = default;
  virtual std::size_t vocab_size() const = 0;
  /// Always vocab_size() finite entries.
  virtual std::vector<double> next_logits(std::span<const TokenId> prefix) const = 0;
};

/// All-zero logits: the maximum-entropy source.
class UniformLogits final : public LogitSource {
 public:
  explicit UniformLogits(std::size_t vocab_size) : vocab_size_(vocab_size) {}
  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<double> next_logits(std::span<const TokenId> prefix) const override;

 private:
  std::size_t vocab_size_;
};

/// Bigram table over token classes: the previous token's class (id modulo
/// `classes`) selects one of `classes` fixed Gaussian logit rows with standard
/// deviation `spread`. Larger spread means lower entropy.
class ClassBigramLogits final : public LogitSource {
 public:
  ClassBigramLogits(std::size_t vocab_size, std::size_t classes, double spread, std::uint64_t seed);
  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<double> next_logits(std::span<const TokenId> prefix) const override;

 private:
  std::size_t vocab_size_;
  std::size_t classes_;
  std::vector<double> table_;
};

/// Nucleus sampling with the green-list boost applied before the softmax.
/// The first step keys its green list on the last prompt token. Throws
/// InvalidInput on an empty prompt, length 0 or top_p outside (0, 1].
std::vector<TokenId> sample_watermarked(const LogitSource& source, const WatermarkParams& params,
                                        std::span<const TokenId> prompt, std::size_t length,
                                        double top_p, std::uint64_t seed);

/// The same sampler with no boost and no green-list computation.
std::vector<TokenId> sample_plain(const LogitSource& source, std::span<const TokenId> prompt,
                                  std::size_t length, double top_p, std::uint64_t seed);

struct ZReport {
  std::size_t scored_tokens = 0;
  std::size_t green_count = 0;
  double z = 0.0;
  /// One-sided upper tail 1 - Phi(z).
  double p_value = 1.0;
};

/// (green - gamma T) / sqrt(T gamma (1 - gamma)).
double z_statistic(std::size_t scored_tokens, std::size_t green_count, double gamma);

/// Standard normal CDF.
double normal_cdf(double z);

/// Scores tokens[1..]; token k is tested against green_set(tokens[k-1]).
/// Throws InvalidInput for fewer than two tokens.
ZReport z_score(std::span<const TokenId> tokens, const WatermarkParams& params);

/// verdict = z > threshold_z; score = Phi(z).
DetectionResult detect_watermark(std::span<const TokenId> tokens, const WatermarkParams& params,
                                 double threshold_z);

/// Word-level vocabulary shared by the generator and the detector. Ids map to
/// synthetic pronounceable words; unknown words fall back to
/// fnv1a64(word) mod |V|.
class WordVocabulary {
 public:
  explicit WordVocabulary(std::uint32_t size);

  std::uint32_t size() const noexcept { return static_cast<std::uint32_t>(words_.size()); }
  const std::string& word(TokenId id) const { return words_.at(id); }
  /// Lowercases and strips punctuation before lookup.
  TokenId lookup(std::string_view word) const;
  std::vector<TokenId> tokenize(std::string_view text) const;
  /// Space-joined words. With sentence_length > 0 a period closes every
  /// sentence_length words and the next word is capitalized.
  std::string render(std::span<const TokenId> ids, std::size_t sentence_length = 0) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace gendetect
