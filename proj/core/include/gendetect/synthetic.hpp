#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gendetect/corpus_store.hpp"
#include "gendetect/eval_harness.hpp"
#include "gendetect/watermark.hpp"

namespace gendetect {

/// Knobs for the Zipfian stand-in text source used by benchmarks and tests.
struct SyntheticTextConfig {
  std::uint32_t vocab_size = 20000;
  double zipf_exponent = 1.05;
  std::size_t min_words = 60;
  std::size_t max_words = 120;
  /// Each text draws a private topic of this many mid-frequency words...
  std::size_t topic_size = 40;
  /// ...and emits one of them with this probability per word.
  double topic_rate = 0.3;
  std::size_t min_sentence = 8;
  std::size_t max_sentence = 20;
};

/// Deterministic text generator: English function words at the head of a
/// Zipf distribution, pronounceable pseudo-words in the tail.
class SyntheticText {
 public:
  explicit SyntheticText(SyntheticTextConfig config = {});

  const SyntheticTextConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& vocabulary() const noexcept { return words_; }

  /// One paragraph of sentences. Same seed, same text.
  std::string generate(std::uint64_t seed) const;
  std::vector<std::string> generate_many(std::size_t n, std::uint64_t seed) const;

  /// Synonym table over the vocabulary: each word maps to the words up to
  /// `radius` Zipf ranks away on either side.
  Lexicon lexicon(std::size_t radius = 2) const;

 private:
  SyntheticTextConfig config_;
  std::vector<std::string> words_;
  std::vector<double> cdf_;
};

struct TokenText {
  std::vector<TokenId> tokens;  // prompt token first
  std::string text;             // rendered tokens, prompt included
};

/// A watermarked sequence of `length` tokens after a one-token seeded prompt,
/// rendered into sentences of `sentence_length` words.
TokenText watermarked_text(const LogitSource& source, const WordVocabulary& vocab,
                           const WatermarkParams& params, std::size_t length, double top_p,
                           std::uint64_t seed, std::size_t sentence_length = 12);

/// The unwatermarked counterpart drawn from the same source.
TokenText plain_text(const LogitSource& source, const WordVocabulary& vocab, std::size_t length,
                     double top_p, std::uint64_t seed, std::size_t sentence_length = 12);

}  // namespace gendetect

namespace gendetect {

enum class ScenarioSource {
  zipf,       ///< SyntheticText paragraphs
  watermark,  ///< WordVocabulary text; machine items watermarked, human items not
};

std::string_view to_string(ScenarioSource s) noexcept;
ScenarioSource parse_scenario_source(std::string_view name);

/// Shape of a synthetic benchmark: machine generations stored in the corpus
/// alongside distractor generations, and human texts that never are.
struct ScenarioSpec {
  ScenarioSource source = ScenarioSource::zipf;
  std::size_t machine = 1000;
  std::size_t human_calibration = 1000;
  std::size_t human_test = 1000;
  std::size_t distractors = 0;
  std::uint64_t seed = 1;
  SyntheticTextConfig text;
  // Watermark source only.
  WatermarkParams watermark;
  std::size_t length = 200;
  double top_p = 1.0;
  /// 0 selects UniformLogits; otherwise ClassBigramLogits with this many
  /// classes and `spread`.
  std::size_t classes = 0;
  double spread = 1.0;
  std::size_t sentence_length = 12;
};

struct Scenario {
  BenchmarkItems items;
  /// Machine items and distractors in id order (ids from 1, timestamp = id).
  std::vector<GenerationRecord> corpus;
};

Scenario build_scenario(const ScenarioSpec& spec, unsigned threads = 0);

}  // namespace gendetect
