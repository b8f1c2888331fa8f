#include "gendetect/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string_view>
#include <unordered_set>

#include "gendetect/errors.hpp"
#include "gendetect/rng.hpp"

namespace gendetect {
namespace {

// Most frequent words first. Articles are left out: normalization drops them.
constexpr std::string_view kHeadWords[] = {
    "of", "and", "to", "in", "is", "was", "it", "for", "that", "on", "as", "with", "by", "he",
    "his", "at", "from", "they", "this", "be", "or", "had", "are", "not", "but", "which", "were",
    "her", "she", "one", "their", "been", "has", "have", "its", "also", "first", "after",
    "new", "two", "who", "when", "there", "during", "time", "other", "into", "more", "all",
    "would", "only", "later", "many", "most", "some", "can", "over", "such", "made", "than",
    "found", "used", "years", "city", "people", "world", "known", "work", "part", "group",
    "place", "different", "several", "early", "before", "began", "became", "small", "large",
    "important", "often", "however", "because", "about", "country", "house", "water", "life",
    "problem", "change", "last", "old", "good", "help", "show", "make", "start", "end",
};

constexpr std::string_view kOnsets[] = {"b",  "d",  "f",  "g",  "k",  "l",  "m",  "n",
                                        "p",  "r",  "s",  "t",  "v",  "z",  "br", "dr",
                                        "gr", "kl", "pl", "st", "tr", "sh", "ch", "th"};
constexpr std::string_view kNuclei[] = {"a", "e", "i", "o", "u", "ai", "ou", "ei"};
constexpr std::string_view kCodas[] = {"", "n", "r", "l", "s", "m"};

std::string pseudo_word(std::uint64_t index) {
  // Bijective mixed-radix spelling, at least two syllables.
  constexpr std::uint64_t kOn = std::size(kOnsets), kNu = std::size(kNuclei);
  std::string w;
  std::uint64_t x = index;
  int syllables = 0;
  do {
    w += kOnsets[x % kOn];
    x /= kOn;
    w += kNuclei[x % kNu];
    x /= kNu;
    ++syllables;
  } while (x > 0 || syllables < 2);
  w += kCodas[index % std::size(kCodas)];
  return w;
}

}  // namespace

SyntheticText::SyntheticText(SyntheticTextConfig config) : config_(config) {
  if (config_.vocab_size < std::size(kHeadWords) + config_.topic_size + 1) {
    throw InvalidInput("synthetic vocabulary too small");
  }
  if (config_.min_words == 0 || config_.max_words < config_.min_words ||
      config_.min_sentence == 0 || config_.max_sentence < config_.min_sentence) {
    throw InvalidInput("synthetic length bounds are inconsistent");
  }
  std::unordered_set<std::string> seen;
  for (auto w : kHeadWords) {
    words_.emplace_back(w);
    seen.emplace(w);
  }
  for (std::uint64_t i = 0; words_.size() < config_.vocab_size; ++i) {
    auto w = pseudo_word(i);
    if (seen.insert(w).second) words_.push_back(std::move(w));
  }
  cdf_.resize(words_.size());
  double total = 0.0;
  for (std::size_t r = 0; r < words_.size(); ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), config_.zipf_exponent);
    cdf_[r] = total;
  }
  for (double& c : cdf_) c /= total;
}

std::string SyntheticText::generate(std::uint64_t seed) const {
  SplitMix64 rng(seed);
  const std::size_t n =
      config_.min_words + rng.below(config_.max_words - config_.min_words + 1);

  // Topic words come from the band just past the function words.
  const std::size_t band_lo = std::size(kHeadWords);
  const std::size_t band = std::min<std::size_t>(words_.size() - band_lo, 5000);
  std::vector<std::size_t> topic(config_.topic_size);
  for (auto& t : topic) t = band_lo + rng.below(band);

  std::string out;
  std::size_t in_sentence = 0;
  std::size_t sentence_len =
      config_.min_sentence + rng.below(config_.max_sentence - config_.min_sentence + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r;
    if (!topic.empty() && rng.unit() < config_.topic_rate) {
      r = topic[rng.below(topic.size())];
    } else {
      const double u = rng.unit();
      r = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
      r = std::min(r, words_.size() - 1);
    }
    std::string w = words_[r];
    if (in_sentence == 0) {
      w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      if (!out.empty()) out.push_back(' ');
    } else {
      out.push_back(' ');
    }
    out += w;
    if (++in_sentence == sentence_len || i + 1 == n) {
      out.push_back('.');
      in_sentence = 0;
      sentence_len =
          config_.min_sentence + rng.below(config_.max_sentence - config_.min_sentence + 1);
    }
  }
  return out;
}

std::vector<std::string> SyntheticText::generate_many(std::size_t n, std::uint64_t seed) const {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate(mix64(seed ^ (i * 0x2545F4914F6CDD1DULL))));
  return out;
}

Lexicon SyntheticText::lexicon(std::size_t radius) const {
  Lexicon lex;
  const auto n = static_cast<std::ptrdiff_t>(words_.size());
  const auto rad = static_cast<std::ptrdiff_t>(radius);
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    std::vector<std::string> alts;
    for (std::ptrdiff_t d = -rad; d <= rad; ++d) {
      if (d != 0 && r + d >= 0 && r + d < n) alts.push_back(words_[static_cast<std::size_t>(r + d)]);
    }
    lex.add(words_[static_cast<std::size_t>(r)], std::move(alts));
  }
  return lex;
}

TokenText watermarked_text(const LogitSource& source, const WordVocabulary& vocab,
                           const WatermarkParams& params, std::size_t length, double top_p,
                           std::uint64_t seed, std::size_t sentence_length) {
  SplitMix64 rng(seed);
  const TokenId prompt[] = {static_cast<TokenId>(rng.below(source.vocab_size()))};
  TokenText t;
  t.tokens.push_back(prompt[0]);
  auto gen = sample_watermarked(source, params, prompt, length, top_p, rng.next());
  t.tokens.insert(t.tokens.end(), gen.begin(), gen.end());
  t.text = vocab.render(t.tokens, sentence_length);
  return t;
}

TokenText plain_text(const LogitSource& source, const WordVocabulary& vocab, std::size_t length,
                     double top_p, std::uint64_t seed, std::size_t sentence_length) {
  SplitMix64 rng(seed);
  const TokenId prompt[] = {static_cast<TokenId>(rng.below(source.vocab_size()))};
  TokenText t;
  t.tokens.push_back(prompt[0]);
  auto gen = sample_plain(source, prompt, length, top_p, rng.next());
  t.tokens.insert(t.tokens.end(), gen.begin(), gen.end());
  t.text = vocab.render(t.tokens, sentence_length);
  return t;
}

}  // namespace gendetect

namespace gendetect {

std::string_view to_string(ScenarioSource s) noexcept {
  return s == ScenarioSource::zipf ? "zipf" : "watermark";
}

ScenarioSource parse_scenario_source(std::string_view name) {
  if (name == "zipf") return ScenarioSource::zipf;
  if (name == "watermark") return ScenarioSource::watermark;
  throw InvalidInput("unknown scenario source: " + std::string(name));
}

Scenario build_scenario(const ScenarioSpec& spec, unsigned threads) {
  // Independent seed streams per population keep each one stable when the
  // others are resized.
  const std::uint64_t machine_seed = mix64(spec.seed ^ 0x4D41434849ULL);
  const std::uint64_t cal_seed = mix64(spec.seed ^ 0x48554D43ULL);
  const std::uint64_t test_seed = mix64(spec.seed ^ 0x48554D54ULL);
  const std::uint64_t distractor_seed = mix64(spec.seed ^ 0x44495354ULL);

  std::function<std::string(std::uint64_t, bool)> make;
  std::unique_ptr<SyntheticText> zipf;
  std::unique_ptr<LogitSource> source;
  std::unique_ptr<WordVocabulary> vocab;
  if (spec.source == ScenarioSource::zipf) {
    zipf = std::make_unique<SyntheticText>(spec.text);
    make = [&](std::uint64_t seed, bool) { return zipf->generate(seed); };
  } else {
    spec.watermark.validate();
    const auto v = static_cast<std::uint32_t>(spec.watermark.vocab_size);
    vocab = std::make_unique<WordVocabulary>(v);
    if (spec.classes == 0) {
      source = std::make_unique<UniformLogits>(v);
    } else {
      source = std::make_unique<ClassBigramLogits>(v, spec.classes, spec.spread,
                                                   mix64(spec.seed ^ 0x534F55524345ULL));
    }
    make = [&](std::uint64_t seed, bool watermarked) {
      return watermarked ? watermarked_text(*source, *vocab, spec.watermark, spec.length,
                                            spec.top_p, seed, spec.sentence_length)
                               .text
                         : plain_text(*source, *vocab, spec.length, spec.top_p, seed,
                                      spec.sentence_length)
                               .text;
    };
  }

  auto fill = [&](std::size_t n, std::uint64_t seed, bool watermarked) {
    std::vector<std::string> out(n);
    parallel_for(n, threads, [&](std::size_t i) {
      out[i] = make(mix64(seed + i), watermarked);
    });
    return out;
  };

  Scenario s;
  s.items.machine = fill(spec.machine, machine_seed, true);
  s.items.human_calibration = fill(spec.human_calibration, cal_seed, false);
  s.items.human_test = fill(spec.human_test, test_seed, false);
  auto distractors = fill(spec.distractors, distractor_seed, true);

  // Spread machine items evenly through the distractors.
  const std::size_t total = spec.machine + spec.distractors;
  s.corpus.reserve(total);
  std::size_t m = 0, d = 0;
  for (std::size_t k = 0; k < total; ++k) {
    const bool take_machine =
        d == distractors.size() ||
        (m < spec.machine && m * total <= k * spec.machine);
    GenerationRecord r;
    r.id = k + 1;
    r.timestamp = static_cast<std::int64_t>(k + 1);
    r.model_id = take_machine ? "machine" : "distractor";
    r.generation = take_machine ? s.items.machine[m++] : std::move(distractors[d++]);
    s.corpus.push_back(std::move(r));
  }
  return s;
}

}  // namespace gendetect
