#include "gendetect/watermark.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gendetect/errors.hpp"
#include "gendetect/rng.hpp"

namespace gendetect {
namespace {

// Softmax followed by top-p truncation; draws one id.
TokenId sample_nucleus(std::vector<double>& logits, double top_p, SplitMix64& rng) {
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - max_logit);
    total += l;
  }

  std::vector<TokenId> order(logits.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::size_t keep = order.size();
  double kept_mass = total;
  if (top_p < 1.0) {
    std::stable_sort(order.begin(), order.end(),
                     [&](TokenId a, TokenId b) { return logits[a] > logits[b]; });
    double cumulative = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      cumulative += logits[order[i]];
      if (cumulative >= top_p * total) {
        keep = i + 1;
        kept_mass = cumulative;
        break;
      }
    }
  }

  const double u = rng.unit() * kept_mass;
  double acc = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    acc += logits[order[i]];
    if (u < acc) return order[i];
  }
  return order[keep - 1];
}

void check_sampling_args(const LogitSource& source, std::span<const TokenId> prompt,
                         std::size_t length, double top_p) {
  if (prompt.empty()) throw InvalidInput("prompt must hold at least one token");
  if (length == 0) throw InvalidInput("generation length must be at least 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidInput("top_p must be in (0, 1]");
  for (TokenId t : prompt) {
    if (t >= source.vocab_size()) throw InvalidInput("prompt token outside the vocabulary");
  }
}

std::vector<double> checked_logits(const LogitSource& source, std::span<const TokenId> prefix) {
  auto logits = source.next_logits(prefix);
  if (logits.size() != source.vocab_size()) {
    throw std::logic_error("logit source returned the wrong vector length");
  }
  return logits;
}

constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "h", "k", "l", "m", "n", "p",
                                        "r", "s", "t", "v", "z", "br", "tr", "st", "sh", "ch"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};

}  // namespace

std::size_t WatermarkParams::green_count() const noexcept {
  return static_cast<std::size_t>(std::floor(gamma * static_cast<double>(vocab_size) + 1e-9));
}

void WatermarkParams::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("gamma must be in (0, 1)");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw InvalidInput("delta must be >= 0");
  if (vocab_size < 2) throw InvalidInput("vocabulary must hold at least two tokens");
  if (green_count() < 1) throw InvalidInput("gamma * |V| must be at least 1");
}

void GreenList::insert(TokenId t) {
  if (member_.at(t) == 0) {
    member_[t] = 1;
    ++count_;
  }
}

GreenList green_set(TokenId prev_token, const WatermarkParams& params) {
  params.validate();
  if (prev_token >= params.vocab_size) throw InvalidInput("previous token outside the vocabulary");
  const std::size_t n = params.vocab_size;
  const std::size_t k = params.green_count();

  std::vector<TokenId> perm(n);
  std::iota(perm.begin(), perm.end(), TokenId{0});
  SplitMix64 rng(mix64(params.hash_key ^ static_cast<std::uint64_t>(prev_token)));
  GreenList green(n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
    green.insert(perm[i]);
  }
  return green;
}

std::vector<double> UniformLogits::next_logits(std::span<const TokenId>) const {
  return std::vector<double>(vocab_size_, 0.0);
}

ClassBigramLogits::ClassBigramLogits(std::size_t vocab_size, std::size_t classes, double spread,
                                     std::uint64_t seed)
    : vocab_size_(vocab_size), classes_(std::max<std::size_t>(classes, 1)),
      table_(classes_ * vocab_size) {
  SplitMix64 rng(seed);
  for (double& v : table_) {
    // Box-Muller, cosine branch only.
    const double u1 = 1.0 - rng.unit();
    const double u2 = rng.unit();
    v = spread * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
}

std::vector<double> ClassBigramLogits::next_logits(std::span<const TokenId> prefix) const {
  const std::size_t cls = prefix.empty() ? 0 : prefix.back() % classes_;
  const auto row = table_.begin() + static_cast<std::ptrdiff_t>(cls * vocab_size_);
  return {row, row + static_cast<std::ptrdiff_t>(vocab_size_)};
}

std::vector<TokenId> sample_watermarked(const LogitSource& source, const WatermarkParams& params,
                                        std::span<const TokenId> prompt, std::size_t length,
                                        double top_p, std::uint64_t seed) {
  params.validate();
  if (source.vocab_size() != params.vocab_size) {
    throw InvalidInput("logit source and watermark disagree on vocabulary size");
  }
  check_sampling_args(source, prompt, length, top_p);

  std::vector<TokenId> context(prompt.begin(), prompt.end());
  context.reserve(prompt.size() + length);
  SplitMix64 rng(seed);
  for (std::size_t step = 0; step < length; ++step) {
    auto logits = checked_logits(source, context);
    const GreenList green = green_set(context.back(), params);
    for (TokenId t = 0; t < logits.size(); ++t) {
      if (green.contains(t)) logits[t] += params.delta;
    }
    context.push_back(sample_nucleus(logits, top_p, rng));
  }
  return {context.begin() + static_cast<std::ptrdiff_t>(prompt.size()), context.end()};
}

std::vector<TokenId> sample_plain(const LogitSource& source, std::span<const TokenId> prompt,
                                  std::size_t length, double top_p, std::uint64_t seed) {
  check_sampling_args(source, prompt, length, top_p);
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  context.reserve(prompt.size() + length);
  SplitMix64 rng(seed);
  for (std::size_t step = 0; step < length; ++step) {
    auto logits = checked_logits(source, context);
    context.push_back(sample_nucleus(logits, top_p, rng));
  }
  return {context.begin() + static_cast<std::ptrdiff_t>(prompt.size()), context.end()};
}

double z_statistic(std::size_t scored_tokens, std::size_t green_count, double gamma) {
  const double t = static_cast<double>(scored_tokens);
  return (static_cast<double>(green_count) - gamma * t) / std::sqrt(t * gamma * (1.0 - gamma));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

ZReport z_score(std::span<const TokenId> tokens, const WatermarkParams& params) {
  params.validate();
  if (tokens.size() < 2) throw InvalidInput("sequence too short to score (need 2 tokens)");
  ZReport report;
  report.scored_tokens = tokens.size() - 1;
  for (std::size_t k = 1; k < tokens.size(); ++k) {
    if (tokens[k] >= params.vocab_size) throw InvalidInput("token outside the vocabulary");
    if (green_set(tokens[k - 1], params).contains(tokens[k])) ++report.green_count;
  }
  report.z = z_statistic(report.scored_tokens, report.green_count, params.gamma);
  report.p_value = 0.5 * std::erfc(report.z / std::sqrt(2.0));
  return report;
}

DetectionResult detect_watermark(std::span<const TokenId> tokens, const WatermarkParams& params,
                                 double threshold_z) {
  const ZReport report = z_score(tokens, params);
  DetectionResult r;
  r.method = DetectionMethod::watermark;
  r.statistic = report.z;
  r.score = normal_cdf(report.z);
  r.threshold_used = threshold_z;
  r.verdict = report.z > threshold_z;
  return r;
}

WordVocabulary::WordVocabulary(std::uint32_t size) {
  if (size < 2) throw InvalidInput("vocabulary must hold at least two words");
  words_.reserve(size);
  ids_.reserve(size);
  constexpr std::size_t onsets = std::size(kOnsets);
  constexpr std::size_t vowels = std::size(kVowels);
  constexpr std::size_t syllables = onsets * vowels;
  for (std::uint32_t id = 0; id < size; ++id) {
    // Bijective base-160 spelling, at least two syllables per word.
    std::string w;
    std::uint64_t x = id;
    std::size_t count = 0;
    do {
      const std::size_t s = x % syllables;
      w += kOnsets[s / vowels];
      w += kVowels[s % vowels];
      x /= syllables;
      ++count;
    } while (x > 0 || count < 2);
    ids_.emplace(w, id);
    words_.push_back(std::move(w));
  }
}

TokenId WordVocabulary::lookup(std::string_view word) const {
  std::string key;
  key.reserve(word.size());
  for (char c : word) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::ispunct(uc)) continue;
    key.push_back(static_cast<char>(std::tolower(uc)));
  }
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  return static_cast<TokenId>(fnv1a64(key) % words_.size());
}

std::vector<TokenId> WordVocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.push_back(lookup(text.substr(i, j - i)));
    i = j;
  }
  return out;
}

std::string WordVocabulary::render(std::span<const TokenId> ids, std::size_t sentence_length) const {
  std::string out;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (!out.empty()) out.push_back(' ');
    std::string w = words_.at(ids[k]);
    if (sentence_length > 0 && k % sentence_length == 0) {
      w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    }
    out += w;
    if (sentence_length > 0 && (k % sentence_length == sentence_length - 1 || k + 1 == ids.size())) {
      out.push_back('.');
    }
  }
  return out;
}

}  // namespace gendetect
