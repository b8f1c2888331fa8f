#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gendetect/diversity_codes.hpp"

namespace gendetect {

inline constexpr double kDefaultGapPenalty = -0.3;

/// One step of a global alignment; nullopt on a side marks a gap.
struct AlignmentStep {
  std::optional<std::size_t> src;
  std::optional<std::size_t> tgt;

  bool operator==(const AlignmentStep&) const = default;
};

struct AlignmentPath {
  std::vector<AlignmentStep> steps;
  double score = 0.0;
};

/// Dense N x M similarity matrix, row-major.
class SimilarityMatrix {
 public:
  SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  SimilarityMatrix(std::size_t rows, std::size_t cols,
                   const std::function<double(std::size_t, std::size_t)>& fill);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

using SentenceSimilarity = std::function<double(std::string_view, std::string_view)>;

/// Needleman-Wunsch over sentence similarities with a linear gap penalty.
/// Ties prefer a match, then a gap on the source side, then a gap on the
/// target side. Throws InvalidInput when either side is empty.
AlignmentPath align(const SimilarityMatrix& sim, double gap_penalty = kDefaultGapPenalty);
AlignmentPath align(std::span<const std::string> p_sents, std::span<const std::string> q_sents,
                    const SentenceSimilarity& sim, double gap_penalty = kDefaultGapPenalty);

/// A run of source sentences [src_begin, src_end) paired with a run of target
/// sentences [tgt_begin, tgt_end).
struct AlignedBlock {
  std::size_t src_begin = 0;
  std::size_t src_end = 0;
  std::size_t tgt_begin = 0;
  std::size_t tgt_end = 0;

  bool operator==(const AlignedBlock&) const = default;
};

/// Groups a path into blocks, one per matched pair. Unmatched sentences on
/// either side join the next block, or the last block when none follows.
std::vector<AlignedBlock> merge_alignment(const AlignmentPath& path);

/// Inclusive, 0-based run of source sentences.
struct SentenceRange {
  std::size_t first = 0;
  std::size_t last = 0;
};

inline constexpr std::size_t kMaxSpanSentences = 3;

struct TrainingExample {
  ControlCodes codes;
  std::string left_context;
  std::vector<std::string> input_sentences;
  std::string right_context;
  std::string target;

  std::string input() const;
  /// codes, left, "<p> input </p>", right joined with single spaces; empty
  /// parts are skipped.
  std::string render(CodeConvention convention = CodeConvention::diversity) const;
  /// One JSON object with keys codes, left, input, right, target.
  std::string to_jsonl(CodeConvention convention = CodeConvention::diversity) const;
};

/// Parts recovered from a rendered example.
struct RenderedParts {
  ControlCodes codes;
  std::string left;
  std::string input;
  std::string right;
};
std::optional<RenderedParts> parse_rendered(std::string_view rendered,
                                            CodeConvention convention = CodeConvention::diversity);

/// Builds a training example for source sentences span.first..span.last.
/// The span must cover whole blocks of merge_alignment(path) and hold at most
/// kMaxSpanSentences sentences. The matching target sentences are shuffled
/// with seeded_shuffle(SplitMix64(seed)).
TrainingExample make_example(std::span<const std::string> p_sents,
                             std::span<const std::string> q_sents, const AlignmentPath& path,
                             SentenceRange span, std::uint64_t seed);

}  // namespace gendetect
