#include "gendetect/paragraph_aligner.hpp"

#include <algorithm>

#include <json.hpp>

#include "gendetect/errors.hpp"
#include "gendetect/rng.hpp"

namespace gendetect {
namespace {

enum class Move : std::uint8_t { none, match, src_gap, tgt_gap };

constexpr std::string_view kOpenTag = "<p>";
constexpr std::string_view kCloseTag = "</p>";

}  // namespace

SimilarityMatrix::SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) throw InvalidInput("similarity matrix size mismatch");
}

SimilarityMatrix::SimilarityMatrix(std::size_t rows, std::size_t cols,
                                   const std::function<double(std::size_t, std::size_t)>& fill)
    : rows_(rows), cols_(cols), values_(rows * cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) values_[i * cols + j] = fill(i, j);
  }
}

AlignmentPath align(const SimilarityMatrix& sim, double gap_penalty) {
  const std::size_t n = sim.rows();
  const std::size_t m = sim.cols();
  if (n == 0 || m == 0) throw InvalidInput("cannot align an empty paragraph");

  const std::size_t width = m + 1;
  std::vector<double> score((n + 1) * width);
  std::vector<Move> move((n + 1) * width, Move::none);
  for (std::size_t i = 1; i <= n; ++i) {
    score[i * width] = static_cast<double>(i) * gap_penalty;
    move[i * width] = Move::tgt_gap;
  }
  for (std::size_t j = 1; j <= m; ++j) {
    score[j] = static_cast<double>(j) * gap_penalty;
    move[j] = Move::src_gap;
  }

  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      double best = score[(i - 1) * width + j - 1] + sim(i - 1, j - 1);
      Move how = Move::match;
      if (const double s = score[i * width + j - 1] + gap_penalty; s > best) {
        best = s;
        how = Move::src_gap;
      }
      if (const double s = score[(i - 1) * width + j] + gap_penalty; s > best) {
        best = s;
        how = Move::tgt_gap;
      }
      score[i * width + j] = best;
      move[i * width + j] = how;
    }
  }

  AlignmentPath path;
  path.score = score[n * width + m];
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    switch (move[i * width + j]) {
      case Move::match:
        path.steps.push_back({i - 1, j - 1});
        --i;
        --j;
        break;
      case Move::src_gap:
        path.steps.push_back({std::nullopt, j - 1});
        --j;
        break;
      case Move::tgt_gap:
        path.steps.push_back({i - 1, std::nullopt});
        --i;
        break;
      case Move::none:
        throw std::logic_error("alignment traceback reached an unset cell");
    }
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return path;
}

AlignmentPath align(std::span<const std::string> p_sents, std::span<const std::string> q_sents,
                    const SentenceSimilarity& sim, double gap_penalty) {
  if (p_sents.empty() || q_sents.empty()) throw InvalidInput("cannot align an empty paragraph");
  SimilarityMatrix matrix(p_sents.size(), q_sents.size(),
                          [&](std::size_t i, std::size_t j) { return sim(p_sents[i], q_sents[j]); });
  return align(matrix, gap_penalty);
}

std::vector<AlignedBlock> merge_alignment(const AlignmentPath& path) {
  constexpr auto kNone = static_cast<std::size_t>(-1);
  std::vector<AlignedBlock> blocks;
  std::size_t pending_src = kNone;
  std::size_t pending_tgt = kNone;
  std::size_t src_next = 0;
  std::size_t tgt_next = 0;

  for (const auto& step : path.steps) {
    if (step.src && pending_src == kNone) pending_src = *step.src;
    if (step.tgt && pending_tgt == kNone) pending_tgt = *step.tgt;
    if (step.src) src_next = *step.src + 1;
    if (step.tgt) tgt_next = *step.tgt + 1;
    if (step.src && step.tgt) {
      blocks.push_back({pending_src, src_next, pending_tgt, tgt_next});
      pending_src = kNone;
      pending_tgt = kNone;
    }
  }
  if (pending_src != kNone || pending_tgt != kNone) {
    if (blocks.empty()) {
      blocks.push_back({pending_src == kNone ? 0 : pending_src, pending_src == kNone ? 0 : src_next,
                        pending_tgt == kNone ? 0 : pending_tgt, pending_tgt == kNone ? 0 : tgt_next});
    } else {
      if (pending_src != kNone) blocks.back().src_end = src_next;
      if (pending_tgt != kNone) blocks.back().tgt_end = tgt_next;
    }
  }
  return blocks;
}

std::string TrainingExample::input() const { return join_sentences(input_sentences); }

std::string TrainingExample::render(CodeConvention convention) const {
  std::string out = render_codes(codes, convention);
  auto add = [&out](std::string_view part) {
    if (part.empty()) return;
    out.push_back(' ');
    out.append(part);
  };
  add(left_context);
  add(kOpenTag);
  add(input());
  add(kCloseTag);
  add(right_context);
  return out;
}

std::string TrainingExample::to_jsonl(CodeConvention convention) const {
  nlohmann::ordered_json j;
  j["codes"] = render_codes(codes, convention);
  j["left"] = left_context;
  j["input"] = input();
  j["right"] = right_context;
  j["target"] = target;
  return j.dump();
}

std::optional<RenderedParts> parse_rendered(std::string_view rendered, CodeConvention convention) {
  std::size_t consumed = 0;
  auto codes = parse_codes(rendered, convention, &consumed);
  if (!codes) return std::nullopt;
  std::string_view rest = rendered.substr(consumed);

  const auto open = rest.find(kOpenTag);
  const auto close = rest.rfind(kCloseTag);
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return std::nullopt;
  }
  auto trim = [](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return std::string(s);
  };
  RenderedParts parts;
  parts.codes = *codes;
  parts.left = trim(rest.substr(0, open));
  parts.input = trim(rest.substr(open + kOpenTag.size(), close - open - kOpenTag.size()));
  parts.right = trim(rest.substr(close + kCloseTag.size()));
  return parts;
}

TrainingExample make_example(std::span<const std::string> p_sents,
                             std::span<const std::string> q_sents, const AlignmentPath& path,
                             SentenceRange span, std::uint64_t seed) {
  if (span.first > span.last || span.last >= p_sents.size()) {
    throw InvalidInput("sentence span out of range");
  }
  if (span.last - span.first + 1 > kMaxSpanSentences) {
    throw InvalidInput("span exceeds the maximum of 3 sentences");
  }

  const auto blocks = merge_alignment(path);
  std::optional<std::size_t> tgt_begin;
  std::size_t tgt_end = 0;
  std::size_t covered_begin = 0;
  std::size_t covered_end = 0;
  for (const auto& b : blocks) {
    if (b.src_end <= span.first || b.src_begin > span.last) continue;
    if (!tgt_begin) {
      tgt_begin = b.tgt_begin;
      covered_begin = b.src_begin;
    }
    tgt_end = b.tgt_end;
    covered_end = b.src_end;
  }
  if (!tgt_begin || covered_begin != span.first || covered_end != span.last + 1 ||
      tgt_end <= *tgt_begin || tgt_end > q_sents.size()) {
    throw InvalidInput("span is not covered by whole aligned blocks");
  }

  TrainingExample ex;
  ex.input_sentences.assign(q_sents.begin() + static_cast<std::ptrdiff_t>(*tgt_begin),
                            q_sents.begin() + static_cast<std::ptrdiff_t>(tgt_end));
  SplitMix64 rng(seed);
  seeded_shuffle(std::span<std::string>(ex.input_sentences), rng);

  ex.left_context = join_sentences(p_sents.subspan(0, span.first));
  ex.target = join_sentences(p_sents.subspan(span.first, span.last - span.first + 1));
  ex.right_context = join_sentences(p_sents.subspan(span.last + 1));
  ex.codes = control_codes(normalize_tokens(ex.target), normalize_tokens(ex.input()));
  return ex;
}

}  // namespace gendetect
