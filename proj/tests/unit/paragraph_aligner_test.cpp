#include <gtest/gtest.h>

#include <algorithm>

#include "gendetect/errors.hpp"
#include "gendetect/paragraph_aligner.hpp"
#include "gendetect/retrieval_index.hpp"
#include "gendetect/text_normalize.hpp"
#include "oracles.hpp"

namespace gendetect {
namespace {

SimilarityMatrix to_matrix(const std::vector<std::vector<double>>& m) {
  return SimilarityMatrix(m.size(), m[0].size(),
                          [&](std::size_t i, std::size_t j) { return m[i][j]; });
}

double path_score(const AlignmentPath& p, const std::vector<std::vector<double>>& m, double gap) {
  double s = 0.0;
  for (const auto& st : p.steps) s += (st.src && st.tgt) ? m[*st.src][*st.tgt] : gap;
  return s;
}

TEST(Align, DiagonalWhenIdentity) {
  const std::vector<std::vector<double>> m = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const auto p = align(to_matrix(m));
  ASSERT_EQ(p.steps.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(p.steps[i].src, i);
    EXPECT_EQ(p.steps[i].tgt, i);
  }
  EXPECT_DOUBLE_EQ(p.score, 3.0);
}

TEST(Align, EmptyInputThrows) {
  EXPECT_THROW(align(SimilarityMatrix(0, 0, std::vector<double>{})), InvalidInput);
}

TEST(Align, OptimalAgainstExhaustiveSearch) {
  gen::Gen g(31);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = g.matrix(g.size(1, 5), g.size(1, 5));
    const double gap = -g.real(0.0, 0.8);
    const auto p = align(to_matrix(m), gap);
    EXPECT_NEAR(p.score, oracle::exhaustive_align_score(m, gap), 1e-9);
    EXPECT_NEAR(p.score, path_score(p, m, gap), 1e-9);
  }
}

TEST(Align, PathIsMonotoneAndCoversEverySentenceOnce) {
  gen::Gen g(32);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = g.matrix(g.size(1, 7), g.size(1, 7));
    const auto p = align(to_matrix(m), -g.real(0.0, 1.0));
    std::size_t next_src = 0, next_tgt = 0;
    for (const auto& st : p.steps) {
      ASSERT_TRUE(st.src || st.tgt);
      if (st.src) EXPECT_EQ(*st.src, next_src++);
      if (st.tgt) EXPECT_EQ(*st.tgt, next_tgt++);
    }
    EXPECT_EQ(next_src, m.size());
    EXPECT_EQ(next_tgt, m[0].size());
  }
}

TEST(MergeAlignment, BlocksPartitionBothSides) {
  gen::Gen g(33);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = g.matrix(g.size(1, 7), g.size(1, 7));
    const auto blocks = merge_alignment(align(to_matrix(m), -g.real(0.0, 1.0)));
    ASSERT_FALSE(blocks.empty());
    std::size_t s = 0, t = 0;
    for (const auto& b : blocks) {
      EXPECT_EQ(b.src_begin, s);
      EXPECT_EQ(b.tgt_begin, t);
      s = b.src_end;
      t = b.tgt_end;
    }
    EXPECT_EQ(s, m.size());
    EXPECT_EQ(t, m[0].size());
  }
}

TEST(MergeAlignment, GapAttachesToFollowingMatch) {
  AlignmentPath p;
  p.steps = {{0, 0}, {std::nullopt, 1}, {1, 2}};
  const auto blocks = merge_alignment(p);
  ASSERT_EQ(blocks.size(), 2u);
  EXPECT_EQ(blocks[1].tgt_begin, 1u);
  EXPECT_EQ(blocks[1].tgt_end, 3u);
}

TEST(MergeAlignment, TrailingGapAttachesBackward) {
  AlignmentPath p;
  p.steps = {{0, 0}, {1, 1}, {std::nullopt, 2}};
  const auto blocks = merge_alignment(p);
  ASSERT_EQ(blocks.size(), 2u);
  EXPECT_EQ(blocks[1].tgt_end, 3u);
}

std::vector<std::string> sentences(gen::Gen& g, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s = g.sentence_text(3, 8, 10);
    s.front() = static_cast<char>(s.front() - 'a' + 'A');
    out.push_back(s);
  }
  return out;
}

TEST(MakeExample, TargetIsSpanAndInputPermutesAlignedSentences) {
  gen::Gen g(34);
  int built = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = sentences(g, g.size(2, 6));
    const auto q = sentences(g, g.size(2, 6));
    const auto path = align(p, q, [](std::string_view a, std::string_view b) {
      return unigram_f1(normalize_tokens(a), normalize_tokens(b));
    });
    const auto blocks = merge_alignment(path);
    const auto& b = blocks[g.size(0, blocks.size() - 1)];
    if (b.src_end - b.src_begin > kMaxSpanSentences || b.src_end == b.src_begin) continue;
    const SentenceRange span{b.src_begin, b.src_end - 1};
    const auto ex = make_example(p, q, path, span, g.bits());
    ++built;
    EXPECT_EQ(ex.target, join_sentences(std::span(p).subspan(span.first, span.last - span.first + 1)));
    auto got = ex.input_sentences;
    std::vector<std::string> want(q.begin() + static_cast<std::ptrdiff_t>(b.tgt_begin),
                                  q.begin() + static_cast<std::ptrdiff_t>(b.tgt_end));
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got, want);
    EXPECT_EQ(ex.left_context, join_sentences(std::span(p).subspan(0, span.first)));

    const auto parts = parse_rendered(ex.render());
    ASSERT_TRUE(parts.has_value());
    EXPECT_EQ(parts->codes.lexical, ex.codes.lexical);
    EXPECT_EQ(parts->codes.order, ex.codes.order);
    EXPECT_EQ(parts->input, ex.input());
    EXPECT_EQ(parts->left, ex.left_context);
    EXPECT_EQ(parts->right, ex.right_context);
  }
  EXPECT_GT(built, 50);
}

TEST(MakeExample, SameSeedSameShuffle) {
  const std::vector<std::string> p = {"Alpha one.", "Beta two.", "Gamma three."};
  const std::vector<std::string> q = {"Alpha one.", "Beta two.", "Gamma three."};
  AlignmentPath path;
  path.steps = {{0, 0}, {1, 1}, {2, 2}};
  const auto a = make_example(p, q, path, {0, 2}, 99);
  const auto b = make_example(p, q, path, {0, 2}, 99);
  EXPECT_EQ(a.input_sentences, b.input_sentences);
}

TEST(MakeExample, RejectsBadSpans) {
  const std::vector<std::string> p = {"A.", "B.", "C.", "D."};
  AlignmentPath path;
  path.steps = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  EXPECT_THROW(make_example(p, p, path, {0, 3}, 1), InvalidInput);
  EXPECT_THROW(make_example(p, p, path, {2, 1}, 1), InvalidInput);
  EXPECT_THROW(make_example(p, p, path, {0, 4}, 1), InvalidInput);
}

TEST(EmbeddingSimilarity, ClampedCosine) {
  const auto sim = embedding_similarity();
  EXPECT_NEAR(sim("the river runs", "the river runs"), 1.0, 1e-9);
  const double v = sim("quiet harbor", "loud engine");
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1.0);
}

}  // namespace
}  // namespace gendetect
