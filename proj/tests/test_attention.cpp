#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "oracles.hpp"
#include "spfu/attention.hpp"
#include "spfu/rng.hpp"

using namespace spfu;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, SeededRng& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = static_cast<float>(rng.normal());
  return m;
}

struct Case {
  Matrix q, k, v;
  std::vector<std::size_t> frames;
  std::size_t T;
};

Case random_case(std::size_t T, std::size_t per_frame, std::size_t d, std::uint64_t seed) {
  SeededRng rng(seed);
  Case c{random_matrix(T * per_frame, d, rng), random_matrix(T * per_frame, d, rng),
         random_matrix(T * per_frame, d, rng), frame_indices(T, per_frame), T};
  return c;
}

}  // namespace

TEST(ProjectQkv, IdentityAndZeroWeights) {
  SeededRng rng(1);
  const auto tokens = make_tokens(random_matrix(8, 4, rng), 2, 2, 2);
  const auto id = project_qkv(tokens, QkvWeights::identity(4));
  EXPECT_EQ(id.q, tokens.features);
  EXPECT_EQ(id.k, tokens.features);
  EXPECT_EQ(id.v, tokens.features);
  const QkvWeights zero{Matrix(4, 4), Matrix(4, 4), Matrix(4, 4)};
  const auto z = project_qkv(tokens, zero);
  for (float v : z.q.data()) EXPECT_EQ(v, 0.0f);
  for (float v : z.v.data()) EXPECT_EQ(v, 0.0f);
}

TEST(ProjectQkv, MatchesNaiveMatmul) {
  SeededRng rng(2);
  const auto tokens = make_tokens(random_matrix(8, 5, rng), 8, 1, 1);
  const QkvWeights w{random_matrix(5, 5, rng), random_matrix(5, 5, rng), random_matrix(5, 5, rng)};
  const auto p = project_qkv(tokens, w);
  EXPECT_LE(max_abs_diff(p.q, oracle::matmul(tokens.features, w.query)), 1e-6);
  EXPECT_LE(max_abs_diff(p.k, oracle::matmul(tokens.features, w.key)), 1e-6);
  EXPECT_LE(max_abs_diff(p.v, oracle::matmul(tokens.features, w.value)), 1e-6);
}

TEST(ProjectQkv, DimensionMismatchThrows) {
  SeededRng rng(3);
  const auto tokens = make_tokens(random_matrix(4, 3, rng), 4, 1, 1);
  EXPECT_THROW(project_qkv(tokens, QkvWeights::identity(4)), ShapeMismatch);
}

TEST(MaskedAttention, WideWindowEqualsGlobal) {
  const auto c = random_case(5, 3, 4, 10);
  const auto g = global_attention(c.q, c.k, c.v, c.frames);
  EXPECT_EQ(masked_attention(c.q, c.k, c.v, c.frames, AttentionWindow::local(2 * c.T)), g);
  EXPECT_EQ(masked_attention(c.q, c.k, c.v, c.frames, AttentionWindow::local(c.T)), g);
}

TEST(MaskedAttention, SpanTwoAttendsOwnFrameOnly) {
  const auto c = random_case(6, 4, 3, 11);
  const auto out = masked_attention(c.q, c.k, c.v, c.frames, AttentionWindow::local(2));
  const auto ref = oracle::attention(c.q, c.k, c.v, c.frames, [](std::size_t i, std::size_t j) { return i == j; });
  EXPECT_LE(max_abs_diff(out, ref), 1e-6);
}

TEST(MaskedAttention, SpanOneAdmitsOwnFrame) {
  const auto c = random_case(4, 2, 3, 12);
  const auto one = masked_attention(c.q, c.k, c.v, c.frames, AttentionWindow::local(1));
  EXPECT_EQ(one, masked_attention(c.q, c.k, c.v, c.frames, AttentionWindow::local(2)));
}

TEST(MaskedAttention, StrictInequalityWithFloorHalf) {
  // span 5 -> floor 2 -> |i - j| < 2, i.e. neighbours at distance 1 only.
  const AttentionWindow w = AttentionWindow::local(5);
  EXPECT_TRUE(w.admits(3, 4, 10));
  EXPECT_FALSE(w.admits(3, 5, 10));
  // span 6 -> floor 3 -> distance up to 2.
  EXPECT_TRUE(AttentionWindow::local(6).admits(3, 5, 10));
  EXPECT_FALSE(AttentionWindow::local(6).admits(3, 6, 10));
}

TEST(MaskedAttention, MatchesOracleOnRandomCases) {
  SeededRng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t T = 1 + rng.below(12), per = 1 + rng.below(6), d = 1 + rng.below(6);
    const std::size_t span = 1 + rng.below(2 * T + 1);
    const auto c = random_case(T, per, d, rng.next_u64());
    const auto out = masked_attention(c.q, c.k, c.v, c.frames, AttentionWindow::local(span));
    const auto ref = oracle::attention(c.q, c.k, c.v, c.frames, [&](std::size_t i, std::size_t j) {
      return oracle::window_admits(i, j, span, T);
    });
    ASSERT_LE(max_abs_diff(out, ref), 1e-6) << "T=" << T << " span=" << span;
  }
}

TEST(MaskedAttention, RowsAreConvexCombinations) {
  const auto c = random_case(7, 3, 4, 14);
  for (std::size_t span : {1u, 3u, 4u, 9u, 20u}) {
    const auto a = attention_weights(c.q, c.k, c.frames, window_admission(AttentionWindow::local(span), c.T));
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        ASSERT_GE(a(i, j), 0.0f);
        if (!oracle::window_admits(c.frames[i], c.frames[j], span, c.T)) ASSERT_EQ(a(i, j), 0.0f);
        s += a(i, j);
      }
      ASSERT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(MaskedAttention, RowCountMismatchThrows) {
  SeededRng rng(15);
  const auto q = random_matrix(4, 2, rng), k = random_matrix(3, 2, rng), v = random_matrix(4, 2, rng);
  EXPECT_THROW(global_attention(q, k, v, frame_indices(4, 1)), ShapeMismatch);
}

TEST(MaskedAttention, WithinFramePermutationEquivariance) {
  const std::size_t per = 4;
  const auto c = random_case(5, per, 3, 16);
  std::vector<std::size_t> perm(c.q.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::reverse(perm.begin() + 2 * per, perm.begin() + 3 * per);
  auto permute = [&](const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t j = 0; j < m.cols(); ++j) out(r, j) = m(perm[r], j);
    return out;
  };
  const auto w = AttentionWindow::local(4);
  const auto lhs = masked_attention(permute(c.q), permute(c.k), permute(c.v), c.frames, w);
  const auto rhs = permute(masked_attention(c.q, c.k, c.v, c.frames, w));
  EXPECT_LE(max_abs_diff(lhs, rhs), 1e-6);
}

TEST(MaskedAttention, ResultIndependentOfThreadCount) {
  const auto c = random_case(8, 16, 4, 17);
  set_thread_count(1);
  const auto one = masked_attention(c.q, c.k, c.v, c.frames, AttentionWindow::local(6));
  set_thread_count(4);
  const auto four = masked_attention(c.q, c.k, c.v, c.frames, AttentionWindow::local(6));
  set_thread_count(0);
  EXPECT_EQ(one, four);
}

TEST(SparseAttention, AllFramesIsGlobalBitForBit) {
  const auto c = random_case(6, 3, 4, 20);
  std::vector<std::size_t> all(c.T);
  std::iota(all.begin(), all.end(), std::size_t{0});
  EXPECT_EQ(sparse_attention(c.q, c.k, c.v, c.frames, all), global_attention(c.q, c.k, c.v, c.frames));
}

TEST(SparseAttention, DropsNonKeyFrameColumns) {
  const auto c = random_case(4, 5, 3, 21);
  const std::vector<std::size_t> keys{0, 2};
  const auto out = sparse_attention(c.q, c.k, c.v, c.frames, keys);
  const auto ref = oracle::attention(c.q, c.k, c.v, c.frames,
                                     [](std::size_t, std::size_t j) { return j == 0 || j == 2; });
  EXPECT_LE(max_abs_diff(out, ref), 1e-6);
}

TEST(SparseAttention, HalfFrameKeysCountHalfTheMacs) {
  const auto c = random_case(8, 4, 3, 22);
  AttentionStats dense, sparse;
  global_attention(c.q, c.k, c.v, c.frames, &dense);
  sparse_attention(c.q, c.k, c.v, c.frames, uniform_keyframes(8, 0.5), &sparse);
  EXPECT_EQ(dense.score_macs, 32u * 32u * 3u);
  EXPECT_EQ(sparse.score_macs * 2, dense.score_macs);
  EXPECT_EQ(sparse.value_macs * 2, dense.value_macs);
}

TEST(SparseAttention, EmptyOrOutOfRangeKeyframesThrow) {
  const auto c = random_case(4, 1, 2, 23);
  EXPECT_THROW(sparse_attention(c.q, c.k, c.v, c.frames, std::vector<std::size_t>{}), InvalidParameter);
  EXPECT_THROW(sparse_attention(c.q, c.k, c.v, c.frames, std::vector<std::size_t>{4}), InvalidParameter);
}

TEST(UniformKeyframes, Examples) {
  EXPECT_EQ(uniform_keyframes(8, 0.5), (std::vector<std::size_t>{0, 2, 4, 6}));
  EXPECT_EQ(uniform_keyframes(5, 0.5), (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_EQ(uniform_keyframes(6, 1.0), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(uniform_keyframes(10, 0.3), (std::vector<std::size_t>{0, 4, 7}));
}

TEST(UniformKeyframes, CountAndSpacingProperties) {
  for (std::size_t T = 1; T <= 40; ++T)
    for (double f : {0.1, 0.25, 0.5, 0.75, 1.0}) {
      const auto k = uniform_keyframes(T, f);
      ASSERT_EQ(k.size(), std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(f * T - 1e-9))));
      ASSERT_EQ(k.front(), 0u);
      ASSERT_LT(k.back(), T);
      // Gaps differ by at most one frame.
      std::set<std::size_t> gaps;
      for (std::size_t i = 1; i < k.size(); ++i) gaps.insert(k[i] - k[i - 1]);
      if (!gaps.empty()) ASSERT_LE(*gaps.rbegin() - *gaps.begin(), 1u);
    }
}

TEST(UniformKeyframes, FractionOutOfRange) {
  EXPECT_THROW(uniform_keyframes(8, 0.0), InvalidParameter);
  EXPECT_THROW(uniform_keyframes(8, 1.5), InvalidParameter);
}

TEST(AttentionWindow, OneHotArgmaxSurvivesShrinkingWindow) {
  const std::size_t T = 10;
  Matrix q(T, T), k(T, T);
  for (std::size_t i = 0; i < T; ++i) {
    q(i, (i + 2) % T) = 25.0f;  // target frame i + 2 (wraps at the end)
    k(i, i) = 1.0f;
  }
  const auto fi = frame_indices(T, 1);
  for (std::size_t span = 2 * T; span >= 6; --span) {
    const auto a = attention_weights(q, k, fi, window_admission(AttentionWindow::local(span), T));
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t target = (i + 2) % T;
      if (!oracle::window_admits(i, target, span, T)) continue;
      std::size_t best = 0;
      for (std::size_t j = 1; j < T; ++j)
        if (a(i, j) > a(i, best)) best = j;
      ASSERT_EQ(best, target) << "span " << span << " row " << i;
    }
  }
}

TEST(TokenLayout, LatentRoundTrip) {
  const auto x = gaussian_latent({3, 4, 2, 5}, 30);
  const auto tok = tokens_from_latent(x);
  EXPECT_EQ(tok.d_model(), 3u);
  EXPECT_EQ(tok.size(), 40u);
  EXPECT_EQ(tok.frame_index[10], 1u);
  EXPECT_EQ(tok.features(13, 2), x(2, 1, 0, 3));
  EXPECT_EQ(latent_from_tokens(tok), x);
}

TEST(TokenLayout, ValidateRejectsScrambledFrames) {
  auto tok = tokens_from_latent(gaussian_latent({1, 3, 1, 2}, 1));
  EXPECT_NO_THROW(validate(tok));
  std::swap(tok.frame_index[1], tok.frame_index[2]);
  EXPECT_THROW(validate(tok), ShapeMismatch);
}
