// Copyright 2026 The omnisparse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "omni/attention.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "omni/error.hpp"
#include "omni/workload.hpp"

namespace omni {
namespace {

// Softmax over exactly the unskipped key blocks, double precision.
Matrix masked_oracle(const Matrix& q, const Matrix& k, const Matrix& v,
                     const SkipMask& skip, std::size_t i, std::size_t b_q,
                     std::size_t b_k) {
  const std::size_t r0 = i * b_q;
  const std::size_t r1 = std::min(r0 + b_q, q.rows());
  Matrix out(r1 - r0, v.cols());
  for (std::size_t r = r0; r < r1; ++r) {
    std::vector<double> w;
    std::vector<std::size_t> keys;
    for (std::size_t t = 0; t < k.rows(); ++t) {
      if (!skip.at(i, t / b_k)) continue;
      double s = 0;
      for (std::size_t e = 0; e < q.cols(); ++e) s += double(q.at(r, e)) * k.at(t, e);
      w.push_back(s / std::sqrt(double(q.cols())));
      keys.push_back(t);
    }
    const double mx = *std::max_element(w.begin(), w.end());
    double z = 0;
    for (double& x : w) z += (x = std::exp(x - mx));
    for (std::size_t e = 0; e < v.cols(); ++e) {
      double acc = 0;
      for (std::size_t n = 0; n < keys.size(); ++n) acc += w[n] * v.at(keys[n], e);
      out.at(r - r0, e) = static_cast<float>(acc / z);
    }
  }
  return out;
}

Matrix filled(std::size_t r, std::size_t c, float v) { return Matrix(r, c, v); }

TEST(UpdateCacheTest, ColdStartAndConstantTrajectory) {
  FeatureCacheEntry e;
  const Matrix o = random_normal(4, 3, 1.0f, 1);
  update_cache(e, o, 2, 0);
  EXPECT_EQ(e.valid_orders(), 1u);
  EXPECT_EQ(e.diff_stack[0], o);
  update_cache(e, o, 2, 6);
  EXPECT_EQ(e.valid_orders(), 2u);
  EXPECT_EQ(e.diff_stack[1], Matrix(4, 3));
  EXPECT_EQ(e.last_update_step, 6u);
}

TEST(UpdateCacheTest, QuadraticTrajectoryHasConstantSecondDifference) {
  // f(u) = 3 - 2u + 1.5u^2 per element, small integers keep arithmetic exact.
  FeatureCacheEntry e;
  for (int u = 0; u < 5; ++u) {
    update_cache(e, filled(2, 2, 3.0f - 2.0f * u + 1.5f * u * u), 2);
    EXPECT_EQ(e.valid_orders(), std::min(u + 1, 3));
    if (u >= 2) { EXPECT_EQ(e.diff_stack[2], filled(2, 2, 3.0f)); }
  }
}

TEST(OpReuseTest, ZerothOrderIsPlainReuse) {
  FeatureCacheEntry e;
  update_cache(e, random_normal(3, 5, 1.0f, 2), 1);
  update_cache(e, random_normal(3, 5, 1.0f, 3), 1);
  EXPECT_EQ(op_reuse(e, 3, 6, 0), e.diff_stack[0]);
}

TEST(OpReuseTest, HalfStepCoefficients) {
  FeatureCacheEntry e;
  const Matrix a = random_normal(3, 5, 1.0f, 4);
  const Matrix b = random_normal(3, 5, 1.0f, 5);
  update_cache(e, a, 1);
  update_cache(e, b, 1);
  EXPECT_EQ(reuse_coefficients(2, 4, 1, 2), (std::vector<float>{1.0f, 0.5f}));
  const Matrix got = op_reuse(e, 2, 4, 1);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      const float diff = b.at(r, c) - a.at(r, c);
      EXPECT_EQ(got.at(r, c), b.at(r, c) + 0.5f * diff);
    }
  }
}

TEST(OpReuseTest, AffineTrajectoryIsForecastExactly) {
  const Matrix base = random_normal(8, 6, 1.0f, 6);
  const Matrix slope = random_normal(8, 6, 0.1f, 7);
  for (std::size_t interval : {2u, 3u, 5u, 6u}) {
    FeatureCacheEntry e;
    for (std::size_t t : {0u, static_cast<unsigned>(interval)}) {
      update_cache(e, base + slope * static_cast<float>(t), 1, t);
    }
    for (std::size_t k = 1; k < interval; ++k) {
      const Matrix want = base + slope * static_cast<float>(interval + k);
      EXPECT_LE(relative_error(op_reuse(e, k, interval, 1), want), 1e-5);
    }
  }
}

TEST(OpReuseTest, IsLinearInTheStack) {
  FeatureCacheEntry e1, e2, mix;
  const float a = 0.75f, b = -1.25f;
  for (int u = 0; u < 3; ++u) {
    const Matrix x = random_normal(4, 4, 1.0f, 10 + u);
    const Matrix y = random_normal(4, 4, 1.0f, 20 + u);
    update_cache(e1, x, 2);
    update_cache(e2, y, 2);
    update_cache(mix, x * a + y * b, 2);
  }
  for (std::size_t k = 1; k < 6; ++k) {
    const Matrix lhs = op_reuse(mix, k, 6, 2);
    const Matrix rhs = op_reuse(e1, k, 6, 2) * a + op_reuse(e2, k, 6, 2) * b;
    EXPECT_LE(relative_error(lhs, rhs), 1e-6);
  }
}

TEST(OpReuseTest, Errors) {
  FeatureCacheEntry cold;
  EXPECT_THROW(op_reuse(cold, 1, 4, 1), StateError);
  FeatureCacheEntry e;
  update_cache(e, Matrix(2, 2), 1);
  EXPECT_THROW(op_reuse(e, 0, 4, 1), ParameterError);
  EXPECT_THROW(op_reuse(e, 4, 4, 1), ParameterError);
}

TEST(OnlineSoftmaxTest, SingleBlockMatchesDense) {
  const Matrix q = random_normal(6, 8, 1.0f, 1);
  const Matrix k = random_normal(5, 8, 1.0f, 2);
  const Matrix v = random_normal(5, 8, 1.0f, 3);
  OnlineSoftmaxState st(6, 8);
  Matrix scores = matmul_transposed(q, k);
  scores *= 1.0f / std::sqrt(8.0f);
  online_softmax_update(st, scores, v);
  EXPECT_LE(relative_error(st.finalize(), dense_attention(q, k, v)), 1e-6);
}

TEST(OnlineSoftmaxTest, BlockOrderAndShiftInvariance) {
  std::vector<Matrix> scores, values;
  for (int b = 0; b < 4; ++b) {
    scores.push_back(random_normal(3, 4, 2.0f, 30 + b));
    values.push_back(random_normal(4, 5, 1.0f, 40 + b));
  }
  auto reduce = [&](std::vector<int> order, float shift_block0) {
    OnlineSoftmaxState st(3, 5);
    for (int b : order) {
      Matrix s = scores[b];
      if (b == 0) for (float& x : s.data()) x += shift_block0;
      online_softmax_update(st, s, values[b]);
    }
    return st.finalize();
  };
  const Matrix ref = reduce({0, 1, 2, 3}, 0.0f);
  EXPECT_LE(relative_error(reduce({3, 1, 0, 2}, 0.0f), ref), 1e-5);
  EXPECT_LE(relative_error(reduce({2, 3, 1, 0}, 0.0f), ref), 1e-5);
  // Shifting one block's scores alone changes its weight; shift all rows of
  // every block instead to test invariance of the normalized result.
  OnlineSoftmaxState st(3, 5);
  for (int b = 0; b < 4; ++b) {
    Matrix s = scores[b];
    for (float& x : s.data()) x += 100.0f;
    online_softmax_update(st, s, values[b]);
  }
  EXPECT_LE(relative_error(st.finalize(), ref), 1e-5);
}

TEST(OnlineSoftmaxTest, EmptyStateRefusesToFinalize) {
  OnlineSoftmaxState st(2, 2);
  EXPECT_THROW(st.finalize(), PolicyError);
}

TEST(FlashOmniAttentionTest, AllActiveMatchesDense) {
  for (std::size_t n : {32u, 64u, 128u}) {
    for (std::size_t d : {8u, 16u, 64u}) {
      for (std::size_t b : {8u, 16u}) {
        const Matrix q = random_normal(n, d, 1.0f, n + d);
        const Matrix k = random_normal(n, d, 1.0f, n + d + 1);
        const Matrix v = random_normal(n, d, 1.0f, n + d + 2);
        AttentionParams p;
        p.block_q = p.block_k = b;
        AttentionCounters counters;
        const Matrix got = flashomni_attention(
            q, k, v, SymbolBuffer::all_active(n / b, n / b, 2), {}, p, &counters);
        EXPECT_LE(relative_error(got, dense_attention(q, k, v)), 1e-5);
        EXPECT_EQ(counters.pairs_skipped(), 0u);
        EXPECT_EQ(counters.pairs_total, (n / b) * (n / b));
      }
    }
  }
}

TEST(FlashOmniAttentionTest, RaggedTailBlocks) {
  const Matrix q = random_normal(45, 8, 1.0f, 1);
  const Matrix k = random_normal(45, 8, 1.0f, 2);
  const Matrix v = random_normal(45, 8, 1.0f, 3);
  AttentionParams p;
  p.block_q = 16;
  p.block_k = 8;
  const Matrix got =
      flashomni_attention(q, k, v, SymbolBuffer::all_active(3, 6, 1), {}, p);
  EXPECT_LE(relative_error(got, dense_attention(q, k, v)), 1e-5);
}

TEST(FlashOmniAttentionTest, FullCacheReusesEveryTile) {
  const std::size_t n = 64, d = 8, b = 16;
  HeadCache cache(n / b);
  for (std::size_t i = 0; i < cache.size(); ++i) {
    update_cache(cache[i], random_normal(b, d, 1.0f, 100 + i), 1);
    update_cache(cache[i], random_normal(b, d, 1.0f, 200 + i), 1);
  }
  const SymbolBuffer sym = SymbolBuffer::encode(Bits(4, 0), SkipMask(4, 4, 0), 1);
  AttentionParams p;
  p.block_q = p.block_k = b;
  p.interval_n = 5;
  p.order_d = 1;
  p.elapsed_k = 3;
  AttentionCounters counters;
  const Matrix got = flashomni_attention(random_normal(n, d, 1.0f, 1),
                                         random_normal(n, d, 1.0f, 2),
                                         random_normal(n, d, 1.0f, 3), sym,
                                         cache, p, &counters);
  EXPECT_EQ(counters.pairs_computed, 0u);
  EXPECT_EQ(counters.score_macs, 0u);
  EXPECT_EQ(counters.tiles_cached, 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(got.slice_rows(i * b, (i + 1) * b), op_reuse(cache[i], 3, 5, 1));
  }
}

TEST(FlashOmniAttentionTest, RandomMasksMatchMaskedOracle) {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.5);
  const std::size_t n = 128, d = 8, b = 16, t = n / b;
  for (int trial = 0; trial < 20; ++trial) {
    Bits cache_bits(t);
    SkipMask skip(t, t, 0);
    HeadCache cache(t);
    std::uint64_t want_skipped = 0;
    for (std::size_t i = 0; i < t; ++i) {
      cache_bits[i] = coin(rng);
      update_cache(cache[i], random_normal(b, d, 1.0f, rng()), 0);
      if (!cache_bits[i]) {
        want_skipped += t;
        continue;
      }
      for (std::size_t j = 0; j < t; ++j) skip.set(i, j, coin(rng));
      skip.set(i, rng() % t, true);
      for (std::size_t j = 0; j < t; ++j) want_skipped += skip.at(i, j) ? 0 : 1;
    }
    const SymbolBuffer sym = SymbolBuffer::encode(cache_bits, skip, 1);
    const Matrix q = random_normal(n, d, 1.0f, rng());
    const Matrix k = random_normal(n, d, 1.0f, rng());
    const Matrix v = random_normal(n, d, 1.0f, rng());
    AttentionParams p;
    p.block_q = p.block_k = b;
    p.interval_n = 4;
    p.elapsed_k = 1;
    AttentionCounters counters;
    const Matrix got = flashomni_attention(q, k, v, sym, cache, p, &counters);
    EXPECT_EQ(counters.pairs_skipped(), want_skipped);
    for (std::size_t i = 0; i < t; ++i) {
      const Matrix tile = got.slice_rows(i * b, (i + 1) * b);
      if (cache_bits[i]) {
        EXPECT_LE(relative_error(tile, masked_oracle(q, k, v, skip, i, b, b)), 1e-5);
      } else {
        EXPECT_EQ(tile, cache[i].diff_stack[0]);
      }
    }
  }
}

TEST(FlashOmniAttentionTest, BiasModeLeavesCachedRowsUnwritten) {
  const std::size_t n = 32, d = 4, b = 8;
  const SymbolBuffer sym =
      SymbolBuffer::encode(Bits{1, 0, 0, 1}, SkipMask(4, 4, 1), 1);
  AttentionParams p;
  p.block_q = p.block_k = b;
  p.mode = ReuseMode::kBias;
  p.poison_unwritten = true;
  const Matrix got = flashomni_attention(random_normal(n, d, 1.0f, 1),
                                         random_normal(n, d, 1.0f, 2),
                                         random_normal(n, d, 1.0f, 3), sym, {}, p);
  for (std::size_t r = 0; r < n; ++r) {
    const bool cached = r >= 8 && r < 24;
    EXPECT_EQ(std::isnan(got.at(r, 0)), cached) << "row " << r;
  }
}

TEST(FlashOmniAttentionTest, Errors) {
  const Matrix x = random_normal(16, 4, 1.0f, 1);
  AttentionParams p;
  p.block_q = p.block_k = 8;
  p.interval_n = 3;
  p.elapsed_k = 1;
  // Cached tile without cache state.
  const SymbolBuffer cached = SymbolBuffer::encode(Bits{0, 1}, SkipMask(2, 2, 1), 1);
  EXPECT_THROW(flashomni_attention(x, x, x, cached, {}, p), StateError);
  // Active row with every key block skipped.
  SkipMask skip(2, 2, 1);
  skip.set(1, 0, false);
  skip.set(1, 1, false);
  const SymbolBuffer starved = SymbolBuffer::encode(Bits{1, 1}, skip, 1);
  EXPECT_THROW(flashomni_attention(x, x, x, starved, {}, p), PolicyError);
  EXPECT_THROW(flashomni_attention(x, x, x, SymbolBuffer::all_active(3, 2, 1), {}, p),
               ShapeError);
}

}  // namespace
}  // namespace omni
