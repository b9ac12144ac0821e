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

#include "omni/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "omni/error.hpp"
#include "omni/workload.hpp"

namespace omni {
namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < a.cols(); ++p) acc += a.at(i, p) * b.at(p, j);
      c.at(i, j) = acc;
    }
  }
  return c;
}

// Double-precision attention with no shared code paths.
Matrix naive_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
  const std::size_t n = q.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix out(n, v.cols());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(k.rows());
    double mx = -1e300;
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double dot = 0.0;
      for (std::size_t e = 0; e < q.cols(); ++e) dot += double(q.at(i, e)) * k.at(j, e);
      s[j] = dot * scale;
      mx = std::max(mx, s[j]);
    }
    double z = 0.0;
    for (double& x : s) z += (x = std::exp(x - mx));
    for (std::size_t e = 0; e < v.cols(); ++e) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k.rows(); ++j) acc += s[j] * v.at(j, e);
      out.at(i, e) = static_cast<float>(acc / z);
    }
  }
  return out;
}

TEST(MatrixTest, RejectsBadData) {
  EXPECT_THROW(Matrix(2, 2, std::vector<float>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Matrix(1, 2, std::vector<float>{1, NAN}), ParameterError);
  EXPECT_THROW(Matrix(1, 1, std::vector<float>{INFINITY}), ParameterError);
}

TEST(MatmulTest, IdentityAndHandComputed) {
  const Matrix b(2, 2, std::vector<float>{3, 4, 5, 6});
  EXPECT_EQ(matmul(Matrix::identity(2), b), b);
  const Matrix a(1, 2, std::vector<float>{1, 2});
  const Matrix c(2, 1, std::vector<float>{3, 4});
  EXPECT_EQ(matmul(a, c), Matrix(1, 1, std::vector<float>{11}));
}

TEST(MatmulTest, MatchesTripleLoopExactly) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = random_normal(7, 5, 1.0f, seed);
    const Matrix b = random_normal(5, 3, 1.0f, seed + 100);
    EXPECT_EQ(matmul(a, b), naive_matmul(a, b));
  }
}

TEST(MatmulTest, ShapeMismatch) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST(SoftmaxTest, KnownRows) {
  const Matrix p = row_softmax(Matrix(3, 3, std::vector<float>{
                                                0, 0, 0,
                                                1000, 1000, 0,
                                                1, 2, 3}));
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(p.at(0, j), 1.0 / 3.0, 1e-7);
  EXPECT_NEAR(p.at(1, 0), 0.5, 1e-7);
  EXPECT_NEAR(p.at(1, 1), 0.5, 1e-7);
  // exp(i) / (e + e^2 + e^3) in long double.
  const long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(p.at(2, j), static_cast<double>(std::exp(j + 1.0L) / z), 1e-6);
  }
  EXPECT_NEAR(p.at(2, 0), 0.09003, 1e-4);
  EXPECT_NEAR(p.at(2, 1), 0.24473, 1e-4);
  EXPECT_NEAR(p.at(2, 2), 0.66524, 1e-4);
}

TEST(SoftmaxTest, RowsSumToOneAtLargeMagnitude) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> dist(-1e4f, 1e4f);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> data(8 * 33);
    for (float& v : data) v = dist(rng);
    const Matrix p = row_softmax(Matrix(8, 33, data));
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double sum = 0.0;
      for (float v : p.row(r)) {
        EXPECT_GE(v, 0.0f);  // far tails underflow to 0
        EXPECT_LE(v, 1.0f);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(DenseAttentionTest, SingleTokenReturnsValue) {
  const Matrix q = random_normal(1, 8, 1.0f, 1);
  const Matrix k = random_normal(1, 8, 1.0f, 2);
  const Matrix v = random_normal(1, 8, 1.0f, 3);
  EXPECT_EQ(dense_attention(q, k, v), v);
}

TEST(DenseAttentionTest, OrthogonalQueryAveragesValues) {
  // q lives in dims [0, 2), k in dims [2, 4).
  Matrix q(3, 4);
  Matrix k(3, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    q.at(i, 0) = 1.0f + i;
    q.at(i, 1) = -2.0f;
    k.at(i, 2) = 0.5f * i;
    k.at(i, 3) = 3.0f;
  }
  const Matrix v = random_normal(3, 4, 1.0f, 9);
  const Matrix o = dense_attention(q, k, v);
  for (std::size_t e = 0; e < 4; ++e) {
    const float mean = (v.at(0, e) + v.at(1, e) + v.at(2, e)) / 3.0f;
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(o.at(i, e), mean, 1e-6);
  }
}

TEST(DenseAttentionTest, MatchesNaiveOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix q = random_normal(16, 8, 1.0f, seed * 3);
    const Matrix k = random_normal(16, 8, 1.0f, seed * 3 + 1);
    const Matrix v = random_normal(16, 8, 1.0f, seed * 3 + 2);
    EXPECT_LE(relative_error(dense_attention(q, k, v), naive_attention(q, k, v)), 1e-5);
  }
}

TEST(DenseAttentionTest, ShapeMismatch) {
  EXPECT_THROW(dense_attention(Matrix(4, 8), Matrix(4, 6), Matrix(4, 8)), ShapeError);
  EXPECT_THROW(dense_attention(Matrix(4, 8), Matrix(4, 8), Matrix(3, 8)), ShapeError);
}

TEST(DenseAttentionTest, ScoreRowShiftInvariance) {
  const Matrix q = random_normal(12, 8, 1.0f, 21);
  const Matrix k = random_normal(12, 8, 1.0f, 22);
  const Matrix v = random_normal(12, 8, 1.0f, 23);
  Matrix scores = matmul_transposed(q, k);
  scores *= 1.0f / std::sqrt(8.0f);
  const Matrix base = matmul(row_softmax(scores), v);
  EXPECT_LE(relative_error(base, dense_attention(q, k, v)), 1e-6);
  for (float shift : {-50.0f, 3.0f, 1e3f}) {
    Matrix shifted = scores;
    for (float& s : shifted.row(5)) s += shift;
    EXPECT_LE(relative_error(matmul(row_softmax(shifted), v), base), 1e-5);
  }
}

TEST(RmsNormTest, ZeroAndConstantInputs) {
  const std::vector<float> w(6, 1.0f);
  for (float y : rms_norm(std::vector<float>(6, 0.0f), w, 1e-6f)) EXPECT_EQ(y, 0.0f);
  for (float c : {-3.5f, 0.25f, 7.0f}) {
    for (float y : rms_norm(std::vector<float>(6, c), w, 0.0f)) {
      EXPECT_NEAR(y, c > 0 ? 1.0f : -1.0f, 1e-6);
    }
  }
}

TEST(RmsNormTest, MatchesScalarReference) {
  const Matrix x = random_normal(1, 32, 2.0f, 5);
  const Matrix w = random_normal(1, 32, 1.0f, 6);
  const auto y = rms_norm(x.row(0), w.row(0), 1e-6f);
  double ms = 0.0;
  for (float v : x.row(0)) ms += double(v) * v;
  const double inv = 1.0 / std::sqrt(ms / 32.0 + 1e-6);
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_NEAR(y[i], x.at(0, i) * w.at(0, i) * inv, 1e-6);
  }
}

TEST(RopeTest, ZeroPositionIsIdentity) {
  const Matrix x = random_normal(1, 16, 1.0f, 3);
  const auto y = rope(x.row(0), 0);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(y[i], x.at(0, i));
}

TEST(RopeTest, PreservesPairNorms) {
  const Matrix x = random_normal(1, 64, 1.0f, 4);
  for (std::size_t pos : {1u, 17u, 1000u, 33000u}) {
    const auto y = rope(x.row(0), pos);
    for (std::size_t j = 0; j < 32; ++j) {
      const double before = std::hypot(x.at(0, 2 * j), x.at(0, 2 * j + 1));
      const double after = std::hypot(y[2 * j], y[2 * j + 1]);
      EXPECT_NEAR(after, before, 1e-6);
    }
  }
}

TEST(RopeTest, MatchesExplicitRotationsAtD4) {
  const std::vector<float> x = {0.3f, -1.2f, 2.0f, 0.7f};
  const auto y = rope(x, 1);
  // Angles 1 * 10000^0 and 1 * 10000^(-1/2).
  const double a0 = 1.0;
  const double a1 = 0.01;
  const double want[4] = {
      std::cos(a0) * x[0] - std::sin(a0) * x[1],
      std::sin(a0) * x[0] + std::cos(a0) * x[1],
      std::cos(a1) * x[2] - std::sin(a1) * x[3],
      std::sin(a1) * x[2] + std::cos(a1) * x[3],
  };
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y[i], want[i], 1e-6);
}

TEST(RopeTest, OddDimensionRejected) {
  EXPECT_THROW(rope(std::vector<float>(5, 1.0f), 3), ShapeError);
}

TEST(MeanPoolTest, IdentityAndConstantBlocks) {
  const Matrix x = random_normal(5, 3, 1.0f, 8);
  EXPECT_EQ(mean_pool_blocks(x, 1), x);
  Matrix y(4, 2);
  for (std::size_t c = 0; c < 2; ++c) {
    y.at(0, c) = y.at(1, c) = 1.5f + c;
    y.at(2, c) = y.at(3, c) = -4.0f * c;
  }
  const Matrix p = mean_pool_blocks(y, 2);
  EXPECT_EQ(p.rows(), 2u);
  EXPECT_EQ(p.at(0, 1), 2.5f);
  EXPECT_EQ(p.at(1, 1), -4.0f);
}

TEST(MeanPoolTest, PartialTrailingBlock) {
  const Matrix x = random_normal(5, 4, 1.0f, 9);
  const Matrix p = mean_pool_blocks(x, 2);
  ASSERT_EQ(p.rows(), 3u);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(p.at(2, c), x.at(4, c));
    EXPECT_NEAR(p.at(1, c), 0.5 * (x.at(2, c) + x.at(3, c)), 1e-7);
  }
  EXPECT_THROW(mean_pool_blocks(x, 0), ParameterError);
}

TEST(MeanPoolTest, ReplicateThenPoolIsProjection) {
  for (std::size_t pool : {1u, 2u, 3u, 4u, 8u}) {
    const Matrix x = random_normal(13, 6, 1.0f, pool);
    const Matrix p = mean_pool_blocks(x, pool);
    Matrix replicated(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) replicated.at(r, c) = p.at(r / pool, c);
    }
    EXPECT_EQ(mean_pool_blocks(replicated, pool), p) << "pool " << pool;
  }
}

}  // namespace
}  // namespace omni
