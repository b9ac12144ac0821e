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

#include <algorithm>
#include <cmath>
#include <string>

#include "omni/error.hpp"

namespace omni {
namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) throw ParameterError("Matrix: non-finite fill");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                     " != " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  for (float v : data_) {
    if (!std::isfinite(v)) throw ParameterError("Matrix: non-finite value");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0f;
  return m;
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw BoundsError("slice_rows: bad range");
  Matrix out(end - begin, cols_);
  std::copy(data_.begin() + begin * cols_, data_.begin() + end * cols_,
            out.data_.begin());
  return out;
}

void Matrix::set_rows(std::size_t begin, const Matrix& src) {
  if (src.cols_ != cols_ || begin + src.rows_ > rows_) {
    throw ShapeError("set_rows: source does not fit");
  }
  std::copy(src.data_.begin(), src.data_.end(),
            data_.begin() + begin * cols_);
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t.at(c, r) = at(r, c);
  }
  return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(float s) {
  for (float& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, float s) { return a *= s; }

void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + " differ");
  }
  if (c.rows() != a.rows() || c.cols() != b.cols()) {
    throw ShapeError("matmul: output shape mismatch");
  }
  // i-p-j order keeps each c[i][j] summed in ascending p.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    auto lhs = a.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const float s = lhs[p];
      auto rhs = b.row(p);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += s * rhs[j];
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + " differ");
  }
  Matrix c(a.rows(), b.cols());
  matmul_accumulate(a, b, c);
  return c;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_transposed: width differs");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto lhs = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto rhs = b.row(j);
      float acc = 0.0f;
      for (std::size_t p = 0; p < lhs.size(); ++p) acc += lhs[p] * rhs[p];
      c.at(i, j) = acc;
    }
  }
  return c;
}

void softmax_inplace(std::span<float> row) {
  if (row.empty()) return;
  const float mx = *std::max_element(row.begin(), row.end());
  float sum = 0.0f;
  for (float& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  const float inv = 1.0f / sum;
  for (float& v : row) v *= inv;
}

Matrix row_softmax(const Matrix& s) {
  Matrix p = s;
  for (std::size_t r = 0; r < p.rows(); ++r) softmax_inplace(p.row(r));
  return p;
}

Matrix dense_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
  if (q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows()) {
    throw ShapeError("dense_attention: q/k/v shapes disagree");
  }
  if (q.rows() == 0 || k.rows() == 0) {
    throw ShapeError("dense_attention: empty sequence");
  }
  Matrix scores = matmul_transposed(q, k);
  scores *= 1.0f / std::sqrt(static_cast<float>(q.cols()));
  return matmul(row_softmax(scores), v);
}

void rms_norm_inplace(std::span<float> x, std::span<const float> weight,
                      float eps) {
  if (x.empty() || weight.size() != x.size()) {
    throw ShapeError("rms_norm: weight length must equal x length (>= 1)");
  }
  float sq = 0.0f;
  for (float v : x) sq += v * v;
  const float inv = 1.0f / std::sqrt(sq / static_cast<float>(x.size()) + eps);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = x[i] * weight[i] * inv;
}

std::vector<float> rms_norm(std::span<const float> x,
                            std::span<const float> weight, float eps) {
  std::vector<float> y(x.begin(), x.end());
  rms_norm_inplace(y, weight, eps);
  return y;
}

void rope_inplace(std::span<float> x, std::size_t position) {
  const std::size_t d = x.size();
  if (d % 2 != 0) throw ShapeError("rope: dimension must be even");
  for (std::size_t j = 0; j < d / 2; ++j) {
    const double theta =
        std::pow(kRopeBase, -2.0 * static_cast<double>(j) /
                                static_cast<double>(d));
    const double angle = static_cast<double>(position) * theta;
    const float c = static_cast<float>(std::cos(angle));
    const float s = static_cast<float>(std::sin(angle));
    const float x0 = x[2 * j];
    const float x1 = x[2 * j + 1];
    x[2 * j] = x0 * c - x1 * s;
    x[2 * j + 1] = x0 * s + x1 * c;
  }
}

std::vector<float> rope(std::span<const float> x, std::size_t position) {
  std::vector<float> y(x.begin(), x.end());
  rope_inplace(y, position);
  return y;
}

Matrix mean_pool_blocks(const Matrix& x, std::size_t pool) {
  if (pool == 0) throw ParameterError("mean_pool_blocks: pool must be >= 1");
  const std::size_t out_rows = ceil_div(x.rows(), pool);
  Matrix out(out_rows, x.cols());
  // Double sums make pooling a group of identical rows exact.
  std::vector<double> acc(x.cols());
  for (std::size_t b = 0; b < out_rows; ++b) {
    const std::size_t begin = b * pool;
    const std::size_t end = std::min(begin + pool, x.rows());
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t r = begin; r < end; ++r) {
      auto src = x.row(r);
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += src[c];
    }
    const double count = static_cast<double>(end - begin);
    auto dst = out.row(b);
    for (std::size_t c = 0; c < acc.size(); ++c) {
      dst[c] = static_cast<float>(acc[c] / count);
    }
  }
  return out;
}

double relative_error(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "relative_error");
  double diff = 0.0;
  double ref = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double e = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    diff += e * e;
    ref += static_cast<double>(db[i]) * static_cast<double>(db[i]);
  }
  if (ref == 0.0) return std::sqrt(diff);
  return std::sqrt(diff / ref);
}

}  // namespace omni
