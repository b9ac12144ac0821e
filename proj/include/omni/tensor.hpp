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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace omni {

// Row-major dense float32 matrix. Values are checked finite when the matrix is
// built from caller data; later writes through row()/at() are unchecked.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);
  Matrix(std::size_t rows, std::size_t cols, float fill);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  // Copy of rows [begin, end).
  Matrix slice_rows(std::size_t begin, std::size_t end) const;
  // Overwrites rows starting at `begin` with `src`.
  void set_rows(std::size_t begin, const Matrix& src);

  Matrix transposed() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(float s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, float s);

// c = a * b with float accumulation in ascending inner-index order.
Matrix matmul(const Matrix& a, const Matrix& b);
// c += a * b, same accumulation order as matmul.
void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& c);
// c = a * b^T.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

// Numerically stable softmax of each row (max subtraction).
Matrix row_softmax(const Matrix& s);
void softmax_inplace(std::span<float> row);

// O = softmax(Q K^T / sqrt(d)) V.
Matrix dense_attention(const Matrix& q, const Matrix& k, const Matrix& v);

// y = x * weight / sqrt(mean(x^2) + eps).
std::vector<float> rms_norm(std::span<const float> x,
                            std::span<const float> weight, float eps);
void rms_norm_inplace(std::span<float> x, std::span<const float> weight,
                      float eps);

inline constexpr double kRopeBase = 10000.0;

// Interleaved pairwise rotary encoding: pair (2j, 2j+1) rotated by
// position * base^(-2j/d).
std::vector<float> rope(std::span<const float> x, std::size_t position);
void rope_inplace(std::span<float> x, std::size_t position);

// Row i of the result is the mean of input rows [i*pool, min((i+1)*pool, N)).
Matrix mean_pool_blocks(const Matrix& x, std::size_t pool);

// Frobenius-norm relative error ||a - b|| / ||b||; absolute when b is zero.
double relative_error(const Matrix& a, const Matrix& b);

inline std::size_t ceil_div(std::size_t a, std::size_t b) {
  return (a + b - 1) / b;
}

}  // namespace omni
