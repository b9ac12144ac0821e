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

// Logical block masks and their byte-packed symbol encoding.
//
// A cache mask holds one bit per query block (1 = compute, 0 = reuse cached
// output). A skip mask holds one bit per (query block, key block) pair
// (1 = compute, 0 = skip). Masks are produced at compressed granularity:
// every `pool_n` consecutive blocks share one bit. The packed form stores one
// bit per compressed block, MSB-first within each byte, zero-padded; each
// compressed skip row starts on a byte boundary.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace omni {

using Bits = std::vector<std::uint8_t>;  // one 0/1 entry per block
using Bytes = std::vector<std::uint8_t>;

class SkipMask {
 public:
  SkipMask() = default;
  SkipMask(std::size_t rows, std::size_t cols, std::uint8_t fill = 1)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint8_t at(std::size_t i, std::size_t j) const {
    return bits_[i * cols_ + j];
  }
  void set(std::size_t i, std::size_t j, bool v) {
    bits_[i * cols_ + j] = v ? 1 : 0;
  }
  std::span<const std::uint8_t> row(std::size_t i) const {
    return {bits_.data() + i * cols_, cols_};
  }
  std::size_t count_ones() const;

  friend bool operator==(const SkipMask&, const SkipMask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Bits bits_;
};

// Bytes needed for `bits` packed bits.
inline std::size_t packed_bytes(std::size_t bits) { return (bits + 7) / 8; }

// Replicates each compressed bit `pool_n` times and truncates to `length`.
Bits expand_bits(std::span<const std::uint8_t> compressed, std::size_t pool_n,
                 std::size_t length);
SkipMask expand_skip(const SkipMask& compressed, std::size_t pool_n,
                     std::size_t rows, std::size_t cols);

// Packs a block-granularity cache mask. Throws ConsistencyError when a pool
// group is not uniform.
Bytes encode_cache_mask(std::span<const std::uint8_t> blocks,
                        std::size_t pool_n);
Bytes encode_skip_mask(const SkipMask& blocks, std::size_t pool_n);

// Bit for query block i.
bool decode_spatial(std::span<const std::uint8_t> s_c, std::size_t i,
                    std::size_t pool_n);
// Bit for block pair (i, j) in a layout with `t_kv` key blocks per row.
bool decode_reduction(std::span<const std::uint8_t> s_s, std::size_t i,
                      std::size_t j, std::size_t pool_n, std::size_t t_kv);
// Expands compressed skip row `compressed_row` to `cols` per-block bits.
Bits decode_run(std::span<const std::uint8_t> s_s, std::size_t compressed_row,
                std::size_t pool_n, std::size_t cols);

inline constexpr std::uint32_t kSymbolFormatVersion = 1;
inline constexpr std::size_t kSymbolHeaderBytes = 16;

// Packed cache and skip symbols for one head.
class SymbolBuffer {
 public:
  SymbolBuffer() = default;
  // Validates lengths and that padding bits are zero.
  SymbolBuffer(std::size_t rows, std::size_t cols, std::size_t pool_n,
               Bytes s_c, Bytes s_s);

  static SymbolBuffer encode(std::span<const std::uint8_t> cache_blocks,
                             const SkipMask& skip_blocks, std::size_t pool_n);
  static SymbolBuffer all_active(std::size_t rows, std::size_t cols,
                                 std::size_t pool_n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t pool_n() const { return pool_n_; }
  std::size_t compressed_rows() const { return (rows_ + pool_n_ - 1) / pool_n_; }
  std::size_t compressed_cols() const { return (cols_ + pool_n_ - 1) / pool_n_; }
  std::size_t row_stride() const { return packed_bytes(compressed_cols()); }

  std::span<const std::uint8_t> s_c() const { return s_c_; }
  std::span<const std::uint8_t> s_s() const { return s_s_; }

  // Bounds-checked views over the decode functions.
  bool compute_block(std::size_t i) const;
  bool compute_pair(std::size_t i, std::size_t j) const;
  Bits row_run(std::size_t i) const;

  Bits cache_mask() const;
  SkipMask skip_mask() const;

  // Number of query blocks with cache bit 1.
  std::size_t active_blocks() const;

  // 16-byte little-endian header (rows, cols, pool_n, version) + s_c + s_s.
  Bytes serialize() const;
  static SymbolBuffer deserialize(std::span<const std::uint8_t> bytes);

  // Test hook: flips one stored bit of s_s.
  void corrupt_skip_bit(std::size_t byte, unsigned bit);

  friend bool operator==(const SymbolBuffer&, const SymbolBuffer&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t pool_n_ = 1;
  Bytes s_c_;
  Bytes s_s_;
};

}  // namespace omni
