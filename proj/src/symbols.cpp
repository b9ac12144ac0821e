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

#include "omni/symbols.hpp"

#include <algorithm>
#include <string>

#include "omni/error.hpp"

namespace omni {
namespace {

void require_pool(std::size_t pool_n) {
  if (pool_n == 0) throw ParameterError("pool_n must be >= 1");
}

inline bool get_bit(std::span<const std::uint8_t> bytes, std::size_t index) {
  return (bytes[index >> 3] >> (7 - (index & 7))) & 1u;
}

inline void set_bit(Bytes& bytes, std::size_t offset, std::size_t index) {
  bytes[offset + (index >> 3)] |=
      static_cast<std::uint8_t>(0x80u >> (index & 7));
}

// Collapses a pool group to its shared bit.
std::uint8_t group_bit(std::span<const std::uint8_t> bits, std::size_t group,
                       std::size_t pool_n, const char* what) {
  const std::size_t begin = group * pool_n;
  const std::size_t end = std::min(begin + pool_n, bits.size());
  const std::uint8_t first = bits[begin] ? 1 : 0;
  for (std::size_t k = begin + 1; k < end; ++k) {
    if ((bits[k] ? 1 : 0) != first) {
      throw ConsistencyError(std::string(what) + ": pool group " +
                             std::to_string(group) + " is not uniform");
    }
  }
  return first;
}

void put_u32(Bytes& out, std::size_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[off + b]) << (8 * b);
  return v;
}

}  // namespace

std::size_t SkipMask::count_ones() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

Bits expand_bits(std::span<const std::uint8_t> compressed, std::size_t pool_n,
                 std::size_t length) {
  require_pool(pool_n);
  if (compressed.size() * pool_n < length) {
    throw ShapeError("expand_bits: compressed mask too short");
  }
  Bits out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = compressed[i / pool_n] ? 1 : 0;
  return out;
}

SkipMask expand_skip(const SkipMask& compressed, std::size_t pool_n,
                     std::size_t rows, std::size_t cols) {
  require_pool(pool_n);
  if (compressed.rows() * pool_n < rows || compressed.cols() * pool_n < cols) {
    throw ShapeError("expand_skip: compressed mask too small");
  }
  SkipMask out(rows, cols, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out.set(i, j, compressed.at(i / pool_n, j / pool_n));
    }
  }
  return out;
}

Bytes encode_cache_mask(std::span<const std::uint8_t> blocks,
                        std::size_t pool_n) {
  require_pool(pool_n);
  const std::size_t groups = (blocks.size() + pool_n - 1) / pool_n;
  Bytes out(packed_bytes(groups), 0);
  for (std::size_t g = 0; g < groups; ++g) {
    if (group_bit(blocks, g, pool_n, "encode_cache_mask")) set_bit(out, 0, g);
  }
  return out;
}

Bytes encode_skip_mask(const SkipMask& blocks, std::size_t pool_n) {
  require_pool(pool_n);
  const std::size_t crows = (blocks.rows() + pool_n - 1) / pool_n;
  const std::size_t ccols = (blocks.cols() + pool_n - 1) / pool_n;
  const std::size_t stride = packed_bytes(ccols);
  Bytes out(crows * stride, 0);
  for (std::size_t cr = 0; cr < crows; ++cr) {
    const std::size_t r0 = cr * pool_n;
    const std::size_t r1 = std::min(r0 + pool_n, blocks.rows());
    for (std::size_t cc = 0; cc < ccols; ++cc) {
      const std::uint8_t bit = group_bit(blocks.row(r0), cc, pool_n,
                                         "encode_skip_mask");
      for (std::size_t r = r0 + 1; r < r1; ++r) {
        if (group_bit(blocks.row(r), cc, pool_n, "encode_skip_mask") != bit) {
          throw ConsistencyError("encode_skip_mask: pool group (" +
                                 std::to_string(cr) + ", " +
                                 std::to_string(cc) + ") is not uniform");
        }
      }
      if (bit) set_bit(out, cr * stride, cc);
    }
  }
  return out;
}

bool decode_spatial(std::span<const std::uint8_t> s_c, std::size_t i,
                    std::size_t pool_n) {
  require_pool(pool_n);
  const std::size_t c = i / pool_n;
  if ((c >> 3) >= s_c.size()) {
    throw BoundsError("decode_spatial: block " + std::to_string(i) +
                      " outside symbol buffer");
  }
  return get_bit(s_c, c);
}

bool decode_reduction(std::span<const std::uint8_t> s_s, std::size_t i,
                      std::size_t j, std::size_t pool_n, std::size_t t_kv) {
  require_pool(pool_n);
  if (j >= t_kv) {
    throw BoundsError("decode_reduction: key block " + std::to_string(j) +
                      " >= " + std::to_string(t_kv));
  }
  const std::size_t stride = packed_bytes((t_kv + pool_n - 1) / pool_n);
  const std::size_t row_off = (i / pool_n) * stride;
  const std::size_t c = j / pool_n;
  if (row_off + (c >> 3) >= s_s.size()) {
    throw BoundsError("decode_reduction: query block " + std::to_string(i) +
                      " outside symbol buffer");
  }
  return get_bit(s_s.subspan(row_off), c);
}

Bits decode_run(std::span<const std::uint8_t> s_s, std::size_t compressed_row,
                std::size_t pool_n, std::size_t cols) {
  require_pool(pool_n);
  const std::size_t ccols = (cols + pool_n - 1) / pool_n;
  const std::size_t stride = packed_bytes(ccols);
  if ((compressed_row + 1) * stride > s_s.size()) {
    throw BoundsError("decode_run: row " + std::to_string(compressed_row) +
                      " outside symbol buffer");
  }
  auto row = s_s.subspan(compressed_row * stride, stride);
  Bits out(cols);
  // Each byte is unpacked once; its bits cover up to 8 * pool_n blocks.
  std::size_t j = 0;
  for (std::size_t byte = 0; byte < stride && j < cols; ++byte) {
    const std::uint8_t value = row[byte];
    for (unsigned b = 0; b < 8 && j < cols; ++b) {
      const std::uint8_t bit = (value >> (7 - b)) & 1u;
      for (std::size_t r = 0; r < pool_n && j < cols; ++r) out[j++] = bit;
    }
  }
  return out;
}

SymbolBuffer::SymbolBuffer(std::size_t rows, std::size_t cols,
                           std::size_t pool_n, Bytes s_c, Bytes s_s)
    : rows_(rows), cols_(cols), pool_n_(pool_n), s_c_(std::move(s_c)),
      s_s_(std::move(s_s)) {
  require_pool(pool_n);
  const std::size_t crows = compressed_rows();
  const std::size_t ccols = compressed_cols();
  if (s_c_.size() != packed_bytes(crows)) {
    throw ShapeError("SymbolBuffer: s_c length " + std::to_string(s_c_.size()) +
                     " != " + std::to_string(packed_bytes(crows)));
  }
  if (s_s_.size() != crows * row_stride()) {
    throw ShapeError("SymbolBuffer: s_s length " + std::to_string(s_s_.size()) +
                     " != " + std::to_string(crows * row_stride()));
  }
  for (std::size_t b = crows; b < s_c_.size() * 8; ++b) {
    if (get_bit(s_c_, b)) throw ConsistencyError("SymbolBuffer: s_c padding set");
  }
  for (std::size_t r = 0; r < crows; ++r) {
    auto row = std::span<const std::uint8_t>(s_s_).subspan(r * row_stride(),
                                                          row_stride());
    for (std::size_t b = ccols; b < row_stride() * 8; ++b) {
      if (get_bit(row, b)) throw ConsistencyError("SymbolBuffer: s_s padding set");
    }
  }
}

SymbolBuffer SymbolBuffer::encode(std::span<const std::uint8_t> cache_blocks,
                                  const SkipMask& skip_blocks,
                                  std::size_t pool_n) {
  if (skip_blocks.rows() != cache_blocks.size()) {
    throw ShapeError("SymbolBuffer::encode: cache/skip row counts differ");
  }
  return SymbolBuffer(cache_blocks.size(), skip_blocks.cols(), pool_n,
                      encode_cache_mask(cache_blocks, pool_n),
                      encode_skip_mask(skip_blocks, pool_n));
}

SymbolBuffer SymbolBuffer::all_active(std::size_t rows, std::size_t cols,
                                      std::size_t pool_n) {
  Bits cache(rows, 1);
  return encode(cache, SkipMask(rows, cols, 1), pool_n);
}

bool SymbolBuffer::compute_block(std::size_t i) const {
  if (i >= rows_) {
    throw BoundsError("SymbolBuffer: block " + std::to_string(i) + " >= " +
                      std::to_string(rows_));
  }
  return decode_spatial(s_c_, i, pool_n_);
}

bool SymbolBuffer::compute_pair(std::size_t i, std::size_t j) const {
  if (i >= rows_) {
    throw BoundsError("SymbolBuffer: block " + std::to_string(i) + " >= " +
                      std::to_string(rows_));
  }
  return decode_reduction(s_s_, i, j, pool_n_, cols_);
}

Bits SymbolBuffer::row_run(std::size_t i) const {
  if (i >= rows_) {
    throw BoundsError("SymbolBuffer: block " + std::to_string(i) + " >= " +
                      std::to_string(rows_));
  }
  return decode_run(s_s_, i / pool_n_, pool_n_, cols_);
}

Bits SymbolBuffer::cache_mask() const {
  Bits out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = compute_block(i);
  return out;
}

SkipMask SymbolBuffer::skip_mask() const {
  SkipMask out(rows_, cols_, 0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const Bits run = row_run(i);
    for (std::size_t j = 0; j < cols_; ++j) out.set(i, j, run[j]);
  }
  return out;
}

std::size_t SymbolBuffer::active_blocks() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < rows_; ++i) n += compute_block(i) ? 1 : 0;
  return n;
}

Bytes SymbolBuffer::serialize() const {
  Bytes out;
  out.reserve(kSymbolHeaderBytes + s_c_.size() + s_s_.size());
  put_u32(out, rows_);
  put_u32(out, cols_);
  put_u32(out, pool_n_);
  put_u32(out, kSymbolFormatVersion);
  out.insert(out.end(), s_c_.begin(), s_c_.end());
  out.insert(out.end(), s_s_.begin(), s_s_.end());
  return out;
}

SymbolBuffer SymbolBuffer::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSymbolHeaderBytes) {
    throw ShapeError("SymbolBuffer: truncated header");
  }
  const std::size_t rows = get_u32(bytes, 0);
  const std::size_t cols = get_u32(bytes, 4);
  const std::size_t pool_n = get_u32(bytes, 8);
  const std::uint32_t version = get_u32(bytes, 12);
  if (version != kSymbolFormatVersion) {
    throw ParameterError("SymbolBuffer: unsupported version " +
                         std::to_string(version));
  }
  require_pool(pool_n);
  const std::size_t crows = (rows + pool_n - 1) / pool_n;
  const std::size_t sc_len = packed_bytes(crows);
  const std::size_t ss_len = crows * packed_bytes((cols + pool_n - 1) / pool_n);
  if (bytes.size() != kSymbolHeaderBytes + sc_len + ss_len) {
    throw ShapeError("SymbolBuffer: payload length mismatch");
  }
  auto body = bytes.subspan(kSymbolHeaderBytes);
  return SymbolBuffer(rows, cols, pool_n, Bytes(body.begin(), body.begin() + sc_len),
                      Bytes(body.begin() + sc_len, body.end()));
}

void SymbolBuffer::corrupt_skip_bit(std::size_t byte, unsigned bit) {
  if (byte >= s_s_.size() || bit > 7) throw BoundsError("corrupt_skip_bit");
  s_s_[byte] ^= static_cast<std::uint8_t>(1u << bit);
}

}  // namespace omni
