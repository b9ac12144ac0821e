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

// Block-tiled sparse attention with per-tile dispatch between a
// cache-then-reuse path (Taylor forecast of cached outputs) and a
// compute-on-demand path that skips key blocks flagged in the skip symbols.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "omni/symbols.hpp"
#include "omni/tensor.hpp"

namespace omni {

// Cached output of one (head, query block) plus its backward finite
// differences across consecutive Update steps. diff_stack[d] is the d-th
// difference; the stack grows by one per update up to order_d + 1 entries.
struct FeatureCacheEntry {
  std::vector<Matrix> diff_stack;
  std::size_t last_update_step = 0;

  std::size_t valid_orders() const { return diff_stack.size(); }
  bool warm() const { return !diff_stack.empty(); }
};

// Indexed by query block.
using HeadCache = std::vector<FeatureCacheEntry>;
// Indexed by head, then query block.
using FeatureCache = std::vector<HeadCache>;

void update_cache(FeatureCacheEntry& entry, const Matrix& o_new,
                  std::size_t order_d, std::size_t step = 0);

// c_d = (elapsed_k / interval_n)^d / d! for d = 0..min(order_d, valid - 1).
std::vector<float> reuse_coefficients(std::size_t elapsed_k,
                                      std::size_t interval_n,
                                      std::size_t order_d,
                                      std::size_t valid_orders);

// Sum_d c_d * diff_stack[d].
Matrix op_reuse(const FeatureCacheEntry& entry, std::size_t elapsed_k,
                std::size_t interval_n, std::size_t order_d);

// Linear combination of a stack with coefficients from reuse_coefficients.
Matrix combine_stack(std::span<const Matrix> stack,
                     std::span<const float> coefficients);

struct OnlineSoftmaxState {
  std::vector<float> m;  // running row max
  std::vector<float> l;  // running normalizer
  Matrix acc;            // unnormalized output

  OnlineSoftmaxState(std::size_t rows, std::size_t d);
  Matrix finalize() const;
};

// Rescale-and-accumulate with one block of (already scaled) scores.
void online_softmax_update(OnlineSoftmaxState& state, const Matrix& scores,
                           const Matrix& v_block);

enum class ReuseMode {
  kMaterialize,  // cached tiles are written as op_reuse output
  kBias,         // cached tiles are left unwritten; GEMM-O adds the bias
};

struct AttentionParams {
  std::size_t block_q = 16;
  std::size_t block_k = 16;
  std::size_t interval_n = 1;
  std::size_t order_d = 0;
  std::size_t elapsed_k = 0;
  ReuseMode mode = ReuseMode::kMaterialize;
  // Fill unwritten rows with NaN so illegal reads surface.
  bool poison_unwritten = false;
};

// Work counters in block units; merged by plain addition.
struct AttentionCounters {
  std::uint64_t pairs_total = 0;     // T_q * T_kv per call
  std::uint64_t pairs_computed = 0;  // Q_i K_j^T products performed
  std::uint64_t tiles_cached = 0;
  std::uint64_t tiles_computed = 0;
  std::uint64_t score_macs = 0;      // multiply-accumulates in QK^T and PV

  std::uint64_t pairs_skipped() const { return pairs_total - pairs_computed; }
  AttentionCounters& operator+=(const AttentionCounters& o);
};

// Single-head sparse attention. `cache` is indexed by query block and only
// read for tiles whose cache bit is 0 in materialize mode.
Matrix flashomni_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                           const SymbolBuffer& symbols,
                           std::span<const FeatureCacheEntry> cache,
                           const AttentionParams& params,
                           AttentionCounters* counters = nullptr);

}  // namespace omni
